#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sva {

class HttpTransport;

enum class Modality { Code, Description };

std::string_view to_string(Modality m) noexcept;

struct EmbeddingVector {
    std::vector<double> values;
    Modality modality = Modality::Description;

    std::size_t size() const noexcept { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

struct EmbeddingProviderConfig {
    std::string provider_id;
    std::string endpoint;  // empty for in-process providers
    std::size_t code_dimension = 0;
    std::size_t desc_dimension = 0;

    std::size_t dimension(Modality m) const noexcept {
        return m == Modality::Code ? code_dimension : desc_dimension;
    }
    void validate() const;
};

/// Maps texts of one modality to vectors. Implementations must be
/// deterministic for a fixed configuration and input.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual const EmbeddingProviderConfig& config() const = 0;
    virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts,
                                                     Modality modality) = 0;
};

// Validating entry points. Both reject blank input (EmptyInput), and check the
// provider's output length and finiteness (DimensionMismatch / ProviderError).
EmbeddingVector embed_code(std::string_view code, EmbeddingProvider& provider);
EmbeddingVector embed_description(std::string_view text, EmbeddingProvider& provider);

/// Batched variant of the two calls above; results match element-wise.
std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts, Modality modality,
                                         EmbeddingProvider& provider);

/// Lowercased alphanumeric tokens, each expanded to its character 3-grams
/// (tokens shorter than three characters are kept whole).
std::vector<std::string> fallback_features(std::string_view text);

/// Offline embedder: signed feature hashing of `fallback_features` into
/// `dimension` buckets, then L2 normalization.
EmbeddingVector fallback_embed(std::string_view text, std::size_t dimension, std::uint64_t seed,
                               Modality modality = Modality::Description);

class FallbackEmbedder final : public EmbeddingProvider {
public:
    static constexpr std::size_t kDefaultDimension = 512;
    static constexpr std::uint64_t kDefaultSeed = 0x5eed;

    explicit FallbackEmbedder(std::size_t code_dimension = kDefaultDimension,
                              std::size_t desc_dimension = kDefaultDimension,
                              std::uint64_t seed = kDefaultSeed);

    const EmbeddingProviderConfig& config() const override { return config_; }
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts,
                                             Modality modality) override;

private:
    EmbeddingProviderConfig config_;
    std::uint64_t seed_;
};

/// Client for the HTTP embedding contract:
///   POST {endpoint}/embed  {"texts":[...],"modality":"code"|"description"}
///     -> {"vectors":[[...]],"dimension":D,"provider_id":"..."}
///   GET  {endpoint}/health -> {"status","provider_id","code_dimension","desc_dimension"}
class RemoteEmbedder final : public EmbeddingProvider {
public:
    static constexpr std::size_t kMaxBatch = 64;

    RemoteEmbedder(EmbeddingProviderConfig config, std::shared_ptr<HttpTransport> transport);

    /// Reads provider id and dimensions from the service's health endpoint.
    static RemoteEmbedder from_health(const std::string& endpoint,
                                      std::shared_ptr<HttpTransport> transport);

    const EmbeddingProviderConfig& config() const override { return config_; }
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts,
                                             Modality modality) override;

private:
    EmbeddingProviderConfig config_;
    std::shared_ptr<HttpTransport> transport_;
};

/// (a . b) / (|a| |b|), clamped to [-1, 1].
/// Throws DimensionMismatch on unequal lengths, ZeroVector if either norm is 0.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace sva
