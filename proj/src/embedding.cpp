#include "sva/embedding.hpp"

#include "sva/error.hpp"
#include "sva/http.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace sva {

using nlohmann::json;

std::string_view to_string(Modality m) noexcept {
    return m == Modality::Code ? "code" : "description";
}

void EmbeddingProviderConfig::validate() const {
    if (provider_id.empty()) {
        throw Error(ErrorKind::ConfigError, "embedding provider_id must be non-empty");
    }
    if (code_dimension < 1 || desc_dimension < 1) {
        throw Error(ErrorKind::ConfigError, "embedding dimensions must be >= 1");
    }
}

namespace {

bool is_blank(std::string_view text) {
    return std::all_of(text.begin(), text.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void append_grams(const std::string& token, std::vector<std::string>& out) {
    if (token.size() < 3) {
        out.push_back(token);
        return;
    }
    for (std::size_t i = 0; i + 3 <= token.size(); ++i) out.push_back(token.substr(i, 3));
}

}  // namespace

std::vector<std::string> fallback_features(std::string_view text) {
    std::vector<std::string> features;
    std::string token;
    auto flush = [&] {
        if (!token.empty()) append_grams(token, features);
        token.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            token.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();

    // Punctuation-only snippets ("{}", "->") still need a signal.
    if (features.empty()) {
        for (unsigned char c : text) {
            if (std::isspace(c)) {
                flush();
            } else {
                token.push_back(static_cast<char>(c));
            }
        }
        flush();
    }
    return features;
}

EmbeddingVector fallback_embed(std::string_view text, std::size_t dimension, std::uint64_t seed,
                               Modality modality) {
    if (dimension < 1) {
        throw Error(ErrorKind::InvalidArgument, "fallback dimension must be >= 1");
    }
    if (is_blank(text)) {
        throw Error(ErrorKind::EmptyInput, "cannot embed blank text");
    }
    EmbeddingVector out{std::vector<double>(dimension, 0.0), modality};
    for (const auto& gram : fallback_features(text)) {
        const std::uint64_t h = splitmix(fnv1a(gram) ^ seed);
        const double sign = ((h >> 32) & 1U) != 0U ? -1.0 : 1.0;
        out.values[h % dimension] += sign;
    }
    double norm_sq = 0.0;
    for (double v : out.values) norm_sq += v * v;
    if (norm_sq == 0.0) {
        throw Error(ErrorKind::ZeroVector, "hashed features cancelled to the zero vector");
    }
    const double norm = std::sqrt(norm_sq);
    for (double& v : out.values) v /= norm;
    return out;
}

FallbackEmbedder::FallbackEmbedder(std::size_t code_dimension, std::size_t desc_dimension,
                                   std::uint64_t seed)
    : seed_(seed) {
    std::ostringstream id;
    id << "fallback-ngram3:code=" << code_dimension << ",desc=" << desc_dimension
       << ",seed=" << seed;
    config_ = EmbeddingProviderConfig{id.str(), "", code_dimension, desc_dimension};
    config_.validate();
}

std::vector<EmbeddingVector> FallbackEmbedder::embed_batch(std::span<const std::string> texts,
                                                           Modality modality) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        out.push_back(fallback_embed(text, config_.dimension(modality), seed_, modality));
    }
    return out;
}

std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts, Modality modality,
                                         EmbeddingProvider& provider) {
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (is_blank(texts[i])) {
            throw Error(ErrorKind::EmptyInput,
                        "text #" + std::to_string(i) + " is blank (" +
                            std::string(to_string(modality)) + ")");
        }
    }
    auto vectors = provider.embed_batch(texts, modality);
    if (vectors.size() != texts.size()) {
        throw Error(ErrorKind::ProviderError,
                    "provider returned " + std::to_string(vectors.size()) + " vectors for " +
                        std::to_string(texts.size()) + " texts");
    }
    const std::size_t expected = provider.config().dimension(modality);
    for (auto& v : vectors) {
        if (v.size() != expected) {
            throw Error(ErrorKind::DimensionMismatch,
                        "expected " + std::to_string(expected) + " components, got " +
                            std::to_string(v.size()));
        }
        if (!std::all_of(v.values.begin(), v.values.end(),
                         [](double x) { return std::isfinite(x); })) {
            throw Error(ErrorKind::ProviderError, "provider returned a non-finite component");
        }
        v.modality = modality;
    }
    return vectors;
}

EmbeddingVector embed_code(std::string_view code, EmbeddingProvider& provider) {
    const std::string text(code);
    return std::move(embed_texts(std::span(&text, 1), Modality::Code, provider).front());
}

EmbeddingVector embed_description(std::string_view text, EmbeddingProvider& provider) {
    const std::string owned(text);
    return std::move(embed_texts(std::span(&owned, 1), Modality::Description, provider).front());
}

// --- Remote provider ---

RemoteEmbedder::RemoteEmbedder(EmbeddingProviderConfig config,
                               std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    config_.validate();
    if (config_.endpoint.empty()) {
        throw Error(ErrorKind::ConfigError, "remote embedder requires an endpoint");
    }
}

RemoteEmbedder RemoteEmbedder::from_health(const std::string& endpoint,
                                           std::shared_ptr<HttpTransport> transport) {
    HttpRequest request;
    request.url = join_url(endpoint, "health");
    HttpResponse response;
    try {
        response = transport->send(request);
    } catch (const Error& e) {
        throw Error(ErrorKind::ProviderUnavailable, e.what());
    }
    if (response.status != 200) {
        throw Error(ErrorKind::ProviderUnavailable,
                    "health check returned HTTP " + std::to_string(response.status));
    }
    try {
        const json body = json::parse(response.body);
        EmbeddingProviderConfig config{body.at("provider_id").get<std::string>(), endpoint,
                                       body.at("code_dimension").get<std::size_t>(),
                                       body.at("desc_dimension").get<std::size_t>()};
        return RemoteEmbedder(std::move(config), std::move(transport));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("health payload: ") + e.what());
    }
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts,
                                                         Modality modality) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += kMaxBatch) {
        const auto chunk = texts.subspan(start, std::min(kMaxBatch, texts.size() - start));
        json payload{{"texts", json::array()}, {"modality", std::string(to_string(modality))}};
        for (const auto& t : chunk) payload["texts"].push_back(t);

        HttpRequest request;
        request.method = "POST";
        request.url = join_url(config_.endpoint, "embed");
        request.body = payload.dump();
        HttpResponse response;
        try {
            response = transport_->send(request);
        } catch (const Error& e) {
            throw Error(ErrorKind::ProviderUnavailable, e.what());
        }
        if (response.status == 503) {
            throw Error(ErrorKind::ProviderUnavailable, "embedding service not ready (503)");
        }
        if (response.status != 200) {
            throw Error(ErrorKind::ProviderError, "embedding service returned HTTP " +
                                                      std::to_string(response.status) + ": " +
                                                      response.body.substr(0, 200));
        }
        try {
            const json body = json::parse(response.body);
            const auto dimension = body.at("dimension").get<std::size_t>();
            if (dimension != config_.dimension(modality)) {
                throw Error(ErrorKind::DimensionMismatch,
                            "service declared dimension " + std::to_string(dimension) +
                                ", configured " + std::to_string(config_.dimension(modality)));
            }
            for (const auto& row : body.at("vectors")) {
                out.push_back(EmbeddingVector{row.get<std::vector<double>>(), modality});
            }
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, std::string("embed payload: ") + e.what());
        }
    }
    return out;
}

// --- Similarity ---

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::DimensionMismatch, "cosine of vectors with lengths " +
                                                      std::to_string(a.size()) + " and " +
                                                      std::to_string(b.size()));
    }
    double dot = 0.0;
    double norm_a = 0.0;
    double norm_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if (norm_a == 0.0 || norm_b == 0.0) {
        throw Error(ErrorKind::ZeroVector, "cosine similarity of a zero vector");
    }
    return std::clamp(dot / (std::sqrt(norm_a) * std::sqrt(norm_b)), -1.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.modality != b.modality) {
        throw Error(ErrorKind::InvalidArgument, "cross-modality similarity is not defined");
    }
    return cosine_similarity(std::span<const double>(a.values), std::span<const double>(b.values));
}

}  // namespace sva
