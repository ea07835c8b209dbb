#pragma once

#include "sva/embedding.hpp"
#include "sva/evaluation.hpp"
#include "sva/knowledge_base.hpp"
#include "sva/llm_client.hpp"
#include "sva/prompting.hpp"
#include "sva/retrieval.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace sva {

struct RunConfigSnapshot {
    double phi = RetrievalConfig::kDefaultPhi;
    std::size_t k = RetrievalConfig::kDefaultK;
    std::string embedding_provider_id;
    std::string llm_id;
    std::string template_version;
    std::string template_sha256;
    std::uint64_t seed = 42;
    std::string started_at;  // ISO-8601 UTC; the only non-deterministic field

    /// Everything except started_at.
    bool same_run(const RunConfigSnapshot& other) const noexcept;
};

struct SampleResult {
    std::string cve_id;
    Severity truth = Severity::Low;
    std::vector<std::string> retrieved_ids;
    std::size_t prompt_tokens_est = 0;
    std::size_t context_tokens_est = 0;
    std::string prompt_sha256;
    std::string reply;
    std::optional<Severity> parsed_label;
    std::optional<std::int64_t> input_tokens;
    std::optional<std::int64_t> output_tokens;
    std::string error_kind;  // empty on success
    std::string error;

    bool provider_failed() const noexcept;
};

struct RunManifest {
    RunConfigSnapshot config;
    std::vector<SampleResult> samples;
    bool stopped_by_budget = false;
};

nlohmann::json to_json(const RunConfigSnapshot& config);
nlohmann::json to_json(const SampleResult& sample);
RunConfigSnapshot run_config_from_json(const nlohmann::json& j);
SampleResult sample_from_json(const nlohmann::json& j);

/// JSONL manifest: a {"type":"run",...} header line followed by one
/// {"type":"sample",...} line per assessed record.
RunManifest load_manifest(const std::filesystem::path& path);

/// Append-only manifest sink. With `resume`, an existing manifest for the same
/// run configuration is kept and its cve_ids are reported as completed.
class ManifestWriter {
public:
    ManifestWriter(const std::filesystem::path& path, const RunConfigSnapshot& config, bool resume);

    const std::unordered_set<std::string>& completed() const noexcept { return completed_; }
    void append(const SampleResult& sample);

private:
    std::ofstream out_;
    std::unordered_set<std::string> completed_;
};

std::string utc_timestamp();

struct AssessOptions {
    RetrievalConfig retrieval;
    std::optional<std::size_t> max_samples;
    std::optional<std::size_t> budget_tokens;  // cumulative estimated prompt tokens
    std::uint64_t seed = 42;
};

/// IsolationViolation if any target cve_id is present in the store.
void check_isolation(std::span<const VulnerabilityRecord> targets,
                     std::span<const KnowledgeEntry> store);

/// StoreNotEmbedded if an entry lacks embeddings; ConfigError if entries were
/// embedded by a different provider.
void check_store_embedded(std::span<const KnowledgeEntry> store, const EmbeddingProvider& provider);

std::vector<RetrievalQuery> embed_targets(std::span<const VulnerabilityRecord> targets,
                                          EmbeddingProvider& provider);

/// embed -> retrieve top-k (self excluded) -> assemble -> complete -> parse,
/// per target. Per-sample provider failures are recorded and the run goes on;
/// AuthFailed aborts. Samples listed in `writer->completed()` are skipped.
RunManifest assess(std::span<const VulnerabilityRecord> targets,
                   std::span<const KnowledgeEntry> store, EmbeddingProvider& provider,
                   LlmBackend& llm, const PromptTemplate& tmpl, const AssessOptions& options,
                   ManifestWriter* writer = nullptr);

/// As above with target embeddings computed up front (used by sweeps).
RunManifest assess_embedded(std::span<const VulnerabilityRecord> targets,
                            std::span<const RetrievalQuery> queries,
                            std::span<const KnowledgeEntry> store, const std::string& provider_id,
                            LlmBackend& llm, const PromptTemplate& tmpl,
                            const AssessOptions& options, ManifestWriter* writer = nullptr);

struct TokenStats {
    std::size_t samples = 0;
    double mean = 0.0;
    std::size_t min = 0;
    std::size_t max = 0;
    double context_share = 0.0;  // mean per-sample share of retrieved context
    std::optional<double> provider_input_mean;
};

struct RunReport {
    EvaluationReport metrics;
    TokenStats tokens;
    std::size_t provider_failures = 0;
};

/// Throws EmptyManifest when there are no samples.
RunReport report(const RunManifest& manifest);

nlohmann::json to_json(const RunReport& report);
std::string render_report(const RunReport& report);

// --- Ablation sweeps ---

struct SweepRow {
    double phi = 0.0;
    std::size_t k = 0;
    EvaluationReport metrics;
};

struct SweepResult {
    std::vector<SweepRow> phi_rows;  // k fixed, descending phi
    std::vector<SweepRow> k_rows;    // phi fixed, in the given k order
};

struct SweepOptions {
    std::vector<double> phis;
    std::vector<std::size_t> ks;
    double fixed_phi = RetrievalConfig::kDefaultPhi;
    std::size_t fixed_k = RetrievalConfig::kDefaultK;
};

SweepResult sweep(std::span<const VulnerabilityRecord> targets,
                  std::span<const KnowledgeEntry> store, EmbeddingProvider& provider,
                  LlmBackend& llm, const PromptTemplate& tmpl, const SweepOptions& options);

/// Code/description weighting table: CosSim_code, CosSim_desc, Accuracy, F1, MCC (%).
std::string phi_table_markdown(const SweepResult& result);
std::string phi_table_csv(const SweepResult& result);
/// Retrieval-depth table: Setting, Accuracy, F1, MCC (%).
std::string k_table_markdown(const SweepResult& result);
std::string k_table_csv(const SweepResult& result);

}  // namespace sva
