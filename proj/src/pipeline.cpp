#include "sva/pipeline.hpp"

#include "sva/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <limits>
#include <sstream>

namespace sva {

using nlohmann::json;

namespace {

json optional_int(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::int64_t> read_optional_int(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::int64_t>();
}

std::string percent(double fraction) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << fraction * 100.0;
    return out.str();
}

std::string weight_label(double w) {
    std::ostringstream out;
    out << static_cast<long>(std::lround(w * 100.0)) << "%";
    return out.str();
}

std::string k_setting_label(std::size_t k) {
    return k == 0 ? "without RAG(zero-shot)" : std::to_string(k) + "-shot";
}

}  // namespace

// --- Manifest ---

bool RunConfigSnapshot::same_run(const RunConfigSnapshot& o) const noexcept {
    return phi == o.phi && k == o.k && embedding_provider_id == o.embedding_provider_id &&
           llm_id == o.llm_id && template_sha256 == o.template_sha256 && seed == o.seed;
}

bool SampleResult::provider_failed() const noexcept {
    return error_kind == to_string(ErrorKind::RateLimited) ||
           error_kind == to_string(ErrorKind::Timeout) ||
           error_kind == to_string(ErrorKind::NetworkError) ||
           error_kind == to_string(ErrorKind::ProviderError) ||
           error_kind == to_string(ErrorKind::AuthFailed);
}

json to_json(const RunConfigSnapshot& c) {
    return json{{"type", "run"},
                {"phi", c.phi},
                {"k", c.k},
                {"embedding_provider_id", c.embedding_provider_id},
                {"llm_id", c.llm_id},
                {"template_version", c.template_version},
                {"template_sha256", c.template_sha256},
                {"seed", c.seed},
                {"started_at", c.started_at}};
}

json to_json(const SampleResult& s) {
    return json{{"type", "sample"},
                {"cve_id", s.cve_id},
                {"true_label", std::string(to_string(s.truth))},
                {"retrieved_ids", s.retrieved_ids},
                {"prompt_tokens_est", s.prompt_tokens_est},
                {"context_tokens_est", s.context_tokens_est},
                {"prompt_sha256", s.prompt_sha256},
                {"reply", s.reply},
                {"parsed_label", s.parsed_label ? json(std::string(to_string(*s.parsed_label))) : json(nullptr)},
                {"input_tokens", optional_int(s.input_tokens)},
                {"output_tokens", optional_int(s.output_tokens)},
                {"error_kind", s.error_kind.empty() ? json(nullptr) : json(s.error_kind)},
                {"error", s.error.empty() ? json(nullptr) : json(s.error)}};
}

RunConfigSnapshot run_config_from_json(const json& j) {
    RunConfigSnapshot c;
    c.phi = j.at("phi").get<double>();
    c.k = j.at("k").get<std::size_t>();
    c.embedding_provider_id = j.at("embedding_provider_id").get<std::string>();
    c.llm_id = j.at("llm_id").get<std::string>();
    c.template_version = j.at("template_version").get<std::string>();
    c.template_sha256 = j.at("template_sha256").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.started_at = j.at("started_at").get<std::string>();
    return c;
}

SampleResult sample_from_json(const json& j) {
    SampleResult s;
    s.cve_id = j.at("cve_id").get<std::string>();
    s.truth = parse_label(j.at("true_label").get<std::string>());
    s.retrieved_ids = j.at("retrieved_ids").get<std::vector<std::string>>();
    s.prompt_tokens_est = j.at("prompt_tokens_est").get<std::size_t>();
    s.context_tokens_est = j.at("context_tokens_est").get<std::size_t>();
    s.prompt_sha256 = j.at("prompt_sha256").get<std::string>();
    s.reply = j.at("reply").get<std::string>();
    if (!j.at("parsed_label").is_null()) s.parsed_label = parse_label(j.at("parsed_label").get<std::string>());
    s.input_tokens = read_optional_int(j, "input_tokens");
    s.output_tokens = read_optional_int(j, "output_tokens");
    if (!j.at("error_kind").is_null()) s.error_kind = j.at("error_kind").get<std::string>();
    if (!j.at("error").is_null()) s.error = j.at("error").get<std::string>();
    return s;
}

RunManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::FileNotFound, path.string());
    RunManifest manifest;
    bool have_header = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            const auto type = j.at("type").get<std::string>();
            if (type == "run") {
                manifest.config = run_config_from_json(j);
                have_header = true;
            } else if (type == "sample") {
                manifest.samples.push_back(sample_from_json(j));
            }
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw Error(ErrorKind::ParseError, path.string() + ": missing run header");
    return manifest;
}

ManifestWriter::ManifestWriter(const std::filesystem::path& path, const RunConfigSnapshot& config,
                               bool resume) {
    const bool existing = resume && std::filesystem::exists(path) && std::filesystem::file_size(path) > 0;
    if (existing) {
        const RunManifest previous = load_manifest(path);
        if (!previous.config.same_run(config)) {
            throw Error(ErrorKind::ConfigError,
                        path.string() + " was produced by a different run configuration");
        }
        for (const auto& s : previous.samples) completed_.insert(s.cve_id);
        out_.open(path, std::ios::app);
    } else {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        out_.open(path, std::ios::trunc);
        if (out_) out_ << to_json(config).dump() << '\n' << std::flush;
    }
    if (!out_) throw Error(ErrorKind::FileNotFound, "cannot write " + path.string());
}

void ManifestWriter::append(const SampleResult& sample) {
    out_ << to_json(sample).dump() << '\n' << std::flush;
    completed_.insert(sample.cve_id);
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

// --- Assessment ---

void check_isolation(std::span<const VulnerabilityRecord> targets,
                     std::span<const KnowledgeEntry> store) {
    std::unordered_set<std::string> store_ids;
    for (const auto& e : store) store_ids.insert(e.record.cve_id);
    for (const auto& t : targets) {
        if (store_ids.contains(t.cve_id)) {
            throw Error(ErrorKind::IsolationViolation,
                        t.cve_id + " is both an evaluation target and a knowledge-store entry");
        }
    }
}

void check_store_embedded(std::span<const KnowledgeEntry> store, const EmbeddingProvider& provider) {
    const auto& id = provider.config().provider_id;
    for (const auto& e : store) {
        if (!e.embedded() || (!e.record.description_only() && !e.code_embedding)) {
            throw Error(ErrorKind::StoreNotEmbedded, e.record.cve_id + " has no embeddings; run `embed` first");
        }
        if (e.provider_id != id) {
            throw Error(ErrorKind::ConfigError, e.record.cve_id + " was embedded by '" + e.provider_id +
                                                    "', assessing with '" + id + "'");
        }
    }
}

std::vector<RetrievalQuery> embed_targets(std::span<const VulnerabilityRecord> targets,
                                          EmbeddingProvider& provider) {
    std::vector<std::string> descriptions;
    std::vector<std::string> codes;
    std::vector<std::size_t> code_owner;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        descriptions.push_back(targets[i].description);
        if (!targets[i].description_only()) {
            codes.push_back(targets[i].code);
            code_owner.push_back(i);
        }
    }
    auto desc = embed_texts(descriptions, Modality::Description, provider);
    auto code = embed_texts(codes, Modality::Code, provider);
    std::vector<RetrievalQuery> queries;
    queries.reserve(targets.size());
    for (auto& d : desc) queries.push_back(RetrievalQuery{std::nullopt, std::move(d)});
    for (std::size_t n = 0; n < code_owner.size(); ++n) queries[code_owner[n]].code = std::move(code[n]);
    return queries;
}

RunManifest assess_embedded(std::span<const VulnerabilityRecord> targets,
                            std::span<const RetrievalQuery> queries,
                            std::span<const KnowledgeEntry> store, const std::string& provider_id,
                            LlmBackend& llm, const PromptTemplate& tmpl,
                            const AssessOptions& options, ManifestWriter* writer) {
    check_isolation(targets, store);
    options.retrieval.validate();

    RunManifest manifest;
    manifest.config.phi = options.retrieval.phi;
    manifest.config.k = options.retrieval.k;
    manifest.config.embedding_provider_id = provider_id;
    manifest.config.llm_id = llm.id();
    manifest.config.template_version = tmpl.version();
    manifest.config.template_sha256 = tmpl.sha256();
    manifest.config.seed = options.seed;
    manifest.config.started_at = utc_timestamp();

    std::size_t processed = 0;
    std::size_t tokens_spent = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto& target = targets[i];
        if (writer && writer->completed().contains(target.cve_id)) continue;
        if (options.max_samples && processed >= *options.max_samples) break;

        RetrievalConfig rc = options.retrieval;
        rc.exclude_ids.insert(target.cve_id);
        const auto top = retrieve_top_k(queries[i], store, rc);

        std::vector<Demonstration> demos;
        SampleResult sample;
        sample.cve_id = target.cve_id;
        sample.truth = target.severity;
        for (const auto& scored : top) {
            demos.push_back(Demonstration::from_entry(*scored.entry));
            sample.retrieved_ids.push_back(scored.entry->record.cve_id);
        }
        const auto prompt = assemble_prompt(demos, PromptTarget{target.code, target.description}, tmpl);
        if (options.budget_tokens && tokens_spent + prompt.token_estimate > *options.budget_tokens) {
            manifest.stopped_by_budget = true;
            break;
        }
        tokens_spent += prompt.token_estimate;
        sample.prompt_tokens_est = prompt.token_estimate;
        sample.context_tokens_est = prompt.context_token_estimate;
        sample.prompt_sha256 = prompt_sha256(prompt);

        try {
            Completion completion = llm.complete(prompt);
            sample.reply = std::move(completion.reply);
            sample.input_tokens = completion.input_tokens;
            sample.output_tokens = completion.output_tokens;
            sample.parsed_label = try_parse_severity(sample.reply);
            if (!sample.parsed_label) sample.error_kind = to_string(ErrorKind::Unparseable);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::AuthFailed) throw;
            sample.error_kind = to_string(e.kind());
            sample.error = e.what();
        }
        if (writer) writer->append(sample);
        manifest.samples.push_back(std::move(sample));
        ++processed;
    }
    return manifest;
}

RunManifest assess(std::span<const VulnerabilityRecord> targets,
                   std::span<const KnowledgeEntry> store, EmbeddingProvider& provider,
                   LlmBackend& llm, const PromptTemplate& tmpl, const AssessOptions& options,
                   ManifestWriter* writer) {
    check_isolation(targets, store);
    check_store_embedded(store, provider);
    const auto queries = embed_targets(targets, provider);
    return assess_embedded(targets, queries, store, provider.config().provider_id, llm, tmpl,
                           options, writer);
}

// --- Reporting ---

RunReport report(const RunManifest& manifest) {
    if (manifest.samples.empty()) throw Error(ErrorKind::EmptyManifest, "manifest has no samples");
    std::vector<PredictionPair> pairs;
    pairs.reserve(manifest.samples.size());
    RunReport out;
    TokenStats& t = out.tokens;
    t.min = std::numeric_limits<std::size_t>::max();
    double token_sum = 0.0;
    double share_sum = 0.0;
    double provider_sum = 0.0;
    std::size_t provider_n = 0;
    for (const auto& s : manifest.samples) {
        pairs.push_back(PredictionPair{s.truth, s.parsed_label});
        if (s.provider_failed()) ++out.provider_failures;
        ++t.samples;
        token_sum += static_cast<double>(s.prompt_tokens_est);
        t.min = std::min(t.min, s.prompt_tokens_est);
        t.max = std::max(t.max, s.prompt_tokens_est);
        if (s.prompt_tokens_est > 0) {
            share_sum += static_cast<double>(s.context_tokens_est) / static_cast<double>(s.prompt_tokens_est);
        }
        if (s.input_tokens) {
            provider_sum += static_cast<double>(*s.input_tokens);
            ++provider_n;
        }
    }
    t.mean = token_sum / static_cast<double>(t.samples);
    t.context_share = share_sum / static_cast<double>(t.samples);
    if (provider_n > 0) t.provider_input_mean = provider_sum / static_cast<double>(provider_n);
    out.metrics = evaluate_run(pairs);
    return out;
}

json to_json(const RunReport& r) {
    json tokens{{"samples", r.tokens.samples},
                {"estimated", true},
                {"mean", r.tokens.mean},
                {"min", r.tokens.min},
                {"max", r.tokens.max},
                {"context_share", r.tokens.context_share},
                {"provider_input_mean",
                 r.tokens.provider_input_mean ? json(*r.tokens.provider_input_mean) : json(nullptr)}};
    return json{{"metrics", to_json(r.metrics)},
                {"token_stats", tokens},
                {"provider_failures", r.provider_failures}};
}

std::string render_report(const RunReport& r) {
    std::ostringstream out;
    out << "Samples            " << r.metrics.total << " (unparseable " << r.metrics.unparseable_count
        << ", provider failures " << r.provider_failures << ")\n";
    out << "Accuracy           " << percent(r.metrics.accuracy) << " %\n";
    out << "F1-score (macro)   " << percent(r.metrics.macro_f1) << " %\n";
    out << "MCC (macro)        " << percent(r.metrics.macro_mcc) << " %\n";
    out << "MCC (multiclass)   " << percent(r.metrics.multiclass_mcc) << " %  [comparison only]\n";
    out << "\nClass       Precision  Recall     F1         MCC\n";
    for (Severity s : kAllSeverities) {
        const auto& m = r.metrics.per_class[index_of(s)];
        out << std::left << std::setw(12) << to_string(s) << std::setw(11) << percent(m.precision)
            << std::setw(11) << percent(m.recall) << std::setw(11) << percent(m.f1) << percent(m.mcc)
            << "\n";
    }
    out << std::right << std::fixed << std::setprecision(1);
    out << "\nEstimated input tokens: mean " << r.tokens.mean << ", min " << r.tokens.min << ", max "
        << r.tokens.max << "; retrieved context share " << percent(r.tokens.context_share) << " %\n";
    if (r.tokens.provider_input_mean) {
        out << "Provider-reported input tokens: mean " << *r.tokens.provider_input_mean << "\n";
    }
    return out.str();
}

// --- Sweeps ---

SweepResult sweep(std::span<const VulnerabilityRecord> targets,
                  std::span<const KnowledgeEntry> store, EmbeddingProvider& provider,
                  LlmBackend& llm, const PromptTemplate& tmpl, const SweepOptions& options) {
    check_isolation(targets, store);
    check_store_embedded(store, provider);
    const auto queries = embed_targets(targets, provider);
    const auto& id = provider.config().provider_id;

    auto run = [&](double phi, std::size_t k) {
        AssessOptions opts;
        opts.retrieval.phi = phi;
        opts.retrieval.k = k;
        return SweepRow{phi, k, report(assess_embedded(targets, queries, store, id, llm, tmpl, opts)).metrics};
    };

    SweepResult result;
    std::vector<double> phis = options.phis;
    std::sort(phis.begin(), phis.end(), std::greater<>());
    for (double phi : phis) result.phi_rows.push_back(run(phi, options.fixed_k));
    for (std::size_t k : options.ks) result.k_rows.push_back(run(options.fixed_phi, k));
    return result;
}

std::string phi_table_markdown(const SweepResult& result) {
    std::ostringstream out;
    out << "| CosSim_code | CosSim_desc | Accuracy (%) | F1-score (%) | MCC (%) |\n";
    out << "|---|---|---|---|---|\n";
    for (const auto& row : result.phi_rows) {
        out << "| " << weight_label(row.phi) << " | " << weight_label(1.0 - row.phi) << " | "
            << percent(row.metrics.accuracy) << " | " << percent(row.metrics.macro_f1) << " | "
            << percent(row.metrics.macro_mcc) << " |\n";
    }
    return out.str();
}

std::string phi_table_csv(const SweepResult& result) {
    std::ostringstream out;
    out << "CosSim_code,CosSim_desc,Accuracy (%),F1-score (%),MCC (%)\n";
    for (const auto& row : result.phi_rows) {
        out << weight_label(row.phi) << "," << weight_label(1.0 - row.phi) << ","
            << percent(row.metrics.accuracy) << "," << percent(row.metrics.macro_f1) << ","
            << percent(row.metrics.macro_mcc) << "\n";
    }
    return out.str();
}

std::string k_table_markdown(const SweepResult& result) {
    std::ostringstream out;
    out << "| Setting | Accuracy (%) | F1-score (%) | MCC (%) |\n";
    out << "|---|---|---|---|\n";
    for (const auto& row : result.k_rows) {
        out << "| " << k_setting_label(row.k) << " | " << percent(row.metrics.accuracy) << " | "
            << percent(row.metrics.macro_f1) << " | " << percent(row.metrics.macro_mcc) << " |\n";
    }
    return out.str();
}

std::string k_table_csv(const SweepResult& result) {
    std::ostringstream out;
    out << "Setting,Accuracy (%),F1-score (%),MCC (%)\n";
    for (const auto& row : result.k_rows) {
        out << k_setting_label(row.k) << "," << percent(row.metrics.accuracy) << ","
            << percent(row.metrics.macro_f1) << "," << percent(row.metrics.macro_mcc) << "\n";
    }
    return out.str();
}

}  // namespace sva
