// sva: build an enriched CVE knowledge base, retrieve similar vulnerabilities,
// prompt an LLM for a CVSS v3 severity and score the predictions.

#include "sva/dataset.hpp"
#include "sva/enrichment.hpp"
#include "sva/error.hpp"
#include "sva/evaluation.hpp"
#include "sva/http.hpp"
#include "sva/knowledge_base.hpp"
#include "sva/llm_client.hpp"
#include "sva/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace {

using namespace sva;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIsolation = 3;
constexpr int kExitProvider = 4;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::IsolationViolation: return kExitIsolation;
    case ErrorKind::AuthFailed:
    case ErrorKind::RateLimited:
    case ErrorKind::Timeout:
    case ErrorKind::NetworkError:
    case ErrorKind::ProviderError:
    case ErrorKind::ProviderUnavailable: return kExitProvider;
    default: return kExitConfig;
    }
}

std::string env_or(const char* name, const std::string& fallback = {}) {
    const char* v = std::getenv(name);
    return (v && *v) ? std::string(v) : fallback;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::FileNotFound, "cannot write " + path.string());
    out << text;
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
    std::vector<T> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        std::istringstream cell(item);
        T value{};
        if (!(cell >> value)) throw Error(ErrorKind::ConfigError, "bad list item '" + item + "'");
        out.push_back(value);
    }
    return out;
}

StoreLayout layout_of(const std::filesystem::path& store) {
    return std::filesystem::is_directory(store) ? StoreLayout::Directory : StoreLayout::Jsonl;
}

// --- Shared option groups ---

struct EmbedderOptions {
    std::string provider = "fallback";
    std::size_t dim = FallbackEmbedder::kDefaultDimension;
    std::uint64_t seed = FallbackEmbedder::kDefaultSeed;
    std::string endpoint;

    void attach(CLI::App* cmd) {
        cmd->add_option("--provider", provider, "Embedding provider")
            ->check(CLI::IsMember({"fallback", "remote"}))
            ->capture_default_str();
        cmd->add_option("--dim", dim, "Fallback embedding dimension (code and description)")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--embed-seed", seed, "Fallback hashing seed")->capture_default_str();
        cmd->add_option("--endpoint", endpoint, "Remote embedding service (default $SVA_EMBED_ENDPOINT)");
    }

    std::unique_ptr<EmbeddingProvider> make() const {
        if (provider == "fallback") return std::make_unique<FallbackEmbedder>(dim, dim, seed);
        const std::string url = endpoint.empty() ? env_or("SVA_EMBED_ENDPOINT") : endpoint;
        if (url.empty()) throw Error(ErrorKind::ConfigError, "remote provider needs --endpoint or SVA_EMBED_ENDPOINT");
        return std::make_unique<RemoteEmbedder>(RemoteEmbedder::from_health(url, make_default_transport()));
    }
};

struct LlmOptions {
    std::string mock;
    std::string transcript;
    int max_retries = 3;
    std::size_t max_in_flight = 4;

    void attach(CLI::App* cmd) {
        cmd->add_option("--mock", mock,
                        "Offline LLM: echo-majority | fixed:<LABEL> | script (needs --transcript)");
        cmd->add_option("--transcript", transcript, "JSONL of {prompt_sha256, reply} for --mock script");
        cmd->add_option("--max-retries", max_retries, "Retries for transient provider errors")
            ->capture_default_str();
        cmd->add_option("--max-in-flight", max_in_flight, "Concurrent request cap")->capture_default_str();
    }

    std::unique_ptr<LlmBackend> make() const {
        if (mock.empty()) {
            LlmConfig config = LlmConfig::from_env();
            config.max_retries = max_retries;
            config.max_in_flight = max_in_flight;
            return std::make_unique<ChatCompletionClient>(config, make_default_transport());
        }
        if (mock == "echo-majority") return std::make_unique<MockLlm>(MockLlm::echo_majority());
        if (mock.rfind("fixed:", 0) == 0) {
            return std::make_unique<MockLlm>(MockLlm::fixed(parse_label(mock.substr(6))));
        }
        if (mock == "script") {
            if (transcript.empty()) throw Error(ErrorKind::ConfigError, "--mock script needs --transcript");
            return std::make_unique<MockLlm>(MockLlm::script(std::filesystem::path(transcript)));
        }
        throw Error(ErrorKind::ConfigError, "unknown --mock policy '" + mock + "'");
    }
};

PromptTemplate load_template(const std::string& path) {
    return path.empty() ? PromptTemplate::default_template() : PromptTemplate::from_file(path);
}

std::vector<VulnerabilityRecord> read_records(const std::string& path) {
    auto result = ingest_dataset(path);
    for (const auto& e : result.errors) {
        std::cerr << path << ":" << e.line_no << ": skipped malformed line: " << e.reason << "\n";
    }
    return std::move(result.records);
}

// --- Subcommands ---

int cmd_build_kb(const std::string& input, const std::string& out, const std::string& layout) {
    auto result = ingest_dataset(input);
    std::vector<KnowledgeEntry> entries;
    entries.reserve(result.records.size());
    for (const auto& r : result.records) entries.push_back(normalize_entry(r));
    save_store(out, entries, layout == "dir" ? StoreLayout::Directory : StoreLayout::Jsonl);
    for (const auto& e : result.errors) {
        std::cerr << input << ":" << e.line_no << ": malformed: " << e.reason << "\n";
    }
    std::cout << "records: " << result.records.size() << ", malformed lines: " << result.errors.size()
              << ", store: " << out << "\n";
    return kExitOk;
}

int cmd_enrich(const std::string& store, bool live, int nvd_interval_ms) {
    NvdClientConfig nvd_config;
    CweClientConfig cwe_config;
    nvd_config.base_url = env_or("SVA_NVD_BASE_URL", live ? NvdClientConfig::kPublicBaseUrl : "");
    cwe_config.base_url = env_or("SVA_CWE_BASE_URL", live ? CweClientConfig::kPublicBaseUrl : "");
    if (nvd_config.base_url.empty() || cwe_config.base_url.empty()) {
        throw Error(ErrorKind::ConfigError,
                    "set SVA_NVD_BASE_URL and SVA_CWE_BASE_URL, or pass --live to query the public services");
    }
    if (auto key = env_or("SVA_NVD_API_KEY"); !key.empty()) nvd_config.api_key = key;
    if (nvd_interval_ms >= 0) nvd_config.min_interval = std::chrono::milliseconds(nvd_interval_ms);

    auto transport = make_default_transport();
    NvdClient nvd(nvd_config, transport);
    CweClient cwe(cwe_config, transport);
    auto entries = load_store(store);
    const auto report = enrich_entries(entries, nvd, cwe);
    save_store(store, entries, layout_of(store));
    for (const auto& f : report.failures) std::cerr << "warning: " << f << "\n";
    std::cout << "nvd found: " << report.nvd_found << ", nvd absent: " << report.nvd_absent
              << ", cwe found: " << report.cwe_found << ", failures: " << report.failures.size() << "\n";
    return kExitOk;
}

int cmd_embed(const std::string& store, const EmbedderOptions& opts) {
    auto provider = opts.make();
    auto entries = load_store(store);
    const auto updated = embed_entries(entries, *provider);
    save_store(store, entries, layout_of(store));
    std::cout << "embedded " << updated << " of " << entries.size() << " entries with "
              << provider->config().provider_id << "\n";
    return kExitOk;
}

int cmd_split(const std::string& input, std::uint64_t seed, const std::string& ratios,
              const std::string& out_dir) {
    SplitSpec spec;
    spec.seed = seed;
    if (!ratios.empty()) {
        const auto r = parse_list<double>(ratios);
        if (r.size() != 3) throw Error(ErrorKind::ConfigError, "--ratios needs three values");
        spec.knowledge = r[0];
        spec.validation = r[1];
        spec.test = r[2];
    }
    const auto records = read_records(input);
    const auto splits = stratified_split(records, spec);
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    write_records(dir / "knowledge.jsonl", splits.knowledge);
    write_records(dir / "validation.jsonl", splits.validation);
    write_records(dir / "test.jsonl", splits.test);
    std::cout << "knowledge " << splits.knowledge.size() << ", validation " << splits.validation.size()
              << ", test " << splits.test.size() << "\n";
    return kExitOk;
}

struct AssessArgs {
    std::string store;
    std::string test;
    std::string out;
    std::string report_out;
    std::string template_path;
    double phi = RetrievalConfig::kDefaultPhi;
    std::size_t top_k = RetrievalConfig::kDefaultK;
    std::size_t max_samples = 0;
    std::size_t budget_tokens = 0;
    std::uint64_t seed = 42;
    bool resume = false;
};

int cmd_assess(const AssessArgs& args, const EmbedderOptions& emb, const LlmOptions& llm_opts) {
    const auto store = load_store(args.store);
    const auto targets = read_records(args.test);
    check_isolation(targets, store);
    auto provider = emb.make();
    check_store_embedded(store, *provider);
    auto llm = llm_opts.make();
    const auto tmpl = load_template(args.template_path);

    AssessOptions options;
    options.retrieval.phi = args.phi;
    options.retrieval.k = args.top_k;
    options.seed = args.seed;
    if (args.max_samples > 0) options.max_samples = args.max_samples;
    if (args.budget_tokens > 0) options.budget_tokens = args.budget_tokens;
    options.retrieval.validate();

    RunConfigSnapshot snapshot;
    snapshot.phi = args.phi;
    snapshot.k = args.top_k;
    snapshot.embedding_provider_id = provider->config().provider_id;
    snapshot.llm_id = llm->id();
    snapshot.template_version = tmpl.version();
    snapshot.template_sha256 = tmpl.sha256();
    snapshot.seed = args.seed;
    snapshot.started_at = utc_timestamp();
    ManifestWriter writer(args.out, snapshot, args.resume);

    const auto run = assess(targets, store, *provider, *llm, tmpl, options, &writer);
    if (run.stopped_by_budget) std::cerr << "stopped: --budget-tokens reached\n";

    const auto full = load_manifest(args.out);
    std::size_t failures = 0;
    for (const auto& s : full.samples) failures += s.provider_failed() ? 1 : 0;
    std::cout << "assessed " << run.samples.size() << " samples this run, " << full.samples.size()
              << " in manifest " << args.out << "\n";
    if (!full.samples.empty()) {
        const auto rep = report(full);
        std::cout << render_report(rep);
        if (!args.report_out.empty()) write_text(args.report_out, to_json(rep).dump(2) + "\n");
    }
    if (failures > 0) {
        std::cerr << failures << " samples failed at the provider after retries\n";
        return kExitProvider;
    }
    return kExitOk;
}

int cmd_evaluate(const std::string& predictions, const std::string& truth, const std::string& out,
                 const std::string& csv) {
    std::map<std::string, std::optional<Severity>> predicted;
    std::ifstream in(predictions);
    if (!in) throw Error(ErrorKind::FileNotFound, predictions);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const json j = json::parse(line);
        if (j.value("type", "sample") != "sample") continue;
        const json& label = j.contains("predicted") ? j.at("predicted") : j.at("parsed_label");
        std::optional<Severity> s;
        if (label.is_string()) s = severity_from_label(label.get<std::string>());
        predicted[j.at("cve_id").get<std::string>()] = s;
    }
    const auto records = read_records(truth);
    std::vector<PredictionPair> pairs;
    std::size_t missing = 0;
    for (const auto& r : records) {
        auto it = predicted.find(r.cve_id);
        if (it == predicted.end()) ++missing;
        pairs.push_back(PredictionPair{r.severity, it == predicted.end() ? std::nullopt : it->second});
    }
    if (missing > 0) std::cerr << missing << " truth records have no prediction; scored as unparseable\n";
    const auto rep = evaluate_run(pairs);
    write_text(out, to_json(rep).dump(2) + "\n");
    if (!csv.empty()) write_text(csv, metrics_csv(rep, "sva"));
    std::cout << metrics_csv(rep, "sva");
    return kExitOk;
}

int cmd_report(const std::string& manifest_path, const std::string& out) {
    const auto rep = report(load_manifest(manifest_path));
    std::cout << render_report(rep);
    if (!out.empty()) write_text(out, to_json(rep).dump(2) + "\n");
    return kExitOk;
}

int cmd_sweep(const std::string& store_path, const std::string& test, const std::string& phis,
              const std::string& ks, const std::string& out_dir, const std::string& template_path,
              const EmbedderOptions& emb, const LlmOptions& llm_opts) {
    const auto store = load_store(store_path);
    const auto targets = read_records(test);
    auto provider = emb.make();
    auto llm = llm_opts.make();
    SweepOptions options;
    options.phis = parse_list<double>(phis);
    options.ks = parse_list<std::size_t>(ks);
    const auto result = sweep(targets, store, *provider, *llm, load_template(template_path), options);

    std::cout << "Code/description weighting (k = " << options.fixed_k << ")\n"
              << phi_table_markdown(result) << "\nRetrieved samples (phi = " << options.fixed_phi << ")\n"
              << k_table_markdown(result);
    if (!out_dir.empty()) {
        const std::filesystem::path dir(out_dir);
        write_text(dir / "phi_sweep.md", phi_table_markdown(result));
        write_text(dir / "phi_sweep.csv", phi_table_csv(result));
        write_text(dir / "k_sweep.md", k_table_markdown(result));
        write_text(dir / "k_sweep.csv", k_table_csv(result));
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval-augmented CVSS v3 severity assessment"};
    app.require_subcommand(1);

    std::string input;
    std::string out;
    std::string layout = "jsonl";
    auto* build = app.add_subcommand("build-kb", "Ingest a JSONL dataset into a knowledge store");
    build->add_option("--input", input, "Dataset JSONL")->required();
    build->add_option("--out", out, "Store path (file for jsonl, directory for dir)")->required();
    build->add_option("--layout", layout, "Store layout")->check(CLI::IsMember({"jsonl", "dir"}))->capture_default_str();

    std::string store;
    bool live = false;
    int nvd_interval_ms = -1;
    auto* enrich = app.add_subcommand("enrich", "Attach NVD metrics and CWE knowledge to a store");
    enrich->add_option("--store", store, "Knowledge store")->required();
    enrich->add_flag("--live", live, "Use the public NVD/CWE services when no base URL is configured");
    enrich->add_option("--nvd-interval-ms", nvd_interval_ms, "Minimum spacing of NVD requests (default 1200)");

    EmbedderOptions emb;
    auto* embed = app.add_subcommand("embed", "Embed code and descriptions of every store entry");
    embed->add_option("--store", store, "Knowledge store")->required();
    emb.attach(embed);

    std::uint64_t seed = 42;
    std::string ratios;
    std::string out_dir;
    auto* split = app.add_subcommand("split", "Stratified knowledge/validation/test split");
    split->add_option("--input", input, "Dataset JSONL")->required();
    split->add_option("--seed", seed, "Shuffle seed")->capture_default_str();
    split->add_option("--ratios", ratios, "knowledge,validation,test (default 0.8,0.1,0.1)");
    split->add_option("--out-dir", out_dir, "Output directory")->required();

    AssessArgs aargs;
    LlmOptions llm_opts;
    auto* assess_cmd = app.add_subcommand("assess", "Assess test records against the store");
    assess_cmd->add_option("--store", aargs.store, "Embedded knowledge store")->required();
    assess_cmd->add_option("--test", aargs.test, "Records to assess (JSONL)")->required();
    assess_cmd->add_option("--out", aargs.out, "Run manifest (JSONL)")->required();
    assess_cmd->add_option("--report", aargs.report_out, "Also write the report JSON here");
    assess_cmd->add_option("--phi", aargs.phi, "Code-similarity weight")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    assess_cmd->add_option("--top-k", aargs.top_k, "Demonstrations per prompt")->capture_default_str();
    assess_cmd->add_option("--max-samples", aargs.max_samples, "Stop after this many samples");
    assess_cmd->add_option("--budget-tokens", aargs.budget_tokens, "Stop before estimated input tokens exceed this");
    assess_cmd->add_option("--seed", aargs.seed, "Recorded in the manifest")->capture_default_str();
    assess_cmd->add_option("--template", aargs.template_path, "Prompt template file");
    assess_cmd->add_flag("--resume", aargs.resume, "Skip cve_ids already in the manifest");
    emb.attach(assess_cmd);
    llm_opts.attach(assess_cmd);

    std::string predictions;
    std::string truth;
    std::string csv;
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
    evaluate->add_option("--predictions", predictions, "JSONL with cve_id and predicted (or a manifest)")->required();
    evaluate->add_option("--truth", truth, "Ground-truth records (JSONL)")->required();
    evaluate->add_option("--out", out, "Report JSON")->required();
    evaluate->add_option("--csv", csv, "Also write a one-row metrics table");

    std::string manifest;
    auto* report_cmd = app.add_subcommand("report", "Metrics and token statistics of a run manifest");
    report_cmd->add_option("--manifest", manifest, "Run manifest (JSONL)")->required();
    report_cmd->add_option("--out", out, "Report JSON");

    std::string phi_sweep = "1.0,0.9,0.8,0.7,0.6,0.5,0.4,0.3,0.2,0.1,0.0";
    std::string k_sweep = "0,3,5,7";
    std::string template_path;
    auto* sweep_cmd = app.add_subcommand("sweep", "Weighting and retrieval-depth ablation tables");
    sweep_cmd->add_option("--store", store, "Embedded knowledge store")->required();
    sweep_cmd->add_option("--test", input, "Records to assess (JSONL)")->required();
    sweep_cmd->add_option("--phi-sweep", phi_sweep, "Comma-separated phi values")->capture_default_str();
    sweep_cmd->add_option("--k-sweep", k_sweep, "Comma-separated k values")->capture_default_str();
    sweep_cmd->add_option("--out-dir", out_dir, "Write markdown and CSV tables here");
    sweep_cmd->add_option("--template", template_path, "Prompt template file");
    emb.attach(sweep_cmd);
    llm_opts.attach(sweep_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*build) return cmd_build_kb(input, out, layout);
        if (*enrich) return cmd_enrich(store, live, nvd_interval_ms);
        if (*embed) return cmd_embed(store, emb);
        if (*split) return cmd_split(input, seed, ratios, out_dir);
        if (*assess_cmd) return cmd_assess(aargs, emb, llm_opts);
        if (*evaluate) return cmd_evaluate(predictions, truth, out, csv);
        if (*report_cmd) return cmd_report(manifest, out);
        if (*sweep_cmd) return cmd_sweep(store, input, phi_sweep, k_sweep, out_dir, template_path, emb, llm_opts);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}
