// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "sva/dataset.hpp"
#include "sva/embedding.hpp"
#include "sva/error.hpp"
#include "sva/evaluation.hpp"
#include "sva/knowledge_base.hpp"
#include "sva/llm_client.hpp"
#include "sva/pipeline.hpp"
#include "sva/prompting.hpp"
#include "sva/retrieval.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sva;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void require(bool condition, const std::string& what) {
        if (!condition && ok) {
            ok = false;
            detail = what;
        }
    }
};

int g_failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out.ok = false;
        out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream line;
    line << (out.ok ? "PASS" : "FAIL") << "  " << name << "  (" << std::fixed;
    line.precision(3);
    line << secs << " s)";
    if (!out.detail.empty()) line << "  " << out.detail;
    std::cout << line.str() << std::endl;
    if (!out.ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string cve(int year, int n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "CVE-%04d-%05d", year, n);
    return buf;
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("sva_acceptance_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------
// Metric oracle: metrics recomputed sample by sample from the expanded
// (truth, prediction) list, without the confusion-matrix code paths.

struct ReferenceMetrics {
    double accuracy = 0;
    std::array<double, 4> f1{};
    std::array<double, 4> mcc{};
    double macro_f1 = 0;
    double macro_mcc = 0;
};

ReferenceMetrics reference_metrics(const std::vector<std::pair<int, int>>& pairs) {
    ReferenceMetrics r;
    double correct = 0;
    for (const auto& [t, p] : pairs) correct += (t == p);
    r.accuracy = correct / static_cast<double>(pairs.size());
    for (int c = 0; c < 4; ++c) {
        double tp = 0, fp = 0, fn = 0, tn = 0;
        for (const auto& [t, p] : pairs) {
            const bool is_t = t == c;
            const bool is_p = p == c;
            tp += is_t && is_p;
            fp += !is_t && is_p;
            fn += is_t && !is_p;
            tn += !is_t && !is_p;
        }
        const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        r.f1[c] = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
        const double den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
        r.mcc[c] = den > 0 ? (tp * tn - fp * fn) / den : 0.0;
        r.macro_f1 += r.f1[c] / 4;
        r.macro_mcc += r.mcc[c] / 4;
    }
    return r;
}

Outcome metric_oracle() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    double worst = 0;
    for (int trial = 0; trial < 500; ++trial) {
        ConfusionMatrix::Counts4 counts{};
        std::vector<std::pair<int, int>> pairs;
        // Mix dense, sparse and diagonal-heavy matrices.
        const int max_cell = trial % 5 == 0 ? 2 : 30;
        std::uniform_int_distribution<int> cell(0, max_cell);
        std::bernoulli_distribution zero(trial % 3 == 0 ? 0.6 : 0.1);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                int v = zero(rng) ? 0 : cell(rng);
                if (i == j && trial % 7 == 0) v += 40;
                counts[i][j] = static_cast<std::uint64_t>(v);
                for (int n = 0; n < v; ++n) pairs.emplace_back(i, j);
            }
        }
        if (pairs.empty()) {
            counts[1][2] = 1;
            pairs.emplace_back(1, 2);
        }
        const auto cm = ConfusionMatrix::from_counts(counts);
        const auto ref = reference_metrics(pairs);
        auto diff = [&](double a, double b) {
            worst = std::max(worst, std::abs(a - b));
            return std::abs(a - b) <= 1e-9;
        };
        bool ok = diff(accuracy(cm), ref.accuracy) && diff(macro_f1(cm), ref.macro_f1) &&
                  diff(macro_mcc(cm), ref.macro_mcc);
        for (Severity s : kAllSeverities) {
            ok = ok && diff(per_class_f1(cm, s), ref.f1[index_of(s)]) &&
                 diff(per_class_mcc(cm, s), ref.mcc[index_of(s)]);
        }
        out.require(ok, "trial " + std::to_string(trial) + " differs from the reference");
    }
    const double secs = seconds_since(start);
    out.require(secs < 5.0, "runtime " + std::to_string(secs) + " s");
    if (out.ok) out.detail = "500 matrices, max |diff| " + std::to_string(worst);
    return out;
}

// ---------------------------------------------------------------------------
// Random embedded stores.

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    double s = 0;
    for (auto& x : v) {
        x = n(rng);
        s += x * x;
    }
    for (auto& x : v) x /= std::sqrt(s);
    return v;
}

std::vector<KnowledgeEntry> random_store(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
    std::vector<KnowledgeEntry> store;
    std::bernoulli_distribution no_code(0.1);
    std::bernoulli_distribution duplicate(0.05);
    for (std::size_t i = 0; i < n; ++i) {
        KnowledgeEntry e;
        // Ids are shuffled against insertion order so tie-breaks are exercised.
        e.record = VulnerabilityRecord{cve(2020, static_cast<int>((i * 7919) % 100000)), "c", "d", Severity::Low};
        if (!store.empty() && duplicate(rng)) {
            e.code_embedding = store.back().code_embedding;
            e.desc_embedding = store.back().desc_embedding;
        } else {
            if (!no_code(rng)) e.code_embedding = EmbeddingVector{random_unit(rng, dim), Modality::Code};
            e.desc_embedding = EmbeddingVector{random_unit(rng, dim), Modality::Description};
        }
        e.provider_id = "random";
        store.push_back(std::move(e));
    }
    return store;
}

double plain_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

/// Ids sorted by `score` descending then id ascending.
std::vector<std::string> argsort(const std::vector<KnowledgeEntry>& store,
                                 const std::function<double(const KnowledgeEntry&)>& score) {
    std::vector<std::pair<double, std::string>> rows;
    for (const auto& e : store) rows.emplace_back(score(e), e.record.cve_id);
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> out;
    for (const auto& r : rows) out.push_back(r.second);
    return out;
}

std::vector<std::string> ids_of(const std::vector<ScoredEntry>& ranked) {
    std::vector<std::string> out;
    for (const auto& s : ranked) out.push_back(s.entry->record.cve_id);
    return out;
}

Outcome retrieval_oracle() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(77);
    const std::size_t dim = 64;
    const auto store = random_store(rng, 200, dim);
    int checks = 0;
    for (int q = 0; q < 25; ++q) {
        const RetrievalQuery query{EmbeddingVector{random_unit(rng, dim), Modality::Code},
                                   EmbeddingVector{random_unit(rng, dim), Modality::Description}};
        for (double phi : {0.0, 0.25, 0.6, 1.0}) {
            RetrievalConfig config;
            config.phi = phi;
            const auto full = ids_of(brute_force_rank(query, store, config));
            const auto independent = argsort(store, [&](const KnowledgeEntry& e) {
                const double code = e.code_embedding ? plain_cosine(query.code->values, e.code_embedding->values) : 0.0;
                return phi * code + (1 - phi) * plain_cosine(query.description.values, e.desc_embedding->values);
            });
            out.require(full == independent, "brute_force_rank disagrees with the plain argsort");
            for (std::size_t k : {1u, 3u, 5u, 7u}) {
                config.k = k;
                const auto top = ids_of(retrieve_top_k(query, store, config));
                const std::vector<std::string> prefix(full.begin(), full.begin() + static_cast<long>(k));
                out.require(top == prefix, "top-k differs (phi " + std::to_string(phi) + ", k " + std::to_string(k) + ")");
                ++checks;
            }
        }
    }
    const double secs = seconds_since(start);
    out.require(secs < 10.0, "runtime " + std::to_string(secs) + " s");
    if (out.ok) out.detail = std::to_string(checks) + " (query, phi, k) combinations";
    return out;
}

Outcome fusion_invariants() {
    Outcome out;
    std::mt19937_64 rng(99);
    const std::size_t dim = 16;
    for (int trial = 0; trial < 100; ++trial) {
        const auto store = random_store(rng, 30 + trial % 20, dim);
        const RetrievalQuery query{EmbeddingVector{random_unit(rng, dim), Modality::Code},
                                   EmbeddingVector{random_unit(rng, dim), Modality::Description}};
        const auto by_code = argsort(store, [&](const KnowledgeEntry& e) {
            return e.code_embedding ? cosine_similarity(*query.code, *e.code_embedding) : 0.0;
        });
        const auto by_desc = argsort(store, [&](const KnowledgeEntry& e) {
            return cosine_similarity(query.description, *e.desc_embedding);
        });
        RetrievalConfig config;
        config.k = store.size();
        config.phi = 1.0;
        out.require(ids_of(retrieve_top_k(query, store, config)) == by_code, "phi=1 differs from code-only ranking");
        config.phi = 0.0;
        out.require(ids_of(retrieve_top_k(query, store, config)) == by_desc, "phi=0 differs from description-only ranking");
    }
    if (out.ok) out.detail = "100 stores";
    return out;
}

Outcome cvss_bands() {
    Outcome out;
    const std::vector<std::pair<double, Severity>> cases{
        {0.1, Severity::Low},  {3.9, Severity::Low},      {4.0, Severity::Medium},   {6.9, Severity::Medium},
        {7.0, Severity::High}, {8.9, Severity::High},     {9.0, Severity::Critical}, {10.0, Severity::Critical},
    };
    for (const auto& [score, expected] : cases) {
        out.require(severity_from_score(score) == expected, "wrong band for " + std::to_string(score));
    }
    try {
        severity_from_score(0.0);
        out.require(false, "0.0 accepted");
    } catch (const Error& e) {
        out.require(e.kind() == ErrorKind::OutOfRange, "0.0 raised the wrong error kind");
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<VulnerabilityRecord> imbalanced_corpus(std::array<int, 4> per_class, std::mt19937_64& rng) {
    std::vector<VulnerabilityRecord> out;
    int n = 0;
    for (std::size_t c = 0; c < 4; ++c) {
        for (int i = 0; i < per_class[c]; ++i) {
            out.push_back(VulnerabilityRecord{cve(2018, ++n), "code", "description", kAllSeverities[c]});
        }
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

Outcome stratified_split_criterion() {
    Outcome out;
    std::mt19937_64 rng(5);
    const std::vector<std::array<int, 4>> sizes{{4, 6, 10, 20}, {7, 19, 31, 44}, {50, 150, 300, 500}};
    for (const auto& per_class : sizes) {
        const auto records = imbalanced_corpus(per_class, rng);
        const std::string tag = std::to_string(records.size()) + " records";
        SplitSpec spec;
        const auto a = stratified_split(records, spec);
        const auto b = stratified_split(records, spec);
        out.require(a.knowledge == b.knowledge && a.validation == b.validation && a.test == b.test,
                    tag + ": not deterministic");
        const std::array<const std::vector<VulnerabilityRecord>*, 3> parts{&a.knowledge, &a.validation, &a.test};
        std::multiset<std::string> seen;
        for (const auto* p : parts) {
            for (const auto& r : *p) seen.insert(r.cve_id);
        }
        out.require(seen.size() == records.size(), tag + ": coverage");
        out.require(std::set<std::string>(seen.begin(), seen.end()).size() == seen.size(), tag + ": overlap");
        for (std::size_t c = 0; c < 4; ++c) {
            for (std::size_t s = 0; s < 3; ++s) {
                const auto got = std::count_if(parts[s]->begin(), parts[s]->end(),
                                               [&](const auto& r) { return r.severity == kAllSeverities[c]; });
                const double exact = per_class[c] * spec.ratios()[s];
                out.require(std::abs(static_cast<double>(got) - exact) <= 1.0,
                            tag + ": class " + std::to_string(c) + " split " + std::to_string(s) + " has " +
                                std::to_string(got) + ", exact " + std::to_string(exact));
            }
        }
    }
    if (out.ok) out.detail = "40 / 101 / 1000 records";
    return out;
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(SVA_CLI_PATH) + " " + args + " >>" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome leakage_isolation() {
    Outcome out;
    const auto dir = scratch("leak");
    const auto log = dir / "cli.log";
    const fs::path fixtures(SVA_FIXTURE_DIR);
    const auto test_records = ingest_dataset(fixtures / "test50.jsonl").records;

    // Knowledge records plus one planted target id.
    auto kb = ingest_dataset(fixtures / "kb60.jsonl").records;
    kb.push_back(test_records[23]);
    write_records(dir / "kb_leaky.jsonl", kb);

    const auto store = (dir / "store.jsonl").string();
    out.require(run_cli("build-kb --input " + (dir / "kb_leaky.jsonl").string() + " --out " + store, log) == 0,
                "build-kb failed");
    out.require(run_cli("embed --store " + store, log) == 0, "embed failed");
    const int code = run_cli("assess --store " + store + " --test " + (fixtures / "test50.jsonl").string() +
                                 " --out " + (dir / "run.jsonl").string() + " --mock echo-majority",
                             log);
    out.require(code == 3, "assess exited with " + std::to_string(code) + ", expected 3");

    FallbackEmbedder embedder;
    auto entries = load_store(store);
    auto llm = MockLlm::echo_majority();
    try {
        assess(test_records, entries, embedder, llm, PromptTemplate::default_template(), AssessOptions{});
        out.require(false, "library assess accepted a leaked store");
    } catch (const Error& e) {
        out.require(e.kind() == ErrorKind::IsolationViolation, "library assess raised " + std::string(e.what()));
    }
    if (out.ok) out.detail = "CLI exit 3, IsolationViolation";
    fs::remove_all(dir);
    return out;
}

struct FixtureCorpus {
    std::vector<KnowledgeEntry> store;
    std::vector<VulnerabilityRecord> targets;
};

FixtureCorpus fixture_corpus(EmbeddingProvider& provider) {
    const fs::path fixtures(SVA_FIXTURE_DIR);
    FixtureCorpus c;
    for (const auto& r : ingest_dataset(fixtures / "kb60.jsonl").records) c.store.push_back(normalize_entry(r));
    embed_entries(c.store, provider);
    c.targets = ingest_dataset(fixtures / "test50.jsonl").records;
    return c;
}

bool same_metrics(const EvaluationReport& a, const EvaluationReport& b) {
    return a.accuracy == b.accuracy && a.macro_f1 == b.macro_f1 && a.macro_mcc == b.macro_mcc &&
           a.matrix == b.matrix && a.total == b.total;
}

Outcome end_to_end_offline() {
    Outcome out;
    const auto dir = scratch("e2e");
    FallbackEmbedder embedder;
    const auto c = fixture_corpus(embedder);
    const auto tmpl = PromptTemplate::default_template();
    auto echo = MockLlm::echo_majority();

    RunConfigSnapshot snapshot{0.6, 5, embedder.config().provider_id, echo.id(), tmpl.version(), tmpl.sha256(), 42,
                               utc_timestamp()};
    {
        ManifestWriter writer(dir / "echo.jsonl", snapshot, false);
        assess(c.targets, c.store, embedder, echo, tmpl, AssessOptions{}, &writer);
    }
    const auto manifest = load_manifest(dir / "echo.jsonl");
    out.require(manifest.samples.size() == 50, "manifest has " + std::to_string(manifest.samples.size()) + " entries");
    std::vector<PredictionPair> pairs;
    std::set<std::string> ids;
    for (const auto& s : manifest.samples) {
        out.require(s.parsed_label.has_value(), s.cve_id + ": no valid parsed label");
        pairs.push_back(PredictionPair{s.truth, s.parsed_label});
        ids.insert(s.cve_id);
    }
    out.require(ids.size() == 50, "duplicate samples in manifest");
    const auto rep = report(manifest);
    out.require(same_metrics(rep.metrics, evaluate_run(pairs)), "report differs from evaluate_run on the manifest");
    const double echo_accuracy = rep.metrics.accuracy;

    // Scripted replay of the true label for every prompt of the run.
    {
        std::ofstream transcript(dir / "transcript.jsonl");
        for (const auto& s : manifest.samples) {
            transcript << nlohmann::json{{"prompt_sha256", s.prompt_sha256},
                                         {"reply", "Replayed.\nSEVERITY: " + std::string(to_string(s.truth))}}
                              .dump()
                       << "\n";
        }
    }
    auto scripted = MockLlm::script(dir / "transcript.jsonl");
    const auto replay = assess(c.targets, c.store, embedder, scripted, tmpl, AssessOptions{});
    const auto replay_report = report(replay);
    out.require(replay.samples.size() == 50, "scripted run incomplete");
    out.require(replay_report.metrics.accuracy == 1.0,
                "scripted accuracy " + std::to_string(replay_report.metrics.accuracy));

    // The same through the command-line tool.
    const fs::path fixtures(SVA_FIXTURE_DIR);
    const auto log = dir / "cli.log";
    const auto store = (dir / "store.jsonl").string();
    out.require(run_cli("build-kb --input " + (fixtures / "kb60.jsonl").string() + " --out " + store, log) == 0 &&
                    run_cli("embed --store " + store, log) == 0,
                "CLI store build failed");
    out.require(run_cli("assess --store " + store + " --test " + (fixtures / "test50.jsonl").string() + " --out " +
                            (dir / "cli_run.jsonl").string() + " --mock script --transcript " +
                            (dir / "transcript.jsonl").string() + " --report " + (dir / "cli_report.json").string(),
                        log) == 0,
                "CLI scripted assess failed");
    if (fs::exists(dir / "cli_report.json")) {
        std::ifstream in(dir / "cli_report.json");
        const auto j = nlohmann::json::parse(in);
        out.require(j.at("metrics").at("accuracy").get<double>() == 1.0, "CLI scripted accuracy is not 1.0");
    } else {
        out.require(false, "CLI wrote no report");
    }

    if (out.ok) {
        std::ostringstream d;
        d << "50 samples; echo-majority accuracy " << echo_accuracy << ", scripted accuracy 1";
        out.detail = d.str();
    }
    fs::remove_all(dir);
    return out;
}

std::size_t occurrences(const std::string& hay, std::string_view needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + needle.size())) ++n;
    return n;
}

Outcome prompt_conformance() {
    Outcome out;
    FallbackEmbedder embedder;
    const auto c = fixture_corpus(embedder);
    const auto queries = embed_targets(c.targets, embedder);
    for (std::size_t t = 0; t < c.targets.size(); ++t) {
        RetrievalConfig config;
        config.k = 5;
        std::vector<Demonstration> demos;
        for (const auto& s : retrieve_top_k(queries[t], c.store, config)) demos.push_back(Demonstration::from_entry(*s.entry));
        const auto& target = c.targets[t];
        const auto p = assemble_prompt(demos, PromptTarget{target.code, target.description},
                                       PromptTemplate::default_template());
        const auto& u = p.user_text;
        const std::string tag = target.cve_id + ": ";
        out.require(p.demo_count == 5, tag + "demo_count");
        for (int i = 1; i <= 5; ++i) {
            out.require(occurrences(u, "Demonstration " + std::to_string(i) + ":") == 1, tag + "demo block " + std::to_string(i));
        }
        out.require(occurrences(u, "Demonstration 6:") == 0, tag + "extra demo block");
        out.require(occurrences(u, "Ground-truth severity: ") == 5, tag + "demo label count");
        for (auto h : {kStepDemonstrations, kStepTarget, kStepPrediction}) {
            out.require(occurrences(u, h) == 1, tag + "header '" + std::string(h) + "' not exactly once");
        }
        out.require(u.find(kStepDemonstrations) < u.find(kStepTarget) && u.find(kStepTarget) < u.find(kStepPrediction),
                    tag + "headers out of order");
        out.require(u.find(target.description) != std::string::npos, tag + "description not verbatim");
        if (!target.description_only()) out.require(u.find(target.code) != std::string::npos, tag + "code not verbatim");
    }
    if (out.ok) out.detail = "50 five-shot prompts";
    return out;
}

Outcome cosine_properties() {
    Outcome out;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> a(48), b(48);
        for (auto& x : a) x = n(rng);
        for (auto& x : b) x = n(rng);
        const double ab = cosine_similarity(a, b);
        out.require(ab == cosine_similarity(b, a), "asymmetric");
        auto sa = a;
        const double f = scale(rng);
        for (auto& x : sa) x *= f;
        out.require(std::abs(cosine_similarity(sa, b) - ab) <= 1e-12, "not scale invariant");
    }
    const double v = cosine_similarity(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6});
    out.require(std::abs(v - 0.9746318) <= 1e-7, "(1,2,3).(4,5,6) = " + std::to_string(v));
    if (out.ok) out.detail = "1000 random pairs";
    return out;
}

std::vector<std::string> table_rows(const std::string& md) {
    std::vector<std::string> rows;
    std::istringstream in(md);
    std::string line;
    while (std::getline(in, line)) rows.push_back(line);
    return rows;
}

std::vector<std::string> cells(const std::string& row) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 1; i < row.size(); ++i) {
        if (row[i] == '|') {
            out.push_back(cur.substr(1, cur.size() - 2));
            cur.clear();
        } else {
            cur += row[i];
        }
    }
    return out;
}

Outcome sweep_tables() {
    Outcome out;
    FallbackEmbedder embedder;
    const auto c = fixture_corpus(embedder);
    SweepOptions options;
    for (int i = 0; i <= 10; ++i) options.phis.push_back(i / 10.0);
    options.ks = {0, 3, 5, 7};

    auto llm = MockLlm::echo_majority();
    const auto first = sweep(c.targets, c.store, embedder, llm, PromptTemplate::default_template(), options);
    auto llm2 = MockLlm::echo_majority();
    const auto second = sweep(c.targets, c.store, embedder, llm2, PromptTemplate::default_template(), options);

    const auto phi_md = phi_table_markdown(first);
    const auto k_md = k_table_markdown(first);
    out.require(phi_md == phi_table_markdown(second) && k_md == k_table_markdown(second) &&
                    phi_table_csv(first) == phi_table_csv(second) && k_table_csv(first) == k_table_csv(second),
                "sweep is not deterministic");

    const auto phi_rows = table_rows(phi_md);
    out.require(phi_rows.size() == 13, "weighting table has " + std::to_string(phi_rows.size()) + " lines");
    out.require(cells(phi_rows.at(0)) ==
                    std::vector<std::string>{"CosSim_code", "CosSim_desc", "Accuracy (%)", "F1-score (%)", "MCC (%)"},
                "weighting table header");
    for (int i = 0; i <= 10; ++i) {
        const auto row = cells(phi_rows.at(2 + i));
        out.require(row.size() == 5, "weighting row width");
        out.require(row[0] == std::to_string((10 - i) * 10) + "%" && row[1] == std::to_string(i * 10) + "%",
                    "weighting row " + std::to_string(i) + " labels '" + row[0] + "', '" + row[1] + "'");
        for (int col = 2; col < 5; ++col) {
            const double v = std::stod(row[col]);
            out.require(std::isfinite(v) && v >= -100.0 && v <= 100.0, "weighting value out of range");
        }
    }

    const auto k_rows = table_rows(k_md);
    out.require(k_rows.size() == 6, "depth table has " + std::to_string(k_rows.size()) + " lines");
    out.require(cells(k_rows.at(0)) == std::vector<std::string>{"Setting", "Accuracy (%)", "F1-score (%)", "MCC (%)"},
                "depth table header");
    const std::vector<std::string> labels{"without RAG(zero-shot)", "3-shot", "5-shot", "7-shot"};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto row = cells(k_rows.at(2 + i));
        out.require(row.size() == 4 && row[0] == labels[i], "depth row " + std::to_string(i));
    }

    // Rows agree with direct runs at the same settings.
    AssessOptions direct;
    direct.retrieval.phi = 0.6;
    direct.retrieval.k = 5;
    auto llm3 = MockLlm::echo_majority();
    const auto run = assess(c.targets, c.store, embedder, llm3, PromptTemplate::default_template(), direct);
    const auto expected = report(run).metrics;
    out.require(same_metrics(first.phi_rows.at(4).metrics, expected), "phi=0.6 row differs from a direct run");
    out.require(same_metrics(first.k_rows.at(2).metrics, expected), "5-shot row differs from a direct run");

    if (out.ok) out.detail = "11 weighting rows, 4 depth rows, identical on rerun";
    return out;
}

}  // namespace

int main() {
    criterion("metric oracle (500 random matrices, 1e-9)", metric_oracle);
    criterion("retrieval oracle (200 entries, k x phi grid)", retrieval_oracle);
    criterion("fusion invariants (phi=1 code-only, phi=0 description-only)", fusion_invariants);
    criterion("CVSS band mapping", cvss_bands);
    criterion("stratified split (40/101/1000, imbalanced)", stratified_split_criterion);
    criterion("leakage isolation (exit code 3)", leakage_isolation);
    criterion("end-to-end offline (50-record fixture, mock LLM)", end_to_end_offline);
    criterion("prompt conformance (5-shot structure)", prompt_conformance);
    criterion("cosine properties", cosine_properties);
    criterion("sweep tables (weighting and depth)", sweep_tables);
    std::cout << (g_failures == 0 ? "ALL PASS" : std::to_string(g_failures) + " FAILED") << std::endl;
    return g_failures == 0 ? 0 : 1;
}
