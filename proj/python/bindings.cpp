#include "sva/dataset.hpp"
#include "sva/embedding.hpp"
#include "sva/error.hpp"
#include "sva/evaluation.hpp"
#include "sva/knowledge_base.hpp"
#include "sva/llm_client.hpp"
#include "sva/pipeline.hpp"
#include "sva/prompting.hpp"
#include "sva/retrieval.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace sva;

namespace {

py::object to_python(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::optional<Severity> optional_label(const py::object& label) {
    if (label.is_none()) return std::nullopt;
    return parse_label(label.cast<std::string>());
}

std::unique_ptr<LlmBackend> make_mock(const std::string& mock, const std::optional<std::string>& transcript) {
    if (mock == "echo-majority") return std::make_unique<MockLlm>(MockLlm::echo_majority());
    if (mock.rfind("fixed:", 0) == 0) return std::make_unique<MockLlm>(MockLlm::fixed(parse_label(mock.substr(6))));
    if (mock == "script" && transcript) return std::make_unique<MockLlm>(MockLlm::script(std::filesystem::path(*transcript)));
    throw Error(ErrorKind::ConfigError, "unknown mock policy '" + mock + "'");
}

}  // namespace

PYBIND11_MODULE(_sva, m) {
    m.doc() = "Retrieval-augmented CVSS v3 severity assessment (C++ core).";

    py::register_exception<Error>(m, "SvaError", PyExc_RuntimeError);

    m.def("severity_from_score", [](double s) { return std::string(to_string(severity_from_score(s))); },
          py::arg("base_score"));
    m.def("parse_severity", [](const std::string& reply) { return std::string(to_string(parse_severity(reply))); },
          py::arg("reply"));
    m.def("combined_similarity", &combined_similarity, py::arg("code_sim"), py::arg("desc_sim"), py::arg("phi"));
    m.def("cosine_similarity",
          [](const std::vector<double>& a, const std::vector<double>& b) { return cosine_similarity(a, b); },
          py::arg("a"), py::arg("b"));
    m.def("fallback_embed",
          [](const std::string& text, std::size_t dimension, std::uint64_t seed) {
              return fallback_embed(text, dimension, seed).values;
          },
          py::arg("text"), py::arg("dimension") = FallbackEmbedder::kDefaultDimension,
          py::arg("seed") = FallbackEmbedder::kDefaultSeed);
    m.def("estimate_tokens", [](const std::string& text) { return estimate_tokens(text); }, py::arg("text"));

    m.def("ingest_dataset",
          [](const std::filesystem::path& path) {
              const auto result = ingest_dataset(path);
              nlohmann::json records = nlohmann::json::array();
              for (const auto& r : result.records) records.push_back(to_json(r));
              nlohmann::json errors = nlohmann::json::array();
              for (const auto& e : result.errors) errors.push_back({{"line_no", e.line_no}, {"reason", e.reason}});
              return py::make_tuple(to_python(records), to_python(errors));
          },
          py::arg("path"), "Returns (records, malformed_lines).");

    m.def("stratified_split",
          [](const py::list& records, std::uint64_t seed) {
              std::vector<VulnerabilityRecord> rs;
              for (const auto& r : records) rs.push_back(record_from_json(from_python(py::reinterpret_borrow<py::object>(r))));
              SplitSpec spec;
              spec.seed = seed;
              const auto s = stratified_split(rs, spec);
              py::dict out;
              for (const auto& [name, part] :
                   {std::pair{"knowledge", &s.knowledge}, {"validation", &s.validation}, {"test", &s.test}}) {
                  nlohmann::json arr = nlohmann::json::array();
                  for (const auto& r : *part) arr.push_back(to_json(r));
                  out[name] = to_python(arr);
              }
              return out;
          },
          py::arg("records"), py::arg("seed") = 42);

    m.def("evaluate",
          [](const std::vector<std::pair<std::string, py::object>>& pairs) {
              std::vector<PredictionPair> ps;
              for (const auto& [truth, predicted] : pairs) ps.push_back({parse_label(truth), optional_label(predicted)});
              return to_python(to_json(evaluate_run(ps)));
          },
          py::arg("pairs"), "pairs of (true_label, predicted_label or None).");

    m.def("build_store",
          [](const std::filesystem::path& input, const std::filesystem::path& out, std::size_t dimension) {
              std::vector<KnowledgeEntry> entries;
              for (const auto& r : ingest_dataset(input).records) entries.push_back(normalize_entry(r));
              FallbackEmbedder embedder(dimension, dimension);
              embed_entries(entries, embedder);
              save_store(out, entries);
              return entries.size();
          },
          py::arg("input"), py::arg("out"), py::arg("dimension") = FallbackEmbedder::kDefaultDimension,
          "Ingest, normalize and embed (fallback embedder) into a JSONL store.");

    m.def("assess",
          [](const std::filesystem::path& store_path, const std::filesystem::path& test_path, double phi,
             std::size_t k, const std::string& mock, const std::optional<std::string>& transcript,
             std::size_t dimension) {
              const auto store = load_store(store_path);
              const auto targets = ingest_dataset(test_path).records;
              FallbackEmbedder embedder(dimension, dimension);
              auto llm = make_mock(mock, transcript);
              AssessOptions options;
              options.retrieval.phi = phi;
              options.retrieval.k = k;
              const auto run = assess(targets, store, embedder, *llm, PromptTemplate::default_template(), options);
              nlohmann::json samples = nlohmann::json::array();
              for (const auto& s : run.samples) samples.push_back(to_json(s));
              return py::make_tuple(to_python(samples), to_python(to_json(report(run))));
          },
          py::arg("store"), py::arg("test"), py::arg("phi") = RetrievalConfig::kDefaultPhi,
          py::arg("k") = RetrievalConfig::kDefaultK, py::arg("mock") = "echo-majority",
          py::arg("transcript") = py::none(), py::arg("dimension") = FallbackEmbedder::kDefaultDimension,
          "Offline run with the fallback embedder and a mock LLM. Returns (samples, report).");

    m.def("sweep",
          [](const std::filesystem::path& store_path, const std::filesystem::path& test_path,
             const std::vector<double>& phis, const std::vector<std::size_t>& ks, const std::string& mock) {
              const auto store = load_store(store_path);
              const auto targets = ingest_dataset(test_path).records;
              FallbackEmbedder embedder;
              auto llm = make_mock(mock, std::nullopt);
              SweepOptions options;
              options.phis = phis;
              options.ks = ks;
              const auto r = sweep(targets, store, embedder, *llm, PromptTemplate::default_template(), options);
              py::dict out;
              out["phi_markdown"] = phi_table_markdown(r);
              out["phi_csv"] = phi_table_csv(r);
              out["k_markdown"] = k_table_markdown(r);
              out["k_csv"] = k_table_csv(r);
              return out;
          },
          py::arg("store"), py::arg("test"), py::arg("phis"), py::arg("ks"), py::arg("mock") = "echo-majority");
}
