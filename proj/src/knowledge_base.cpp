#include "sva/knowledge_base.hpp"

#include "sva/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>

namespace sva {

using nlohmann::json;

namespace {

bool is_blank(std::string_view text) {
    return std::all_of(text.begin(), text.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

const std::regex& cve_pattern() {
    static const std::regex re(R"(CVE-\d{4}-\d{4,})");
    return re;
}

const std::regex& cwe_pattern() {
    static const std::regex re(R"(CWE-\d+)");
    return re;
}

json embedding_to_json(const std::optional<EmbeddingVector>& v) {
    return v ? json(v->values) : json(nullptr);
}

std::optional<EmbeddingVector> embedding_from_json(const json& j, Modality modality) {
    if (j.is_null()) return std::nullopt;
    return EmbeddingVector{j.get<std::vector<double>>(), modality};
}

template <typename Fn>
auto parse_guard(const char* what, Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string(what) + ": " + e.what());
    }
}

}  // namespace

bool is_valid_cve_id(std::string_view id) {
    return std::regex_match(id.begin(), id.end(), cve_pattern());
}

bool is_valid_cwe_id(std::string_view id) {
    return std::regex_match(id.begin(), id.end(), cwe_pattern());
}

bool VulnerabilityRecord::description_only() const noexcept { return is_blank(code); }

void validate(const VulnerabilityRecord& record) {
    if (!is_valid_cve_id(record.cve_id)) {
        throw Error(ErrorKind::InvalidArgument, "invalid CVE id '" + record.cve_id + "'");
    }
    if (is_blank(record.description)) {
        throw Error(ErrorKind::InvalidArgument, record.cve_id + ": description is empty");
    }
}

// --- JSON ---

json to_json(const VulnerabilityRecord& record) {
    return json{{"cve_id", record.cve_id},
                {"code", record.code},
                {"description", record.description},
                {"severity", std::string(to_string(record.severity))}};
}

json to_json(const NvdInfo& info) {
    return json{{"cvss_version", info.cvss_version},
                {"vector_string", info.vector_string},
                {"base_score", info.base_score},
                {"impact_score", info.impact_score},
                {"exploitability_score", info.exploitability_score},
                {"affected_cpes", info.affected_cpes}};
}

json to_json(const CweInfo& info) {
    return json{{"cwe_id", info.cwe_id},
                {"name", info.name},
                {"description", info.description},
                {"extended_description", info.extended_description},
                {"common_consequences", info.common_consequences}};
}

json to_json(const KnowledgeEntry& entry) {
    return json{{"record", to_json(entry.record)},
                {"nvd", entry.nvd ? to_json(*entry.nvd) : json(nullptr)},
                {"cwe", entry.cwe ? to_json(*entry.cwe) : json(nullptr)},
                {"code_embedding", embedding_to_json(entry.code_embedding)},
                {"desc_embedding", embedding_to_json(entry.desc_embedding)},
                {"provider_id", entry.provider_id.empty() ? json(nullptr) : json(entry.provider_id)}};
}

VulnerabilityRecord record_from_json(const json& j) {
    VulnerabilityRecord record = parse_guard("record", [&] {
        VulnerabilityRecord r;
        r.cve_id = j.at("cve_id").get<std::string>();
        const auto& code = j.at("code");
        r.code = code.is_null() ? std::string{} : code.get<std::string>();
        r.description = j.at("description").get<std::string>();
        r.severity = parse_label(j.at("severity").get<std::string>());
        return r;
    });
    validate(record);
    return record;
}

NvdInfo nvd_from_json(const json& j) {
    NvdInfo info = parse_guard("nvd", [&] {
        NvdInfo n;
        n.cvss_version = j.at("cvss_version").get<std::string>();
        n.vector_string = j.at("vector_string").get<std::string>();
        n.base_score = j.at("base_score").get<double>();
        n.impact_score = j.at("impact_score").get<double>();
        n.exploitability_score = j.at("exploitability_score").get<double>();
        n.affected_cpes = j.at("affected_cpes").get<std::vector<std::string>>();
        return n;
    });
    if (info.base_score < 0.0 || info.base_score > 10.0) {
        throw Error(ErrorKind::InvalidArgument, "nvd base_score outside [0, 10]");
    }
    if (!info.vector_string.empty() && info.vector_string.rfind("CVSS:3", 0) != 0) {
        throw Error(ErrorKind::InvalidArgument, "vector string is not CVSS v3: " + info.vector_string);
    }
    return info;
}

CweInfo cwe_from_json(const json& j) {
    CweInfo info = parse_guard("cwe", [&] {
        CweInfo c;
        c.cwe_id = j.at("cwe_id").get<std::string>();
        c.name = j.at("name").get<std::string>();
        c.description = j.at("description").get<std::string>();
        c.extended_description = j.at("extended_description").get<std::string>();
        c.common_consequences = j.at("common_consequences").get<std::vector<std::string>>();
        return c;
    });
    if (!is_valid_cwe_id(info.cwe_id)) {
        throw Error(ErrorKind::InvalidArgument, "invalid CWE id '" + info.cwe_id + "'");
    }
    return info;
}

KnowledgeEntry entry_from_json(const json& j) {
    return parse_guard("entry", [&] {
        KnowledgeEntry e;
        e.record = record_from_json(j.at("record"));
        const auto& nvd = j.at("nvd");
        if (!nvd.is_null()) e.nvd = nvd_from_json(nvd);
        const auto& cwe = j.at("cwe");
        if (!cwe.is_null()) e.cwe = cwe_from_json(cwe);
        e.code_embedding = embedding_from_json(j.at("code_embedding"), Modality::Code);
        e.desc_embedding = embedding_from_json(j.at("desc_embedding"), Modality::Description);
        const auto& provider = j.at("provider_id");
        e.provider_id = provider.is_null() ? std::string{} : provider.get<std::string>();
        if ((e.code_embedding || e.desc_embedding) && e.provider_id.empty()) {
            throw Error(ErrorKind::InvalidArgument,
                        e.record.cve_id + ": embeddings present without a provider_id");
        }
        return e;
    });
}

// --- Ingestion ---

IngestResult ingest_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!std::filesystem::is_regular_file(path) || !in) {
        throw Error(ErrorKind::FileNotFound, path.string());
    }
    IngestResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        try {
            result.records.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            result.errors.push_back({line_no, e.what()});
        } catch (const Error& e) {
            result.errors.push_back({line_no, e.what()});
        }
    }
    if (result.records.empty()) {
        throw Error(ErrorKind::EmptyDataset,
                    path.string() + ": no valid records (" + std::to_string(result.errors.size()) +
                        " malformed lines)");
    }
    return result;
}

void write_records(const std::filesystem::path& path, std::span<const VulnerabilityRecord> records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::FileNotFound, "cannot write " + path.string());
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

// --- Normalization & store ---

KnowledgeEntry normalize_entry(const VulnerabilityRecord& record, std::optional<NvdInfo> nvd,
                               std::optional<CweInfo> cwe) {
    validate(record);
    KnowledgeEntry entry;
    entry.record = record;
    entry.nvd = std::move(nvd);
    entry.cwe = std::move(cwe);
    return entry;
}

void save_store(const std::filesystem::path& path, std::span<const KnowledgeEntry> entries,
                StoreLayout layout) {
    if (layout == StoreLayout::Jsonl) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        const auto tmp = std::filesystem::path(path.string() + ".tmp");
        {
            std::ofstream out(tmp, std::ios::trunc);
            if (!out) throw Error(ErrorKind::FileNotFound, "cannot write " + tmp.string());
            for (const auto& e : entries) out << to_json(e).dump() << '\n';
        }
        std::filesystem::rename(tmp, path);
        return;
    }
    std::filesystem::create_directories(path);
    for (const auto& e : entries) {
        std::ofstream out(path / (e.record.cve_id + ".json"), std::ios::trunc);
        out << to_json(e).dump(2) << '\n';
    }
}

std::vector<KnowledgeEntry> load_store(const std::filesystem::path& path) {
    std::vector<KnowledgeEntry> entries;
    if (std::filesystem::is_directory(path)) {
        for (const auto& file : std::filesystem::directory_iterator(path)) {
            if (file.path().extension() != ".json") continue;
            std::ifstream in(file.path());
            json j;
            try {
                in >> j;
            } catch (const json::exception& e) {
                throw Error(ErrorKind::ParseError, file.path().string() + ": " + e.what());
            }
            entries.push_back(entry_from_json(j));
        }
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            return a.record.cve_id < b.record.cve_id;
        });
        return entries;
    }
    std::ifstream in(path);
    if (!std::filesystem::is_regular_file(path) || !in) {
        throw Error(ErrorKind::FileNotFound, path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        try {
            entries.push_back(entry_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return entries;
}

std::size_t embed_entries(std::vector<KnowledgeEntry>& entries, EmbeddingProvider& provider) {
    const std::string& provider_id = provider.config().provider_id;
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const bool code_ok = e.record.description_only() || e.code_embedding.has_value();
        if (!(e.provider_id == provider_id && e.desc_embedding && code_ok)) pending.push_back(i);
    }
    if (pending.empty()) return 0;

    std::vector<std::string> descriptions;
    std::vector<std::string> codes;
    std::vector<std::size_t> code_owner;
    for (std::size_t i : pending) {
        descriptions.push_back(entries[i].record.description);
        if (!entries[i].record.description_only()) {
            codes.push_back(entries[i].record.code);
            code_owner.push_back(i);
        }
    }
    auto desc_vectors = embed_texts(descriptions, Modality::Description, provider);
    auto code_vectors = embed_texts(codes, Modality::Code, provider);

    for (std::size_t n = 0; n < pending.size(); ++n) {
        auto& e = entries[pending[n]];
        e.desc_embedding = std::move(desc_vectors[n]);
        e.code_embedding.reset();
        e.provider_id = provider_id;
    }
    for (std::size_t n = 0; n < code_owner.size(); ++n) {
        entries[code_owner[n]].code_embedding = std::move(code_vectors[n]);
    }
    return pending.size();
}

}  // namespace sva
