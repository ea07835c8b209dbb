#pragma once

#include "sva/embedding.hpp"
#include "sva/severity.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sva {

bool is_valid_cve_id(std::string_view id);
bool is_valid_cwe_id(std::string_view id);

struct VulnerabilityRecord {
    std::string cve_id;
    std::string code;  // empty => description-only record
    std::string description;
    Severity severity = Severity::Low;

    bool description_only() const noexcept;
    bool operator==(const VulnerabilityRecord&) const = default;
};

/// Throws InvalidArgument when the id or description violate the record invariants.
void validate(const VulnerabilityRecord& record);

/// NVD_INFO: CVSS v3.x metrics plus affected configurations.
struct NvdInfo {
    std::string cvss_version;
    std::string vector_string;  // "CVSS:3.x/..." or empty
    double base_score = 0.0;
    double impact_score = 0.0;
    double exploitability_score = 0.0;
    std::vector<std::string> affected_cpes;

    bool operator==(const NvdInfo&) const = default;
};

/// CWE_INFO: weakness definition used to explain a vulnerability class.
struct CweInfo {
    std::string cwe_id;
    std::string name;
    std::string description;
    std::string extended_description;
    std::vector<std::string> common_consequences;

    bool operator==(const CweInfo&) const = default;
};

struct KnowledgeEntry {
    VulnerabilityRecord record;
    std::optional<NvdInfo> nvd;
    std::optional<CweInfo> cwe;
    std::optional<EmbeddingVector> code_embedding;
    std::optional<EmbeddingVector> desc_embedding;
    std::string provider_id;  // set whenever an embedding is present

    bool embedded() const noexcept { return desc_embedding.has_value() && !provider_id.empty(); }
    bool operator==(const KnowledgeEntry&) const = default;
};

// --- JSON mapping ---
// Records:  {"cve_id","code","description","severity"}
// Entries:  {"record","nvd","cwe","code_embedding","desc_embedding","provider_id"},
//           absent sections written as explicit nulls.

nlohmann::json to_json(const VulnerabilityRecord& record);
nlohmann::json to_json(const NvdInfo& info);
nlohmann::json to_json(const CweInfo& info);
nlohmann::json to_json(const KnowledgeEntry& entry);

/// Throw ParseError on missing/mistyped fields and InvalidArgument on
/// invariant violations.
VulnerabilityRecord record_from_json(const nlohmann::json& j);
NvdInfo nvd_from_json(const nlohmann::json& j);
CweInfo cwe_from_json(const nlohmann::json& j);
KnowledgeEntry entry_from_json(const nlohmann::json& j);

// --- Dataset ingestion ---

struct MalformedLine {
    std::size_t line_no = 0;  // 1-based
    std::string reason;
};

struct IngestResult {
    std::vector<VulnerabilityRecord> records;
    std::vector<MalformedLine> errors;
};

/// Reads a JSONL dataset. Malformed lines are collected, never dropped
/// silently. Throws FileNotFound, or EmptyDataset when no line parses.
IngestResult ingest_dataset(const std::filesystem::path& path);

void write_records(const std::filesystem::path& path, std::span<const VulnerabilityRecord> records);

// --- Normalization & store ---

KnowledgeEntry normalize_entry(const VulnerabilityRecord& record,
                               std::optional<NvdInfo> nvd = std::nullopt,
                               std::optional<CweInfo> cwe = std::nullopt);

enum class StoreLayout {
    Jsonl,      // one entry per line in a single file
    Directory,  // one pretty-printed <cve_id>.json per entry
};

void save_store(const std::filesystem::path& path, std::span<const KnowledgeEntry> entries,
                StoreLayout layout = StoreLayout::Jsonl);

/// Loads either layout (detected from the path). Directory entries come back
/// sorted by cve_id.
std::vector<KnowledgeEntry> load_store(const std::filesystem::path& path);

/// Attaches embeddings for every entry (code skipped for description-only
/// records) and stamps the provider id. Already-embedded entries with the same
/// provider id are left untouched.
std::size_t embed_entries(std::vector<KnowledgeEntry>& entries, EmbeddingProvider& provider);

}  // namespace sva
