#pragma once

#include "sva/knowledge_base.hpp"
#include "sva/severity.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace sva {

inline constexpr std::string_view kStepDemonstrations = "Analyze Demonstration Samples";
inline constexpr std::string_view kStepTarget = "Target Vulnerability Analysis";
inline constexpr std::string_view kStepPrediction = "Severity Prediction";

inline constexpr std::string_view kPlaceholderDemos = "{{DEMONSTRATIONS}}";
inline constexpr std::string_view kPlaceholderCode = "{{TARGET_CODE}}";
inline constexpr std::string_view kPlaceholderDescription = "{{TARGET_DESCRIPTION}}";

/// Line prefix carrying each demonstration's label; the echo mock reads it back.
inline constexpr std::string_view kDemoLabelPrefix = "Ground-truth severity: ";
inline constexpr std::string_view kTargetMarker = "Target vulnerability:";

struct Demonstration {
    std::string cve_id;
    std::string code;
    std::string description;
    Severity severity = Severity::Low;
    std::string nvd_summary;  // empty when the entry has no NVD section
    std::string cwe_summary;  // empty when the entry has no CWE section

    static Demonstration from_entry(const KnowledgeEntry& entry);

    /// "Demonstration <index>:" block, 1-based index.
    std::string render(std::size_t index) const;
};

std::string summarize_nvd(const NvdInfo& info);
std::string summarize_cwe(const CweInfo& info);

struct PromptTarget {
    std::string code;
    std::string description;
};

/// Plain-text template with the three placeholders; each step header must
/// appear exactly once and in order.
class PromptTemplate {
public:
    static constexpr std::string_view kDefaultVersion = "cot-v1";

    explicit PromptTemplate(std::string text, std::string version = "custom");

    static PromptTemplate default_template();
    static PromptTemplate from_file(const std::filesystem::path& path);

    const std::string& text() const noexcept { return text_; }
    const std::string& version() const noexcept { return version_; }
    std::string sha256() const;

private:
    std::string text_;
    std::string version_;
};

std::string_view default_system_text() noexcept;

using TokenEstimator = std::function<std::size_t(std::string_view)>;

/// ceil(code points / 4). A reporting heuristic, not a tokenizer.
std::size_t estimate_tokens(std::string_view text) noexcept;

struct AssembledPrompt {
    std::string system_text;
    std::string user_text;
    std::size_t demo_count = 0;
    std::size_t token_estimate = 0;          // system + user
    std::size_t context_token_estimate = 0;  // rendered demonstrations only
};

/// Throws EmptyTarget for a blank target description.
AssembledPrompt assemble_prompt(std::span<const Demonstration> demos, const PromptTarget& target,
                                const PromptTemplate& tmpl,
                                const TokenEstimator& estimator = estimate_tokens);

/// Last line matching `SEVERITY: <LABEL>` (case-insensitive), else the last
/// standalone label word anywhere in the reply.
std::optional<Severity> try_parse_severity(std::string_view reply);

/// As try_parse_severity, throwing Unparseable instead of returning nullopt.
Severity parse_severity(std::string_view reply);

}  // namespace sva
