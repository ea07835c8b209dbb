#include "sva/prompting.hpp"

#include "default_template.hpp"
#include "sva/error.hpp"
#include "sva/hashing.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

namespace sva {

namespace {

constexpr std::size_t kMaxCpesShown = 5;
constexpr std::string_view kNoDemonstrations = "(No demonstrations were retrieved for this target.)";
constexpr std::string_view kNoCode = "(source code not available)";

bool is_blank(std::string_view text) {
    return std::all_of(text.begin(), text.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    std::size_t count = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

std::string format_score(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(1) << v;
    return out.str();
}

std::string fenced(std::string_view code) {
    std::string out = "```\n";
    out += is_blank(code) ? kNoCode : code;
    if (out.back() != '\n') out += '\n';
    out += "```\n";
    return out;
}

}  // namespace

// --- Demonstrations ---

std::string summarize_nvd(const NvdInfo& info) {
    std::ostringstream out;
    if (info.cvss_version.empty()) {
        out << "no CVSS v3 metrics published";
    } else {
        out << "CVSS " << info.cvss_version << " " << info.vector_string << "; base score "
            << format_score(info.base_score) << ", impact " << format_score(info.impact_score)
            << ", exploitability " << format_score(info.exploitability_score);
    }
    if (!info.affected_cpes.empty()) {
        out << "; affected: ";
        const std::size_t shown = std::min(kMaxCpesShown, info.affected_cpes.size());
        for (std::size_t i = 0; i < shown; ++i) out << (i ? ", " : "") << info.affected_cpes[i];
        if (info.affected_cpes.size() > shown) {
            out << " (+" << info.affected_cpes.size() - shown << " more)";
        }
    }
    return out.str();
}

std::string summarize_cwe(const CweInfo& info) {
    std::string out = info.cwe_id + " " + info.name + ".";
    if (!info.description.empty()) out += " " + info.description;
    if (!info.extended_description.empty()) out += " " + info.extended_description;
    if (!info.common_consequences.empty()) {
        out += " Consequences: ";
        for (std::size_t i = 0; i < info.common_consequences.size(); ++i) {
            out += (i ? "; " : "") + info.common_consequences[i];
        }
        out += ".";
    }
    return out;
}

Demonstration Demonstration::from_entry(const KnowledgeEntry& entry) {
    Demonstration d;
    d.cve_id = entry.record.cve_id;
    d.code = entry.record.code;
    d.description = entry.record.description;
    d.severity = entry.record.severity;
    if (entry.nvd) d.nvd_summary = summarize_nvd(*entry.nvd);
    if (entry.cwe) d.cwe_summary = summarize_cwe(*entry.cwe);
    return d;
}

std::string Demonstration::render(std::size_t index) const {
    std::string out = "Demonstration " + std::to_string(index) + ":\n";
    out += "CVE-ID: " + cve_id + "\n";
    out += "Description: " + description + "\n";
    out += "Code:\n" + fenced(code);
    if (!nvd_summary.empty()) out += "NVD metrics: " + nvd_summary + "\n";
    if (!cwe_summary.empty()) out += "CWE knowledge: " + cwe_summary + "\n";
    out += std::string(kDemoLabelPrefix) + std::string(to_string(severity)) + "\n";
    return out;
}

// --- Template ---

PromptTemplate::PromptTemplate(std::string text, std::string version)
    : text_(std::move(text)), version_(std::move(version)) {
    for (auto placeholder : {kPlaceholderDemos, kPlaceholderCode, kPlaceholderDescription}) {
        if (text_.find(placeholder) == std::string::npos) {
            throw Error(ErrorKind::TemplateInvalid,
                        "missing placeholder " + std::string(placeholder));
        }
    }
    std::size_t previous = 0;
    for (auto header : {kStepDemonstrations, kStepTarget, kStepPrediction}) {
        if (count_occurrences(text_, header) != 1) {
            throw Error(ErrorKind::TemplateInvalid,
                        "step header '" + std::string(header) + "' must appear exactly once");
        }
        const auto at = text_.find(header);
        if (at < previous) {
            throw Error(ErrorKind::TemplateInvalid, "step headers out of order");
        }
        previous = at;
    }
}

PromptTemplate PromptTemplate::default_template() {
    return PromptTemplate(std::string(detail::kDefaultTemplateText), std::string(kDefaultVersion));
}

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::FileNotFound, path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return PromptTemplate(buffer.str(), path.filename().string());
}

std::string PromptTemplate::sha256() const { return sha256_hex(text_); }

std::string_view default_system_text() noexcept {
    return "You are a software security expert who rates vulnerabilities with the CVSS v3 "
           "qualitative scale. Follow the user's steps and end with the requested SEVERITY line.";
}

std::size_t estimate_tokens(std::string_view text) noexcept {
    std::size_t code_points = 0;
    for (unsigned char c : text) {
        if ((c & 0xC0U) != 0x80U) ++code_points;
    }
    return (code_points + 3) / 4;
}

AssembledPrompt assemble_prompt(std::span<const Demonstration> demos, const PromptTarget& target,
                                const PromptTemplate& tmpl, const TokenEstimator& estimator) {
    if (is_blank(target.description)) {
        throw Error(ErrorKind::EmptyTarget, "target description is empty");
    }
    std::string demo_text;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        if (i) demo_text += "\n";
        demo_text += demos[i].render(i + 1);
    }
    if (demos.empty()) demo_text = kNoDemonstrations;
    const std::string code_text = is_blank(target.code) ? std::string(kNoCode) : target.code;

    // Single pass so placeholder-like text inside substituted content stays literal.
    const std::string& text = tmpl.text();
    std::string user;
    user.reserve(text.size() + demo_text.size() + code_text.size() + target.description.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto open = text.find("{{", pos);
        if (open == std::string::npos) {
            user.append(text, pos, std::string::npos);
            break;
        }
        user.append(text, pos, open - pos);
        const std::string_view rest(text.data() + open, text.size() - open);
        if (rest.starts_with(kPlaceholderDemos)) {
            user += demo_text;
            pos = open + kPlaceholderDemos.size();
        } else if (rest.starts_with(kPlaceholderCode)) {
            user += code_text;
            pos = open + kPlaceholderCode.size();
        } else if (rest.starts_with(kPlaceholderDescription)) {
            user += target.description;
            pos = open + kPlaceholderDescription.size();
        } else {
            user += "{{";
            pos = open + 2;
        }
    }

    AssembledPrompt prompt;
    prompt.system_text = default_system_text();
    prompt.user_text = std::move(user);
    prompt.demo_count = demos.size();
    prompt.token_estimate = estimator(prompt.system_text) + estimator(prompt.user_text);
    prompt.context_token_estimate = demos.empty() ? 0 : estimator(demo_text);
    return prompt;
}

// --- Reply parsing ---

std::optional<Severity> try_parse_severity(std::string_view reply) {
    static const std::regex final_line(R"(SEVERITY:\s*(LOW|MEDIUM|HIGH|CRITICAL)\b)",
                                       std::regex::icase);
    static const std::regex label_word(R"(\b(LOW|MEDIUM|HIGH|CRITICAL)\b)", std::regex::icase);

    const std::string text(reply);
    std::optional<Severity> found;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        std::smatch m;
        if (std::regex_search(line, m, final_line)) found = severity_from_label(m[1].str());
    }
    if (found) return found;

    for (auto it = std::sregex_iterator(text.begin(), text.end(), label_word);
         it != std::sregex_iterator(); ++it) {
        found = severity_from_label((*it)[1].str());
    }
    return found;
}

Severity parse_severity(std::string_view reply) {
    if (auto s = try_parse_severity(reply)) return *s;
    std::string excerpt(reply.substr(0, 120));
    throw Error(ErrorKind::Unparseable, "no severity label in reply '" + excerpt + "'");
}

}  // namespace sva
