#include "sva/severity.hpp"

#include "sva/error.hpp"

#include <cctype>
#include <cmath>
#include <string>

namespace sva {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::NetworkError: return "NetworkError";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::RateLimited: return "RateLimited";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownCwe: return "UnknownCwe";
    case ErrorKind::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::EmptyStore: return "EmptyStore";
    case ErrorKind::EmptyTarget: return "EmptyTarget";
    case ErrorKind::TemplateInvalid: return "TemplateInvalid";
    case ErrorKind::Unparseable: return "Unparseable";
    case ErrorKind::AuthFailed: return "AuthFailed";
    case ErrorKind::ProviderError: return "ProviderError";
    case ErrorKind::ScriptMiss: return "ScriptMiss";
    case ErrorKind::MissingClass: return "MissingClass";
    case ErrorKind::TooFewRecords: return "TooFewRecords";
    case ErrorKind::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorKind::StoreNotEmbedded: return "StoreNotEmbedded";
    case ErrorKind::IsolationViolation: return "IsolationViolation";
    case ErrorKind::EmptyManifest: return "EmptyManifest";
    case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

std::string_view to_string(Severity s) noexcept {
    switch (s) {
    case Severity::Low: return "LOW";
    case Severity::Medium: return "MEDIUM";
    case Severity::High: return "HIGH";
    case Severity::Critical: return "CRITICAL";
    }
    return "LOW";
}

std::optional<Severity> severity_from_label(std::string_view label) noexcept {
    std::string upper;
    upper.reserve(label.size());
    for (char c : label) {
        upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    for (Severity s : kAllSeverities) {
        if (upper == to_string(s)) {
            return s;
        }
    }
    return std::nullopt;
}

Severity parse_label(std::string_view label) {
    if (auto s = severity_from_label(label)) {
        return *s;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown severity label '" + std::string(label) + "'");
}

Severity severity_from_score(double base_score) {
    if (!std::isfinite(base_score) || base_score < 0.1 || base_score > 10.0) {
        throw Error(ErrorKind::OutOfRange,
                    "CVSS base score " + std::to_string(base_score) + " outside [0.1, 10.0]");
    }
    // Scores carry one decimal, so the half-open cuts coincide with the closed bands.
    if (base_score < 4.0) return Severity::Low;
    if (base_score < 7.0) return Severity::Medium;
    if (base_score < 9.0) return Severity::High;
    return Severity::Critical;
}

}  // namespace sva
