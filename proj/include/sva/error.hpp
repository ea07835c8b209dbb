#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sva {

enum class ErrorKind {
    FileNotFound,
    MalformedLine,
    EmptyDataset,
    InvalidArgument,
    OutOfRange,
    NetworkError,
    Timeout,
    RateLimited,
    ParseError,
    UnknownCwe,
    ProviderUnavailable,
    DimensionMismatch,
    EmptyInput,
    ZeroVector,
    EmptyStore,
    EmptyTarget,
    TemplateInvalid,
    Unparseable,
    AuthFailed,
    ProviderError,
    ScriptMiss,
    MissingClass,
    TooFewRecords,
    EmptyEvaluation,
    StoreNotEmbedded,
    IsolationViolation,
    EmptyManifest,
    ConfigError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers can branch
/// (retry, abort, record per-sample) without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    bool retryable() const noexcept {
        return kind_ == ErrorKind::NetworkError || kind_ == ErrorKind::Timeout ||
               kind_ == ErrorKind::RateLimited;
    }

private:
    ErrorKind kind_;
};

}  // namespace sva
