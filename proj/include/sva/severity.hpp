#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace sva {

/// CVSS v3 qualitative rating, ordered LOW < MEDIUM < HIGH < CRITICAL.
enum class Severity : std::uint8_t { Low = 0, Medium = 1, High = 2, Critical = 3 };

inline constexpr std::size_t kSeverityCount = 4;
inline constexpr std::array<Severity, kSeverityCount> kAllSeverities{
    Severity::Low, Severity::Medium, Severity::High, Severity::Critical};

constexpr std::size_t index_of(Severity s) noexcept { return static_cast<std::size_t>(s); }

std::string_view to_string(Severity s) noexcept;

/// Case-insensitive label lookup ("high", "HIGH", "High").
std::optional<Severity> severity_from_label(std::string_view label) noexcept;

/// Throws Error(InvalidArgument) on an unknown label.
Severity parse_label(std::string_view label);

/// Maps a CVSS v3 base score onto its band:
/// LOW [0.1, 3.9], MEDIUM [4.0, 6.9], HIGH [7.0, 8.9], CRITICAL [9.0, 10.0].
/// Scores outside [0.1, 10.0] (including 0.0, CVSS "None") throw OutOfRange.
Severity severity_from_score(double base_score);

}  // namespace sva
