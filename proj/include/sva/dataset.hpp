#pragma once

#include "sva/knowledge_base.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace sva {

struct SplitSpec {
    double knowledge = 0.8;
    double validation = 0.1;
    double test = 0.1;
    std::uint64_t seed = 42;

    std::array<double, 3> ratios() const noexcept { return {knowledge, validation, test}; }
    /// Ratios must each be > 0 and sum to 1 within 1e-9.
    void validate() const;
};

struct DatasetSplits {
    std::vector<VulnerabilityRecord> knowledge;
    std::vector<VulnerabilityRecord> validation;
    std::vector<VulnerabilityRecord> test;
};

/// Largest-remainder apportionment of `n` items over the three ratios.
/// Leftover items go to the largest fractional parts; equal fractions go to
/// the split with the larger ratio (then the earlier split).
std::array<std::size_t, 3> apportion(std::size_t n, const SplitSpec& spec);

/// Per-class seeded shuffle, then slicing by `apportion`. Each split keeps the
/// input order of its records. Throws MissingClass if a severity has no
/// records, TooFewRecords if one has fewer than 3.
DatasetSplits stratified_split(std::span<const VulnerabilityRecord> records, const SplitSpec& spec);

}  // namespace sva
