#include "sva/dataset.hpp"

#include "sva/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sva {

void SplitSpec::validate() const {
    const auto r = ratios();
    if (std::any_of(r.begin(), r.end(), [](double x) { return !(x > 0.0); })) {
        throw Error(ErrorKind::InvalidArgument, "split ratios must be positive");
    }
    if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
        throw Error(ErrorKind::InvalidArgument, "split ratios must sum to 1");
    }
}

std::array<std::size_t, 3> apportion(std::size_t n, const SplitSpec& spec) {
    const auto r = spec.ratios();
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> fractions{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        const double quota = r[s] * static_cast<double>(n);
        // Guard against 0.8 * 10 landing on 7.999999999.
        double whole = std::floor(quota + 1e-9);
        counts[s] = static_cast<std::size_t>(whole);
        fractions[s] = std::max(0.0, quota - whole);
        assigned += counts[s];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (std::abs(fractions[a] - fractions[b]) > 1e-12) return fractions[a] > fractions[b];
        return r[a] > r[b];
    });
    // Floors sum to at most n, so at most two leftovers remain.
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i]];
    return counts;
}

DatasetSplits stratified_split(std::span<const VulnerabilityRecord> records, const SplitSpec& spec) {
    spec.validate();
    std::array<std::vector<std::size_t>, kSeverityCount> by_class;
    for (std::size_t i = 0; i < records.size(); ++i) {
        by_class[index_of(records[i].severity)].push_back(i);
    }
    for (Severity s : kAllSeverities) {
        const auto n = by_class[index_of(s)].size();
        if (n == 0) throw Error(ErrorKind::MissingClass, "no records labelled " + std::string(to_string(s)));
        if (n < 3) {
            throw Error(ErrorKind::TooFewRecords, std::string(to_string(s)) + " has only " +
                                                      std::to_string(n) + " records; 3 are needed");
        }
    }

    std::vector<int> assignment(records.size(), -1);
    for (Severity s : kAllSeverities) {
        auto& members = by_class[index_of(s)];
        std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ULL + index_of(s));
        std::shuffle(members.begin(), members.end(), rng);
        const auto counts = apportion(members.size(), spec);
        std::size_t cursor = 0;
        for (int split = 0; split < 3; ++split) {
            for (std::size_t c = 0; c < counts[static_cast<std::size_t>(split)]; ++c) {
                assignment[members[cursor++]] = split;
            }
        }
    }

    DatasetSplits out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        switch (assignment[i]) {
        case 0: out.knowledge.push_back(records[i]); break;
        case 1: out.validation.push_back(records[i]); break;
        default: out.test.push_back(records[i]); break;
        }
    }
    return out;
}

}  // namespace sva
