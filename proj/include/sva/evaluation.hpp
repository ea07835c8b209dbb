#pragma once

#include "sva/severity.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace sva {

/// One-vs-rest counts for a single class.
struct ClassCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;
};

/// Counts indexed [true][predicted] over the four severities, plus a fifth
/// "unparseable" column per true class. An unparseable prediction is a false
/// negative for its true class and a false positive for none.
class ConfusionMatrix {
public:
    using Counts4 = std::array<std::array<std::uint64_t, kSeverityCount>, kSeverityCount>;

    ConfusionMatrix() = default;
    static ConfusionMatrix from_counts(const Counts4& counts);

    void add(Severity truth, std::optional<Severity> predicted, std::uint64_t n = 1);

    std::uint64_t count(Severity truth, Severity predicted) const noexcept {
        return counts_[index_of(truth)][index_of(predicted)];
    }
    std::uint64_t unparseable(Severity truth) const noexcept { return unparseable_[index_of(truth)]; }
    std::uint64_t unparseable_total() const noexcept;
    std::uint64_t total() const noexcept;
    std::uint64_t correct() const noexcept;

    ClassCounts one_vs_rest(Severity cls) const noexcept;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other) noexcept;
    bool operator==(const ConfusionMatrix&) const = default;

    const Counts4& counts() const noexcept { return counts_; }

private:
    Counts4 counts_{};
    std::array<std::uint64_t, kSeverityCount> unparseable_{};
};

// All metric functions throw EmptyEvaluation on an empty matrix.
// Zero-denominator conventions: precision/recall/F1 = 0, MCC = 0.

double accuracy(const ConfusionMatrix& cm);
double precision(const ConfusionMatrix& cm, Severity cls);
double recall(const ConfusionMatrix& cm, Severity cls);
double per_class_f1(const ConfusionMatrix& cm, Severity cls);
double macro_f1(const ConfusionMatrix& cm);
double per_class_mcc(const ConfusionMatrix& cm, Severity cls);
/// Unweighted mean of the one-vs-rest MCCs.
double macro_mcc(const ConfusionMatrix& cm);
/// Gorodkin's R_K over the 4x4 part (unparseable samples excluded). Reported
/// for comparison only; macro_mcc is the headline number.
double multiclass_mcc(const ConfusionMatrix& cm);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double mcc = 0.0;
};

struct EvaluationReport {
    static constexpr const char* kSchema = "sva.evaluation_report/v1";

    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double macro_mcc = 0.0;
    double multiclass_mcc = 0.0;
    std::array<ClassMetrics, kSeverityCount> per_class{};
    std::uint64_t unparseable_count = 0;
    std::uint64_t total = 0;
    ConfusionMatrix matrix;
};

struct PredictionPair {
    Severity truth = Severity::Low;
    std::optional<Severity> predicted;  // nullopt = unparseable reply
};

EvaluationReport evaluate_matrix(const ConfusionMatrix& cm);
EvaluationReport evaluate_run(std::span<const PredictionPair> pairs);

nlohmann::json to_json(const EvaluationReport& report);

/// "Approach,Accuracy (%),F1-score (%),MCC (%)" header plus one row.
std::string metrics_csv(const EvaluationReport& report, const std::string& approach);

}  // namespace sva
