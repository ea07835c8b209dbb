#include "sva/evaluation.hpp"

#include "sva/error.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace sva {

using nlohmann::json;

ConfusionMatrix ConfusionMatrix::from_counts(const Counts4& counts) {
    ConfusionMatrix cm;
    cm.counts_ = counts;
    return cm;
}

void ConfusionMatrix::add(Severity truth, std::optional<Severity> predicted, std::uint64_t n) {
    if (predicted) {
        counts_[index_of(truth)][index_of(*predicted)] += n;
    } else {
        unparseable_[index_of(truth)] += n;
    }
}

std::uint64_t ConfusionMatrix::unparseable_total() const noexcept {
    std::uint64_t sum = 0;
    for (auto u : unparseable_) sum += u;
    return sum;
}

std::uint64_t ConfusionMatrix::total() const noexcept {
    std::uint64_t sum = unparseable_total();
    for (const auto& row : counts_) {
        for (auto c : row) sum += c;
    }
    return sum;
}

std::uint64_t ConfusionMatrix::correct() const noexcept {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < kSeverityCount; ++i) sum += counts_[i][i];
    return sum;
}

ClassCounts ConfusionMatrix::one_vs_rest(Severity cls) const noexcept {
    const std::size_t i = index_of(cls);
    ClassCounts c;
    c.tp = counts_[i][i];
    std::uint64_t row = unparseable_[i];
    std::uint64_t column = 0;
    for (std::size_t j = 0; j < kSeverityCount; ++j) {
        row += counts_[i][j];
        column += counts_[j][i];
    }
    c.fn = row - c.tp;
    c.fp = column - c.tp;
    c.tn = total() - c.tp - c.fn - c.fp;
    return c;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) noexcept {
    for (std::size_t i = 0; i < kSeverityCount; ++i) {
        unparseable_[i] += other.unparseable_[i];
        for (std::size_t j = 0; j < kSeverityCount; ++j) counts_[i][j] += other.counts_[i][j];
    }
    return *this;
}

namespace {

void require_samples(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error(ErrorKind::EmptyEvaluation, "no evaluated samples");
}

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double accuracy(const ConfusionMatrix& cm) {
    require_samples(cm);
    return ratio(cm.correct(), cm.total());
}

double precision(const ConfusionMatrix& cm, Severity cls) {
    require_samples(cm);
    const auto c = cm.one_vs_rest(cls);
    return ratio(c.tp, c.tp + c.fp);
}

double recall(const ConfusionMatrix& cm, Severity cls) {
    require_samples(cm);
    const auto c = cm.one_vs_rest(cls);
    return ratio(c.tp, c.tp + c.fn);
}

double per_class_f1(const ConfusionMatrix& cm, Severity cls) {
    const double p = precision(cm, cls);
    const double r = recall(cm, cls);
    return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double macro_f1(const ConfusionMatrix& cm) {
    double sum = 0.0;
    for (Severity s : kAllSeverities) sum += per_class_f1(cm, s);
    return sum / static_cast<double>(kSeverityCount);
}

double per_class_mcc(const ConfusionMatrix& cm, Severity cls) {
    require_samples(cm);
    const auto c = cm.one_vs_rest(cls);
    const double tp = static_cast<double>(c.tp);
    const double fp = static_cast<double>(c.fp);
    const double fn = static_cast<double>(c.fn);
    const double tn = static_cast<double>(c.tn);
    const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (den == 0.0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(den);
}

double macro_mcc(const ConfusionMatrix& cm) {
    double sum = 0.0;
    for (Severity s : kAllSeverities) sum += per_class_mcc(cm, s);
    return sum / static_cast<double>(kSeverityCount);
}

double multiclass_mcc(const ConfusionMatrix& cm) {
    require_samples(cm);
    const auto& m = cm.counts();
    std::array<double, kSeverityCount> t{};  // true totals
    std::array<double, kSeverityCount> p{};  // predicted totals
    double s = 0.0;
    double c = 0.0;
    for (std::size_t i = 0; i < kSeverityCount; ++i) {
        for (std::size_t j = 0; j < kSeverityCount; ++j) {
            const auto v = static_cast<double>(m[i][j]);
            t[i] += v;
            p[j] += v;
            s += v;
        }
        c += static_cast<double>(m[i][i]);
    }
    double tp_sum = 0.0;
    double pp = 0.0;
    double tt = 0.0;
    for (std::size_t k = 0; k < kSeverityCount; ++k) {
        tp_sum += t[k] * p[k];
        pp += p[k] * p[k];
        tt += t[k] * t[k];
    }
    const double den = std::sqrt(s * s - pp) * std::sqrt(s * s - tt);
    return den == 0.0 ? 0.0 : (c * s - tp_sum) / den;
}

EvaluationReport evaluate_matrix(const ConfusionMatrix& cm) {
    require_samples(cm);
    EvaluationReport r;
    r.matrix = cm;
    r.total = cm.total();
    r.unparseable_count = cm.unparseable_total();
    r.accuracy = accuracy(cm);
    r.macro_f1 = macro_f1(cm);
    r.macro_mcc = macro_mcc(cm);
    r.multiclass_mcc = multiclass_mcc(cm);
    for (Severity s : kAllSeverities) {
        r.per_class[index_of(s)] =
            ClassMetrics{precision(cm, s), recall(cm, s), per_class_f1(cm, s), per_class_mcc(cm, s)};
    }
    return r;
}

EvaluationReport evaluate_run(std::span<const PredictionPair> pairs) {
    if (pairs.empty()) throw Error(ErrorKind::EmptyEvaluation, "no prediction pairs");
    ConfusionMatrix cm;
    for (const auto& pair : pairs) cm.add(pair.truth, pair.predicted);
    return evaluate_matrix(cm);
}

json to_json(const EvaluationReport& report) {
    json per_class = json::object();
    json matrix = json::array();
    for (Severity s : kAllSeverities) {
        const auto& m = report.per_class[index_of(s)];
        per_class[std::string(to_string(s))] =
            json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"mcc", m.mcc}};
        json row = json::array();
        for (Severity p : kAllSeverities) row.push_back(report.matrix.count(s, p));
        row.push_back(report.matrix.unparseable(s));
        matrix.push_back(row);
    }
    return json{{"schema", EvaluationReport::kSchema},
                {"total", report.total},
                {"unparseable_count", report.unparseable_count},
                {"accuracy", report.accuracy},
                {"macro_f1", report.macro_f1},
                {"macro_mcc", report.macro_mcc},
                {"multiclass_mcc_non_macro", report.multiclass_mcc},
                {"per_class", per_class},
                {"labels", json::array({"LOW", "MEDIUM", "HIGH", "CRITICAL"})},
                {"confusion_matrix_true_by_predicted_plus_unparseable", matrix}};
}

std::string metrics_csv(const EvaluationReport& report, const std::string& approach) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << "Approach,Accuracy (%),F1-score (%),MCC (%)\n";
    out << approach << "," << report.accuracy * 100.0 << "," << report.macro_f1 * 100.0 << ","
        << report.macro_mcc * 100.0 << "\n";
    return out.str();
}

}  // namespace sva
