#include "sva/retrieval.hpp"

#include "sva/error.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace sva {

void RetrievalConfig::validate() const {
    if (!(phi >= 0.0 && phi <= 1.0)) {
        throw Error(ErrorKind::OutOfRange, "phi must lie in [0, 1], got " + std::to_string(phi));
    }
}

double combined_similarity(double code_sim, double desc_sim, double phi) {
    auto in_unit = [](double x) { return x >= -1.0 && x <= 1.0; };
    if (!in_unit(code_sim) || !in_unit(desc_sim)) {
        throw Error(ErrorKind::OutOfRange, "similarities must lie in [-1, 1]");
    }
    if (!(phi >= 0.0 && phi <= 1.0)) {
        throw Error(ErrorKind::OutOfRange, "phi must lie in [0, 1]");
    }
    return phi * code_sim + (1.0 - phi) * desc_sim;
}

bool ranks_before(const ScoredEntry& a, const ScoredEntry& b) noexcept {
    if (a.combined != b.combined) return a.combined > b.combined;
    return a.entry->record.cve_id < b.entry->record.cve_id;
}

namespace {

void check_entry(const KnowledgeEntry& e, const RetrievalQuery& query) {
    if (!e.desc_embedding) {
        throw Error(ErrorKind::StoreNotEmbedded, e.record.cve_id + " has no description embedding");
    }
    if (e.desc_embedding->size() != query.description.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    e.record.cve_id + ": description embedding length " +
                        std::to_string(e.desc_embedding->size()) + " vs query " +
                        std::to_string(query.description.size()));
    }
    if (e.code_embedding && query.code && e.code_embedding->size() != query.code->size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    e.record.cve_id + ": code embedding length " +
                        std::to_string(e.code_embedding->size()) + " vs query " +
                        std::to_string(query.code->size()));
    }
}

ScoredEntry score(const KnowledgeEntry& e, std::size_t index, const RetrievalQuery& query,
                  double phi) {
    ScoredEntry s;
    s.entry = &e;
    s.index = index;
    s.desc_sim = cosine_similarity(query.description.values, e.desc_embedding->values);
    if (query.code && e.code_embedding) {
        s.code_sim = cosine_similarity(query.code->values, e.code_embedding->values);
    }
    s.combined = combined_similarity(s.code_sim, s.desc_sim, phi);
    return s;
}

void check_nonempty(std::size_t candidates, const RetrievalConfig& config) {
    if (config.k > 0 && candidates == 0) {
        throw Error(ErrorKind::EmptyStore, "no retrievable entries after exclusions");
    }
}

}  // namespace

std::vector<ScoredEntry> retrieve_top_k(const RetrievalQuery& query,
                                        std::span<const KnowledgeEntry> store,
                                        const RetrievalConfig& config) {
    config.validate();
    if (config.k == 0) return {};

    // Max-heap under ranks_before: the top is the weakest kept candidate.
    auto weaker_on_top = [](const ScoredEntry& a, const ScoredEntry& b) { return ranks_before(a, b); };
    std::priority_queue<ScoredEntry, std::vector<ScoredEntry>, decltype(weaker_on_top)> heap(
        weaker_on_top);

    std::size_t candidates = 0;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& e = store[i];
        if (config.exclude_ids.contains(e.record.cve_id)) continue;
        check_entry(e, query);
        ++candidates;
        ScoredEntry s = score(e, i, query, config.phi);
        if (heap.size() < config.k) {
            heap.push(s);
        } else if (ranks_before(s, heap.top())) {
            heap.pop();
            heap.push(s);
        }
    }
    check_nonempty(candidates, config);

    std::vector<ScoredEntry> out(heap.size());
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
        *it = heap.top();
        heap.pop();
    }
    return out;
}

std::vector<ScoredEntry> brute_force_rank(const RetrievalQuery& query,
                                          std::span<const KnowledgeEntry> store,
                                          const RetrievalConfig& config) {
    config.validate();
    auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
        double dot = 0.0;
        double na = 0.0;
        double nb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::ZeroVector, "zero embedding");
        return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    };

    std::vector<ScoredEntry> ranking;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& e = store[i];
        if (config.exclude_ids.contains(e.record.cve_id)) continue;
        check_entry(e, query);
        ScoredEntry s;
        s.entry = &e;
        s.index = i;
        s.desc_sim = cosine(query.description.values, e.desc_embedding->values);
        s.code_sim = (query.code && e.code_embedding)
                         ? cosine(query.code->values, e.code_embedding->values)
                         : 0.0;
        s.combined = config.phi * s.code_sim + (1.0 - config.phi) * s.desc_sim;
        ranking.push_back(s);
    }
    check_nonempty(ranking.size(), config);
    std::sort(ranking.begin(), ranking.end(), ranks_before);
    return ranking;
}

}  // namespace sva
