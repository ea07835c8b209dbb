#pragma once

#include "sva/embedding.hpp"
#include "sva/knowledge_base.hpp"

#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace sva {

struct RetrievalConfig {
    static constexpr double kDefaultPhi = 0.6;
    static constexpr std::size_t kDefaultK = 5;

    double phi = kDefaultPhi;  // weight of code similarity
    std::size_t k = kDefaultK;
    std::unordered_set<std::string> exclude_ids;

    void validate() const;
};

/// Embedded form of the vulnerability being assessed. `code` is absent for
/// description-only targets.
struct RetrievalQuery {
    std::optional<EmbeddingVector> code;
    EmbeddingVector description;
};

struct ScoredEntry {
    const KnowledgeEntry* entry = nullptr;
    std::size_t index = 0;  // position in the store span
    double code_sim = 0.0;
    double desc_sim = 0.0;
    double combined = 0.0;
};

/// phi * code_sim + (1 - phi) * desc_sim. OutOfRange if a similarity is
/// outside [-1, 1] or phi outside [0, 1].
double combined_similarity(double code_sim, double desc_sim, double phi);

/// Ranking order: combined descending, then cve_id ascending.
bool ranks_before(const ScoredEntry& a, const ScoredEntry& b) noexcept;

/// Exact top-k by exhaustive scan with a bounded heap. Entries without a code
/// embedding (or a query without one) contribute code_sim = 0.
/// Throws EmptyStore when k > 0 and nothing is left after exclusions,
/// DimensionMismatch on incompatible embeddings, StoreNotEmbedded when an
/// entry lacks a description embedding.
std::vector<ScoredEntry> retrieve_top_k(const RetrievalQuery& query,
                                        std::span<const KnowledgeEntry> store,
                                        const RetrievalConfig& config);

/// Reference ranking of the whole store (k is ignored except for the
/// EmptyStore check). Scores with its own plain loops and a full sort.
std::vector<ScoredEntry> brute_force_rank(const RetrievalQuery& query,
                                          std::span<const KnowledgeEntry> store,
                                          const RetrievalConfig& config);

}  // namespace sva
