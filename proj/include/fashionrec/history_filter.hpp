#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fashionrec/catalog.hpp"
#include "fashionrec/embedding.hpp"

namespace fashionrec {

struct FilterConfig {
  std::size_t min_user_history = 10;     // m_u
  std::size_t min_compatible_items = 3;  // m_i
  double alpha = 3.0;                    // weight of |H_c| when picking the pair
  double beta = 2.0;                     // interaction-count amplification
  std::size_t top_k = 5;

  void validate() const;
};

// One (partial outfit, target) decomposition of an outfit.
struct CandidatePair {
  ItemSet partial;
  ItemId target;
  ItemSet compatible;  // H_c
  ItemSet history;     // U_c
};

struct CompatibilityProfile {
  EmbeddingVector vector;
  std::map<ItemId, double> weights;
};

struct ScoredHistoryItem {
  ItemId id;
  double sim = 0.0;
  std::size_t count = 0;
  double score = 0.0;
};

struct FilterOutcome {
  ItemSet partial;
  ItemId target;
  std::vector<ItemId> filtered_history;  // score desc, id asc on ties
  std::vector<ScoredHistoryItem> scores;  // every U_c item, same order

  bool operator==(const FilterOutcome& other) const {
    return partial == other.partial && target == other.target &&
           filtered_history == other.filtered_history;
  }
};

// (beta * count / max_count + 1) * sim
double history_score(double sim, std::size_t count, std::size_t max_count, double beta);

// User-history filtering over an immutable catalog. Safe to call from
// several threads once the catalog is populated.
class HistoryFilter {
 public:
  HistoryFilter(const Catalog& catalog, const ItemFeatures& features, FilterConfig config = {});

  const FilterConfig& config() const { return config_; }

  // Candidates admitted by the m_u / m_i thresholds, in outfit item order.
  std::vector<CandidatePair> enumerate_candidates(const OutfitId& outfit, const UserId& user) const;

  // argmax alpha*|H_c| + |U_c|, ties to the ascending target id. Throws on empty input.
  static const CandidatePair& select_optimal(const std::vector<CandidatePair>& candidates,
                                             double alpha);

  // Co-occurrence weighted mean feature of H_c.
  CompatibilityProfile compatibility_profile(const ItemSet& compatible, const ItemSet& partial) const;

  ScoredHistoryItem score_history_item(const ItemId& item, const CompatibilityProfile& profile,
                                       const UserId& user, std::size_t max_count) const;

  // std::nullopt when no decomposition passes the thresholds.
  std::optional<FilterOutcome> filter_user_history(const OutfitId& outfit, const UserId& user) const;

 private:
  const Catalog& catalog_;
  const ItemFeatures& features_;
  FilterConfig config_;
};

}  // namespace fashionrec
