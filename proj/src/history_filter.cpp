#include "fashionrec/history_filter.hpp"

#include <algorithm>

#include "fashionrec/error.hpp"

namespace fashionrec {

void FilterConfig::validate() const {
  if (min_user_history < 1 || min_compatible_items < 1) {
    throw Error(ErrorCode::kConfig, "m_u and m_i must be >= 1");
  }
  if (!(alpha > 0.0)) throw Error(ErrorCode::kConfig, "alpha must be > 0");
  if (!(beta >= 0.0)) throw Error(ErrorCode::kConfig, "beta must be >= 0");
  if (top_k < 1) throw Error(ErrorCode::kConfig, "k must be >= 1");
}

double history_score(double sim, std::size_t count, std::size_t max_count, double beta) {
  if (max_count == 0) throw Error(ErrorCode::kContract, "max interaction count is zero");
  return (beta * static_cast<double>(count) / static_cast<double>(max_count) + 1.0) * sim;
}

HistoryFilter::HistoryFilter(const Catalog& catalog, const ItemFeatures& features, FilterConfig config)
    : catalog_(catalog), features_(features), config_(config) {
  config_.validate();
}

std::vector<CandidatePair> HistoryFilter::enumerate_candidates(const OutfitId& outfit_id,
                                                               const UserId& user) const {
  const Outfit& outfit = catalog_.outfit(outfit_id);
  (void)catalog_.user(user);
  std::vector<CandidatePair> admitted;
  for (const auto& target : outfit.item_ids) {
    CandidatePair pair;
    pair.target = target;
    for (const auto& id : outfit.item_ids) {
      if (id != target) pair.partial.insert(id);
    }
    const std::string& category = catalog_.item(target).category;
    pair.history = catalog_.user_items_in_category(user, category);
    pair.compatible = catalog_.items_cooccurring_in_category(pair.partial, category);
    if (pair.history.size() >= config_.min_user_history &&
        pair.compatible.size() >= config_.min_compatible_items) {
      admitted.push_back(std::move(pair));
    }
  }
  return admitted;
}

const CandidatePair& HistoryFilter::select_optimal(const std::vector<CandidatePair>& candidates,
                                                   double alpha) {
  if (candidates.empty()) throw Error(ErrorCode::kContract, "select_optimal on an empty candidate set");
  const CandidatePair* best = nullptr;
  double best_value = 0.0;
  for (const auto& c : candidates) {
    const double value =
        alpha * static_cast<double>(c.compatible.size()) + static_cast<double>(c.history.size());
    if (!best || value > best_value || (value == best_value && c.target < best->target)) {
      best = &c;
      best_value = value;
    }
  }
  return *best;
}

CompatibilityProfile HistoryFilter::compatibility_profile(const ItemSet& compatible,
                                                          const ItemSet& partial) const {
  if (compatible.empty()) throw Error(ErrorCode::kInput, "compatible item set is empty");
  std::map<ItemId, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& j : compatible) {
    const std::size_t c = catalog_.cooccurrence_count(j, partial);
    counts.emplace(j, c);
    total += c;
  }
  if (total == 0) throw Error(ErrorCode::kContract, "compatible items never co-occur with the partial outfit");

  CompatibilityProfile profile;
  std::vector<double> acc(features_.embedder().dim(), 0.0);
  for (const auto& [j, c] : counts) {
    const double w = static_cast<double>(c) / static_cast<double>(total);
    profile.weights.emplace(j, w);
    const auto& f = features_.of(catalog_.item(j));
    for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += w * f[d];
  }
  profile.vector = EmbeddingVector(std::move(acc));
  return profile;
}

ScoredHistoryItem HistoryFilter::score_history_item(const ItemId& item,
                                                    const CompatibilityProfile& profile,
                                                    const UserId& user, std::size_t max_count) const {
  ScoredHistoryItem scored;
  scored.id = item;
  scored.sim = cosine(features_.of(catalog_.item(item)), profile.vector);
  scored.count = catalog_.item_interaction_count(user, item);
  scored.score = history_score(scored.sim, scored.count, max_count, config_.beta);
  return scored;
}

std::optional<FilterOutcome> HistoryFilter::filter_user_history(const OutfitId& outfit,
                                                                const UserId& user) const {
  const auto candidates = enumerate_candidates(outfit, user);
  if (candidates.empty()) return std::nullopt;
  const CandidatePair& best = select_optimal(candidates, config_.alpha);

  const CompatibilityProfile profile = compatibility_profile(best.compatible, best.partial);

  std::size_t max_count = 0;
  for (const auto& j : best.history) {
    max_count = std::max(max_count, catalog_.item_interaction_count(user, j));
  }
  if (max_count == 0) throw Error(ErrorCode::kContract, "user history items with zero interactions");

  FilterOutcome outcome;
  outcome.partial = best.partial;
  outcome.target = best.target;
  for (const auto& j : best.history) {
    outcome.scores.push_back(score_history_item(j, profile, user, max_count));
  }
  std::stable_sort(outcome.scores.begin(), outcome.scores.end(),
                   [](const ScoredHistoryItem& a, const ScoredHistoryItem& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.id < b.id;
                   });
  const std::size_t keep = std::min(config_.top_k, outcome.scores.size());
  for (std::size_t i = 0; i < keep; ++i) outcome.filtered_history.push_back(outcome.scores[i].id);
  return outcome;
}

}  // namespace fashionrec
