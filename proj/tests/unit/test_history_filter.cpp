#include <gtest/gtest.h>

#include "history_filter_oracle.hpp"
#include "fashionrec/hashing.hpp"
#include "fashionrec/history_filter.hpp"
#include "test_support.hpp"

namespace fashionrec {
namespace {

using testing::boundary_catalog;
using testing::make_item;
using testing::throws_code;

TEST(HistoryFilterThresholds, BoundariesAreInclusive) {
  auto features = testing::mock_features(16);
  struct Case {
    std::size_t u, h;
    bool admitted;
  };
  for (const Case& tc : {Case{9, 3, false}, Case{10, 2, false}, Case{10, 3, true}, Case{9, 2, false}, Case{11, 4, true}}) {
    const Catalog c = boundary_catalog(tc.u, tc.h);
    ASSERT_EQ(c.user_items_in_category("user", "shoes").size(), tc.u);
    ASSERT_EQ(c.items_cooccurring_in_category({"p1", "p2"}, "shoes").size(), tc.h);
    HistoryFilter filter(c, *features);
    const auto candidates = filter.enumerate_candidates("o", "user");
    const auto outcome = filter.filter_user_history("o", "user");
    EXPECT_EQ(outcome.has_value(), tc.admitted) << tc.u << "/" << tc.h;
    EXPECT_EQ(candidates.size(), tc.admitted ? 1U : 0U);
    if (outcome) {
      EXPECT_EQ(outcome->target, "t");
      EXPECT_EQ(outcome->partial, (ItemSet{"p1", "p2"}));
      EXPECT_EQ(outcome->filtered_history.size(), 5U);
    }
  }
}

TEST(HistoryScore, SpotValues) {
  EXPECT_NEAR(history_score(1.0, 7, 7, 2.0), 3.0, 1e-9);
  EXPECT_NEAR(history_score(0.42, 0, 7, 2.0), 0.42, 1e-9);
  EXPECT_NEAR(history_score(-0.5, 0, 3, 2.0), -0.5, 1e-9);
  EXPECT_NEAR(history_score(0.5, 1, 2, 2.0), 1.0, 1e-12);
  EXPECT_TRUE(throws_code([] { history_score(1.0, 0, 0, 2.0); }, ErrorCode::kContract));
}

TEST(SelectOptimal, MaximizesWeightedSizesWithIdTieBreak) {
  auto cand = [](const std::string& target, std::size_t h, std::size_t u) {
    CandidatePair p;
    p.target = target;
    for (std::size_t i = 0; i < h; ++i) p.compatible.insert("h" + std::to_string(i));
    for (std::size_t i = 0; i < u; ++i) p.history.insert("u" + std::to_string(i));
    return p;
  };
  // 3*4+10 = 22 vs 3*3+14 = 23
  std::vector<CandidatePair> cs{cand("a", 4, 10), cand("b", 3, 14)};
  EXPECT_EQ(HistoryFilter::select_optimal(cs, 3.0).target, "b");
  EXPECT_EQ(HistoryFilter::select_optimal(cs, 5.0).target, "a");
  std::vector<CandidatePair> tied{cand("z", 3, 10), cand("m", 3, 10), cand("q", 3, 10)};
  EXPECT_EQ(HistoryFilter::select_optimal(tied, 3.0).target, "m");
  EXPECT_TRUE(throws_code([] { HistoryFilter::select_optimal({}, 3.0); }, ErrorCode::kContract));
}

TEST(CompatibilityProfile, WeightsAreNormalizedCounts) {
  const Catalog c = boundary_catalog(10, 4);
  auto features = testing::mock_features(16);
  HistoryFilter filter(c, *features);
  const ItemSet partial{"p1", "p2"};
  const auto h = c.items_cooccurring_in_category(partial, "shoes");
  const auto profile = filter.compatibility_profile(h, partial);
  double total = 0;
  for (const auto& [id, w] : profile.weights) total += w;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(profile.weights.at("t"), 0.25, 1e-12);
}

TEST(FilterConfig, RejectsInvalidValues) {
  FilterConfig c;
  c.top_k = 0;
  EXPECT_TRUE(throws_code([&] { c.validate(); }, ErrorCode::kConfig));
  c = {};
  c.beta = -1;
  EXPECT_TRUE(throws_code([&] { c.validate(); }, ErrorCode::kConfig));
}

TEST(HistoryFilterOracle, MatchesStraightLineTranscriptionOnFixture) {
  const Catalog& c = testing::fixture_catalog();
  auto features = testing::mock_features(64);
  HistoryFilter filter(c, *features);
  SplitMix64 rng(2024);
  int admitted = 0;
  for (int draw = 0; draw < 60; ++draw) {
    const auto& user = c.users()[rng.below(c.users().size())];
    const auto& outfit_id = user.outfit_ids[rng.below(user.outfit_ids.size())];
    const auto got = filter.filter_user_history(outfit_id, user.id);
    const auto want = testing::history_filter_oracle(c, outfit_id, user.id, {});
    ASSERT_EQ(got.has_value(), want.has_value()) << outfit_id << " " << user.id;
    if (!got) continue;
    ++admitted;
    EXPECT_EQ(got->partial, want->partial);
    EXPECT_EQ(got->target, want->target);
    EXPECT_EQ(got->filtered_history, want->filtered);
  }
  EXPECT_GT(admitted, 10);
}

TEST(HistoryFilterProperties, OutcomeInvariants) {
  const Catalog& c = testing::fixture_catalog();
  auto features = testing::mock_features(64);
  HistoryFilter filter(c, *features);
  for (const auto& user : c.users()) {
    for (const auto& oid : user.outfit_ids) {
      const auto out = filter.filter_user_history(oid, user.id);
      if (!out) continue;
      const auto& items = c.outfit(oid).item_ids;
      ItemSet whole(items.begin(), items.end());
      EXPECT_FALSE(out->partial.contains(out->target));
      ItemSet joined = out->partial;
      joined.insert(out->target);
      EXPECT_EQ(joined, whole);
      const auto& category = c.item(out->target).category;
      EXPECT_GE(c.user_items_in_category(user.id, category).size(), 10U);
      EXPECT_GE(c.items_cooccurring_in_category(out->partial, category).size(), 3U);
      EXPECT_LE(out->filtered_history.size(), 5U);
      for (std::size_t i = 1; i < out->scores.size(); ++i) EXPECT_GE(out->scores[i - 1].score, out->scores[i].score);
    }
  }
}

}  // namespace
}  // namespace fashionrec
