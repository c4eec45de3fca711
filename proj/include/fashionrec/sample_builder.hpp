#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fashionrec/catalog.hpp"
#include "fashionrec/history_filter.hpp"
#include "fashionrec/jsonl.hpp"

namespace fashionrec {

enum class TaskKind { kBasic, kPersonalized, kAlternative };

const char* to_string(TaskKind kind);
TaskKind task_from_string(const std::string& name);

struct BasicSample {
  std::string id;
  OutfitId outfit_id;
  std::vector<ItemId> partial;  // outfit order
  std::vector<ItemId> targets;  // ascending id, one dialogue slot each
};

struct PersonalizedSample {
  std::string id;
  OutfitId outfit_id;
  UserId user_id;
  std::vector<ItemId> partial;
  ItemId target;
  std::vector<ItemId> filtered_history;
  std::string preference_summary;
  int valid = 0;
};

struct AlternativeSample {
  std::string id;
  OutfitId outfit_a;  // the user's current outfit
  OutfitId outfit_b;
  std::vector<ItemId> anchors;  // S, ascending id
  ItemId replace;               // i_a
  ItemId replacement;           // i_b
};

struct AlternativePair {
  OutfitId outfit_a;
  OutfitId outfit_b;  // outfit_a < outfit_b
  std::vector<ItemId> shared;  // ascending id, size >= 2
};

struct OutfitSplit {
  std::vector<ItemId> partial;
  std::vector<ItemId> targets;  // draw order
};

using SplitRatios = std::array<double, 3>;  // train, valid, test

struct DatasetSplit {
  TaskKind task = TaskKind::kBasic;
  std::uint64_t seed = 0;
  SplitRatios ratios{0.9, 0.05, 0.05};
  std::vector<std::string> train, valid, test;
  std::vector<std::string> warnings;

  Json to_json() const;
};

// "prefers: a, b, c" over the most frequent style terms of the given items
// (attribute tags, or description words when an item has none). At most five
// terms; frequency desc then term asc.
std::string preference_summary(const Catalog& catalog, const std::vector<ItemId>& items);

// 1 iff some history item shares an attribute tag with the target.
int attributes_align(const Catalog& catalog, const ItemId& target, const std::vector<ItemId>& history);

// |T| uniform in [1, min(3, |O|-1)], T drawn without replacement. Deterministic
// per (outfit id, seed).
OutfitSplit split_outfit(const Outfit& outfit, std::uint64_t seed);

BasicSample build_basic(const Outfit& outfit, std::uint64_t seed);

std::optional<PersonalizedSample> build_personalized(const HistoryFilter& filter, const Catalog& catalog,
                                                     const OutfitId& outfit, const UserId& user);

// Unordered outfit pairs sharing >= 2 items, each once with a < b by id.
std::vector<AlternativePair> find_alternative_pairs(const Catalog& catalog);

// Same-category swaps between the non-shared items, both directions.
std::vector<AlternativeSample> build_alternative(const Catalog& catalog, const AlternativePair& pair);

// Seeded Fisher-Yates shuffle then contiguous cut; sizes floor(ratio*N),
// remainder handed out train, valid, test in turn.
DatasetSplit emit_split(TaskKind task, std::vector<std::string> sample_ids, const SplitRatios& ratios,
                        std::uint64_t seed);

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

Json to_json(const BasicSample& s);
Json to_json(const PersonalizedSample& s);
Json to_json(const AlternativeSample& s);
BasicSample basic_from_json(const Json& row);
PersonalizedSample personalized_from_json(const Json& row);
AlternativeSample alternative_from_json(const Json& row);

struct DatasetOptions {
  std::vector<TaskKind> tasks{TaskKind::kBasic, TaskKind::kPersonalized, TaskKind::kAlternative};
  std::uint64_t seed = 42;
  SplitRatios ratios{0.9, 0.05, 0.05};
  FilterConfig filter;
};

struct DatasetSummary {
  struct Task {
    TaskKind kind;
    std::size_t samples = 0;
    DatasetSplit split;
  };
  std::vector<Task> tasks;
  std::vector<std::string> warnings;

  Json to_json() const;
};

// Builds every requested task and writes <task>.jsonl plus split.json (an
// array with one entry per task) into out_dir.
DatasetSummary build_dataset(const Catalog& catalog, const ItemFeatures& features,
                             const DatasetOptions& options, const std::filesystem::path& out_dir);

}  // namespace fashionrec
