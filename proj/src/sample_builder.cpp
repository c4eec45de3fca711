#include "fashionrec/sample_builder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "fashionrec/error.hpp"
#include "fashionrec/hashing.hpp"
#include "fashionrec/text.hpp"

namespace fashionrec {

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kBasic: return "basic";
    case TaskKind::kPersonalized: return "personalized";
    case TaskKind::kAlternative: return "alternative";
  }
  return "basic";
}

TaskKind task_from_string(const std::string& name) {
  if (name == "basic") return TaskKind::kBasic;
  if (name == "personalized") return TaskKind::kPersonalized;
  if (name == "alternative") return TaskKind::kAlternative;
  throw Error(ErrorCode::kInput, "unknown task kind \"" + name + "\"");
}

namespace {

std::vector<std::string> style_terms(const Item& item) {
  if (!item.attributes.empty()) {
    std::vector<std::string> out;
    for (const auto& a : item.attributes) {
      if (!a.empty()) out.push_back(a);
    }
    return out;
  }
  const auto category_words = tokenize_words(item.category);
  auto words = content_words(item.description);
  std::erase_if(words, [&](const std::string& w) {
    return std::find(category_words.begin(), category_words.end(), w) != category_words.end();
  });
  return words;
}

}  // namespace

std::string preference_summary(const Catalog& catalog, const std::vector<ItemId>& items) {
  if (items.empty()) return {};
  std::map<std::string, std::size_t> freq;
  for (const auto& id : items) {
    const auto terms = style_terms(catalog.item(id));
    for (const auto& t : std::set<std::string>(terms.begin(), terms.end())) ++freq[t];
  }
  if (freq.empty()) {
    for (const auto& id : items) ++freq[catalog.item(id).category];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> top;
  for (std::size_t i = 0; i < ranked.size() && top.size() < 5; ++i) top.push_back(ranked[i].first);
  return "prefers: " + join(top, ", ");
}

int attributes_align(const Catalog& catalog, const ItemId& target, const std::vector<ItemId>& history) {
  const auto& wanted = catalog.item(target).attributes;
  if (wanted.empty()) return 0;
  const std::set<std::string> tags(wanted.begin(), wanted.end());
  for (const auto& id : history) {
    for (const auto& a : catalog.item(id).attributes) {
      if (tags.contains(a)) return 1;
    }
  }
  return 0;
}

OutfitSplit split_outfit(const Outfit& outfit, std::uint64_t seed) {
  const std::size_t n = outfit.item_ids.size();
  if (n < 2) throw Error(ErrorCode::kInput, "outfit " + outfit.id + " is too small to split");
  SplitMix64 rng(derive_seed(outfit.id, seed));
  const std::size_t max_targets = std::min<std::size_t>(3, n - 1);
  const std::size_t n_targets = 1 + static_cast<std::size_t>(rng.below(max_targets));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < n_targets; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
  }

  OutfitSplit split;
  std::vector<bool> is_target(n, false);
  for (std::size_t i = 0; i < n_targets; ++i) {
    is_target[order[i]] = true;
    split.targets.push_back(outfit.item_ids[order[i]]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_target[i]) split.partial.push_back(outfit.item_ids[i]);
  }
  return split;
}

BasicSample build_basic(const Outfit& outfit, std::uint64_t seed) {
  OutfitSplit split = split_outfit(outfit, seed);
  BasicSample sample;
  sample.id = "basic:" + outfit.id;
  sample.outfit_id = outfit.id;
  sample.partial = std::move(split.partial);
  sample.targets = std::move(split.targets);
  std::sort(sample.targets.begin(), sample.targets.end());
  return sample;
}

std::optional<PersonalizedSample> build_personalized(const HistoryFilter& filter, const Catalog& catalog,
                                                     const OutfitId& outfit, const UserId& user) {
  auto outcome = filter.filter_user_history(outfit, user);
  if (!outcome) return std::nullopt;
  PersonalizedSample sample;
  sample.id = "personalized:" + user + ":" + outfit;
  sample.outfit_id = outfit;
  sample.user_id = user;
  for (const auto& id : catalog.outfit(outfit).item_ids) {
    if (outcome->partial.contains(id)) sample.partial.push_back(id);
  }
  sample.target = outcome->target;
  sample.filtered_history = outcome->filtered_history;
  sample.preference_summary = preference_summary(catalog, sample.filtered_history);
  sample.valid = attributes_align(catalog, sample.target, sample.filtered_history);
  return sample;
}

std::vector<AlternativePair> find_alternative_pairs(const Catalog& catalog) {
  const auto& outfits = catalog.outfits();
  // Inverted index: item -> outfits holding it, then count shared items per pair.
  std::map<ItemId, std::vector<std::size_t>> holders;
  for (std::size_t i = 0; i < outfits.size(); ++i) {
    for (const auto& id : outfits[i].item_ids) holders[id].push_back(i);
  }
  std::map<std::pair<std::size_t, std::size_t>, std::vector<ItemId>> shared;
  for (const auto& [item, list] : holders) {
    for (std::size_t x = 0; x < list.size(); ++x) {
      for (std::size_t y = x + 1; y < list.size(); ++y) {
        shared[{list[x], list[y]}].push_back(item);
      }
    }
  }
  std::vector<AlternativePair> pairs;
  for (auto& [key, items] : shared) {
    if (items.size() < 2) continue;
    const Outfit& a = outfits[key.first];
    const Outfit& b = outfits[key.second];
    AlternativePair pair;
    pair.outfit_a = std::min(a.id, b.id);
    pair.outfit_b = std::max(a.id, b.id);
    pair.shared = std::move(items);
    pairs.push_back(std::move(pair));
  }
  std::sort(pairs.begin(), pairs.end(), [](const AlternativePair& l, const AlternativePair& r) {
    return std::tie(l.outfit_a, l.outfit_b) < std::tie(r.outfit_a, r.outfit_b);
  });
  return pairs;
}

std::vector<AlternativeSample> build_alternative(const Catalog& catalog, const AlternativePair& pair) {
  if (pair.shared.size() < 2) throw Error(ErrorCode::kInput, "alternative pair shares fewer than 2 items");
  const std::set<ItemId> anchors(pair.shared.begin(), pair.shared.end());
  auto rest = [&](const OutfitId& id) {
    std::vector<ItemId> out;
    for (const auto& item : catalog.outfit(id).item_ids) {
      if (!anchors.contains(item)) out.push_back(item);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto rest_a = rest(pair.outfit_a);
  const auto rest_b = rest(pair.outfit_b);

  std::vector<AlternativeSample> forward, backward;
  auto make = [&](const OutfitId& current, const OutfitId& other, const ItemId& from, const ItemId& to) {
    AlternativeSample s;
    s.id = "alternative:" + current + ":" + other + ":" + from + ":" + to;
    s.outfit_a = current;
    s.outfit_b = other;
    s.anchors.assign(anchors.begin(), anchors.end());
    s.replace = from;
    s.replacement = to;
    return s;
  };
  for (const auto& ia : rest_a) {
    for (const auto& ib : rest_b) {
      if (catalog.item(ia).category != catalog.item(ib).category) continue;
      forward.push_back(make(pair.outfit_a, pair.outfit_b, ia, ib));
      backward.push_back(make(pair.outfit_b, pair.outfit_a, ib, ia));
    }
  }
  forward.insert(forward.end(), backward.begin(), backward.end());
  return forward;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw Error(ErrorCode::kConfig, "split ratios must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::kConfig, "split ratios must sum to 1");
  std::array<std::size_t, 3> sizes{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    // The epsilon absorbs products like 0.29 * 100 = 28.999999999999996.
    sizes[i] = static_cast<std::size_t>(std::floor(ratios[i] * static_cast<double>(n) + 1e-9));
    assigned += sizes[i];
  }
  for (std::size_t i = 0; assigned < n; i = (i + 1) % 3, ++assigned) ++sizes[i];
  return sizes;
}

DatasetSplit emit_split(TaskKind task, std::vector<std::string> sample_ids, const SplitRatios& ratios,
                        std::uint64_t seed) {
  const auto sizes = split_sizes(sample_ids.size(), ratios);
  SplitMix64 rng(derive_seed(to_string(task), seed));
  for (std::size_t i = sample_ids.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(sample_ids[i - 1], sample_ids[j]);
  }
  DatasetSplit split;
  split.task = task;
  split.seed = seed;
  split.ratios = ratios;
  auto first = sample_ids.begin();
  split.train.assign(first, first + static_cast<std::ptrdiff_t>(sizes[0]));
  first += static_cast<std::ptrdiff_t>(sizes[0]);
  split.valid.assign(first, first + static_cast<std::ptrdiff_t>(sizes[1]));
  first += static_cast<std::ptrdiff_t>(sizes[1]);
  split.test.assign(first, sample_ids.end());
  if (split.train.empty() || split.valid.empty() || split.test.empty()) {
    split.warnings.push_back(std::string(to_string(task)) + ": " + std::to_string(sample_ids.size()) +
                             " samples are too few for three non-empty splits");
  }
  return split;
}

Json DatasetSplit::to_json() const {
  return Json{{"task", to_string(task)},
              {"seed", seed},
              {"ratios", ratios},
              {"ids", Json{{"train", train}, {"valid", valid}, {"test", test}}}};
}

Json to_json(const BasicSample& s) {
  return Json{{"id", s.id}, {"task", "basic"}, {"outfit_id", s.outfit_id}, {"partial", s.partial},
              {"targets", s.targets}};
}

Json to_json(const PersonalizedSample& s) {
  return Json{{"id", s.id},
              {"task", "personalized"},
              {"outfit_id", s.outfit_id},
              {"user_id", s.user_id},
              {"partial", s.partial},
              {"target", s.target},
              {"filtered_history", s.filtered_history},
              {"preference_summary", s.preference_summary},
              {"valid", s.valid}};
}

Json to_json(const AlternativeSample& s) {
  return Json{{"id", s.id},
              {"task", "alternative"},
              {"outfit_a", s.outfit_a},
              {"outfit_b", s.outfit_b},
              {"anchors", s.anchors},
              {"replace", s.replace},
              {"replacement", s.replacement}};
}

BasicSample basic_from_json(const Json& row) {
  return BasicSample{row.at("id").get<std::string>(), row.at("outfit_id").get<std::string>(),
                     row.at("partial").get<std::vector<ItemId>>(),
                     row.at("targets").get<std::vector<ItemId>>()};
}

PersonalizedSample personalized_from_json(const Json& row) {
  PersonalizedSample s;
  s.id = row.at("id").get<std::string>();
  s.outfit_id = row.at("outfit_id").get<std::string>();
  s.user_id = row.at("user_id").get<std::string>();
  s.partial = row.at("partial").get<std::vector<ItemId>>();
  s.target = row.at("target").get<std::string>();
  s.filtered_history = row.at("filtered_history").get<std::vector<ItemId>>();
  s.preference_summary = row.at("preference_summary").get<std::string>();
  s.valid = row.value("valid", 0);
  return s;
}

AlternativeSample alternative_from_json(const Json& row) {
  return AlternativeSample{row.at("id").get<std::string>(),      row.at("outfit_a").get<std::string>(),
                           row.at("outfit_b").get<std::string>(), row.at("anchors").get<std::vector<ItemId>>(),
                           row.at("replace").get<std::string>(),  row.at("replacement").get<std::string>()};
}

Json DatasetSummary::to_json() const {
  Json tasks_json = Json::array();
  for (const auto& t : tasks) {
    tasks_json.push_back(Json{{"task", fashionrec::to_string(t.kind)},
                              {"samples", t.samples},
                              {"train", t.split.train.size()},
                              {"valid", t.split.valid.size()},
                              {"test", t.split.test.size()}});
  }
  return Json{{"tasks", tasks_json}, {"warnings", warnings}};
}

DatasetSummary build_dataset(const Catalog& catalog, const ItemFeatures& features,
                             const DatasetOptions& options, const std::filesystem::path& out_dir) {
  DatasetSummary summary;
  Json manifest = Json::array();
  for (TaskKind kind : options.tasks) {
    std::vector<Json> rows;
    std::vector<std::string> ids;
    switch (kind) {
      case TaskKind::kBasic:
        for (const auto& outfit : catalog.outfits()) {
          auto s = build_basic(outfit, options.seed);
          ids.push_back(s.id);
          rows.push_back(to_json(s));
        }
        break;
      case TaskKind::kPersonalized: {
        HistoryFilter filter(catalog, features, options.filter);
        std::set<std::string> seen;
        for (const auto& user : catalog.users()) {
          for (const auto& outfit : user.outfit_ids) {
            auto s = build_personalized(filter, catalog, outfit, user.id);
            if (!s || !seen.insert(s->id).second) continue;
            ids.push_back(s->id);
            rows.push_back(to_json(*s));
          }
        }
        break;
      }
      case TaskKind::kAlternative:
        for (const auto& pair : find_alternative_pairs(catalog)) {
          for (auto& s : build_alternative(catalog, pair)) {
            ids.push_back(s.id);
            rows.push_back(to_json(s));
          }
        }
        break;
    }
    write_jsonl(out_dir / (std::string(to_string(kind)) + ".jsonl"), rows);
    DatasetSummary::Task task{kind, rows.size(), emit_split(kind, ids, options.ratios, options.seed)};
    if (rows.empty()) {
      summary.warnings.push_back(std::string(to_string(kind)) + ": zero samples produced");
    } else {
      summary.warnings.insert(summary.warnings.end(), task.split.warnings.begin(), task.split.warnings.end());
    }
    manifest.push_back(task.split.to_json());
    summary.tasks.push_back(std::move(task));
  }
  write_json(out_dir / "split.json", manifest);
  return summary;
}

}  // namespace fashionrec
