#include "fashionrec/catalog.hpp"

#include <algorithm>
#include <numeric>

#include "fashionrec/error.hpp"

namespace fashionrec {

Json CatalogStats::to_json() const {
  return Json{{"n_items", n_items},
              {"n_outfits", n_outfits},
              {"items_per_outfit", items_per_outfit},
              {"n_users", n_users},
              {"outfits_per_user", outfits_per_user}};
}

namespace {

std::string require_string(const Json& row, const char* key) {
  auto it = row.find(key);
  if (it == row.end() || !it->is_string()) {
    throw Error(ErrorCode::kParse, std::string("missing or non-string field \"") + key + "\"");
  }
  return it->get<std::string>();
}

std::vector<std::string> require_string_list(const Json& row, const char* key) {
  auto it = row.find(key);
  if (it == row.end() || !it->is_array()) {
    throw Error(ErrorCode::kParse, std::string("missing or non-array field \"") + key + "\"");
  }
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw Error(ErrorCode::kParse, std::string("non-string entry in \"") + key + "\"");
    out.push_back(v.get<std::string>());
  }
  return out;
}

// Re-throws a record error with the file and line prefixed.
template <typename Fn>
void load_rows(const std::filesystem::path& path, Fn&& add) {
  for_each_jsonl(path, [&](const Json& row, std::size_t line) {
    try {
      add(row);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      const std::string where = path.filename().string() + ":" + std::to_string(line) + ": ";
      if (e.code() == ErrorCode::kParse) throw ParseError(where + e.what(), row.dump(), line);
      throw Error(e.code(), where + e.what());
    }
  });
}

}  // namespace

Item item_from_json(const Json& row) {
  Item item;
  item.id = require_string(row, "id");
  item.category = require_string(row, "category");
  item.description = require_string(row, "description");
  if (auto it = row.find("image_ref"); it != row.end() && it->is_string()) {
    item.image_ref = it->get<std::string>();
  }
  if (row.contains("attributes") && !row["attributes"].is_null()) {
    item.attributes = require_string_list(row, "attributes");
  }
  return item;
}

Json item_to_json(const Item& item) {
  return Json{{"id", item.id},
              {"category", item.category},
              {"description", item.description},
              {"image_ref", item.image_ref},
              {"attributes", item.attributes}};
}

Catalog Catalog::ingest(const std::filesystem::path& items_path,
                        const std::filesystem::path& outfits_path,
                        const std::filesystem::path& users_path) {
  Catalog catalog;
  catalog.base_dir_ = items_path.parent_path();
  load_rows(items_path, [&](const Json& row) { catalog.add_item(item_from_json(row)); });
  load_rows(outfits_path, [&](const Json& row) {
    catalog.add_outfit(Outfit{require_string(row, "id"), require_string_list(row, "items")});
  });
  load_rows(users_path, [&](const Json& row) {
    catalog.add_user(UserRecord{require_string(row, "id"), require_string_list(row, "outfits")});
  });
  return catalog;
}

Catalog Catalog::load_dir(const std::filesystem::path& dir) {
  return ingest(dir / "items.jsonl", dir / "outfits.jsonl", dir / "users.jsonl");
}

void Catalog::save_dir(const std::filesystem::path& dir) const {
  std::vector<Json> rows;
  for (const auto& item : items_) rows.push_back(item_to_json(item));
  write_jsonl(dir / "items.jsonl", rows);
  rows.clear();
  for (const auto& o : outfits_) rows.push_back(Json{{"id", o.id}, {"items", o.item_ids}});
  write_jsonl(dir / "outfits.jsonl", rows);
  rows.clear();
  for (const auto& u : users_) rows.push_back(Json{{"id", u.id}, {"outfits", u.outfit_ids}});
  write_jsonl(dir / "users.jsonl", rows);
}

void Catalog::add_item(Item item) {
  if (item.id.empty()) throw Error(ErrorCode::kInput, "item id is empty");
  if (item.category.empty()) throw Error(ErrorCode::kInput, "item " + item.id + " has empty category");
  if (item.description.empty()) {
    throw Error(ErrorCode::kInput, "item " + item.id + " has empty description");
  }
  if (item_index_.contains(item.id)) {
    throw Error(ErrorCode::kDuplicateId, "duplicate item id \"" + item.id + "\"");
  }
  item_index_.emplace(item.id, items_.size());
  items_.push_back(std::move(item));
}

void Catalog::add_outfit(Outfit outfit) {
  if (outfit.id.empty()) throw Error(ErrorCode::kInput, "outfit id is empty");
  if (outfit_index_.contains(outfit.id)) {
    throw Error(ErrorCode::kDuplicateId, "duplicate outfit id \"" + outfit.id + "\"");
  }
  if (outfit.item_ids.size() < 2) {
    throw Error(ErrorCode::kInput, "outfit " + outfit.id + " has fewer than 2 items");
  }
  for (std::size_t i = 0; i < outfit.item_ids.size(); ++i) {
    const auto& id = outfit.item_ids[i];
    if (!item_index_.contains(id)) {
      throw Error(ErrorCode::kDanglingReference,
                  "outfit " + outfit.id + " references missing item \"" + id + "\"");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (outfit.item_ids[j] == id) {
        throw Error(ErrorCode::kDuplicateId, "outfit " + outfit.id + " lists item \"" + id + "\" twice");
      }
    }
  }
  const std::size_t index = outfits_.size();
  for (const auto& id : outfit.item_ids) postings_[id].push_back(index);
  outfit_index_.emplace(outfit.id, index);
  outfits_.push_back(std::move(outfit));
}

void Catalog::add_user(UserRecord user) {
  if (user.id.empty()) throw Error(ErrorCode::kInput, "user id is empty");
  if (user_index_.contains(user.id)) {
    throw Error(ErrorCode::kDuplicateId, "duplicate user id \"" + user.id + "\"");
  }
  for (const auto& id : user.outfit_ids) {
    if (!outfit_index_.contains(id)) {
      throw Error(ErrorCode::kDanglingReference,
                  "user " + user.id + " references missing outfit \"" + id + "\"");
    }
  }
  user_index_.emplace(user.id, users_.size());
  users_.push_back(std::move(user));
}

CatalogStats Catalog::stats() const {
  CatalogStats s;
  s.n_items = items_.size();
  s.n_outfits = outfits_.size();
  s.n_users = users_.size();
  std::size_t slots = 0;
  for (const auto& o : outfits_) slots += o.item_ids.size();
  std::size_t links = 0;
  for (const auto& u : users_) links += u.outfit_ids.size();
  s.items_per_outfit = s.n_outfits ? static_cast<double>(slots) / static_cast<double>(s.n_outfits) : 0.0;
  s.outfits_per_user = s.n_users ? static_cast<double>(links) / static_cast<double>(s.n_users) : 0.0;
  return s;
}

const Item& Catalog::item(const ItemId& id) const {
  auto it = item_index_.find(id);
  if (it == item_index_.end()) throw Error(ErrorCode::kNotFound, "unknown item \"" + id + "\"");
  return items_[it->second];
}

const Outfit& Catalog::outfit(const OutfitId& id) const {
  auto it = outfit_index_.find(id);
  if (it == outfit_index_.end()) throw Error(ErrorCode::kNotFound, "unknown outfit \"" + id + "\"");
  return outfits_[it->second];
}

const UserRecord& Catalog::user(const UserId& id) const {
  auto it = user_index_.find(id);
  if (it == user_index_.end()) throw Error(ErrorCode::kNotFound, "unknown user \"" + id + "\"");
  return users_[it->second];
}

std::vector<std::string> Catalog::categories() const {
  std::set<std::string> seen;
  for (const auto& item : items_) seen.insert(item.category);
  return {seen.begin(), seen.end()};
}

std::size_t Catalog::item_interaction_count(const UserId& user_id, const ItemId& item_id) const {
  const UserRecord& u = user(user_id);
  (void)item(item_id);
  std::size_t count = 0;
  for (const auto& oid : u.outfit_ids) {
    const auto& ids = outfit(oid).item_ids;
    if (std::find(ids.begin(), ids.end(), item_id) != ids.end()) ++count;
  }
  return count;
}

std::size_t Catalog::cooccurrence_count(const ItemId& j, const ItemSet& partial) const {
  (void)item(j);
  if (partial.empty()) throw Error(ErrorCode::kInput, "partial outfit is empty");
  for (const auto& p : partial) (void)item(p);

  auto it = postings_.find(j);
  if (it == postings_.end()) return 0;
  std::size_t count = 0;
  for (std::size_t index : it->second) {
    const auto& ids = outfits_[index].item_ids;
    const bool shares = std::any_of(ids.begin(), ids.end(), [&](const ItemId& id) {
      return id != j && partial.contains(id);
    });
    if (shares) ++count;
  }
  return count;
}

ItemSet Catalog::items_cooccurring_in_category(const ItemSet& partial,
                                               const std::string& category) const {
  ItemSet out;
  for (const auto& p : partial) {
    auto it = postings_.find(p);
    if (it == postings_.end()) continue;
    for (std::size_t index : it->second) {
      for (const auto& id : outfits_[index].item_ids) {
        // Sharing an outfit with a member p != id is exactly cooccurrence_count > 0.
        if (id == p || partial.contains(id)) continue;
        if (items_[item_index_.at(id)].category == category) out.insert(id);
      }
    }
  }
  return out;
}

ItemSet Catalog::user_items_in_category(const UserId& user_id, const std::string& category) const {
  ItemSet out;
  for (const auto& oid : user(user_id).outfit_ids) {
    for (const auto& id : outfit(oid).item_ids) {
      if (items_[item_index_.at(id)].category == category) out.insert(id);
    }
  }
  return out;
}

ItemSet Catalog::user_items(const UserId& user_id) const {
  ItemSet out;
  for (const auto& oid : user(user_id).outfit_ids) {
    const auto& ids = outfit(oid).item_ids;
    out.insert(ids.begin(), ids.end());
  }
  return out;
}

std::vector<ScoredItem> Catalog::nearest_items(const EmbeddingVector& query,
                                               const ItemFeatures& features, std::size_t k,
                                               const std::optional<std::string>& category) const {
  if (k == 0) throw Error(ErrorCode::kInput, "k must be >= 1");
  if (query.dim() != features.embedder().dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query dim " + std::to_string(query.dim()) + " does not match configured dim " +
                    std::to_string(features.embedder().dim()));
  }
  std::vector<ScoredItem> scored;
  scored.reserve(items_.size());
  for (const auto& item : items_) {
    if (category && item.category != *category) continue;
    scored.push_back({item.id, cosine(query, features.of(item))});
  }
  auto by_rank = [](const ScoredItem& a, const ScoredItem& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  };
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    by_rank);
  scored.resize(keep);
  return scored;
}

}  // namespace fashionrec
