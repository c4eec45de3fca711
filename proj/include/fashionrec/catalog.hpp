#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "fashionrec/embedding.hpp"
#include "fashionrec/jsonl.hpp"
#include "fashionrec/types.hpp"

namespace fashionrec {

struct CatalogStats {
  std::size_t n_items = 0;
  std::size_t n_outfits = 0;
  double items_per_outfit = 0.0;
  std::size_t n_users = 0;
  double outfits_per_user = 0.0;

  Json to_json() const;
};

using ItemSet = std::set<ItemId>;

struct ScoredItem {
  ItemId id;
  double similarity = 0.0;
};

// In-memory item/outfit/user store with the interaction and co-occurrence
// indexes used by history filtering. Records are added items first, then
// outfits, then users; every add validates references. Once populated the
// catalog is only read, and concurrent reads are safe.
class Catalog {
 public:
  Catalog() = default;

  // Loads items.jsonl, outfits.jsonl and users.jsonl. Errors carry the file
  // and line number.
  static Catalog ingest(const std::filesystem::path& items_path,
                        const std::filesystem::path& outfits_path,
                        const std::filesystem::path& users_path);
  // Same, from a directory holding the three canonical file names.
  static Catalog load_dir(const std::filesystem::path& dir);

  void add_item(Item item);
  void add_outfit(Outfit outfit);
  void add_user(UserRecord user);

  // Writes the three JSONL files in canonical form.
  void save_dir(const std::filesystem::path& dir) const;

  CatalogStats stats() const;

  const std::vector<Item>& items() const { return items_; }
  const std::vector<Outfit>& outfits() const { return outfits_; }
  const std::vector<UserRecord>& users() const { return users_; }

  bool has_item(const ItemId& id) const { return item_index_.contains(id); }
  bool has_user(const UserId& id) const { return user_index_.contains(id); }
  const Item& item(const ItemId& id) const;
  const Outfit& outfit(const OutfitId& id) const;
  const UserRecord& user(const UserId& id) const;
  std::vector<std::string> categories() const;

  // Number of the user's outfits containing the item.
  std::size_t item_interaction_count(const UserId& user, const ItemId& item) const;

  // Outfits containing j and at least one member of P other than j itself.
  std::size_t cooccurrence_count(const ItemId& j, const ItemSet& partial) const;

  // H_c: category-c items sharing an outfit with P, members of P excluded.
  ItemSet items_cooccurring_in_category(const ItemSet& partial, const std::string& category) const;

  // U_c: distinct category-c items across the user's outfits.
  ItemSet user_items_in_category(const UserId& user, const std::string& category) const;

  // Distinct items across all of the user's outfits.
  ItemSet user_items(const UserId& user) const;

  // Top-k by cosine against item features, similarity desc then id asc.
  std::vector<ScoredItem> nearest_items(const EmbeddingVector& query, const ItemFeatures& features,
                                        std::size_t k,
                                        const std::optional<std::string>& category = std::nullopt) const;

  // Directory that relative image refs resolve against (set by load_dir/ingest).
  const std::filesystem::path& base_dir() const { return base_dir_; }
  void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }

 private:
  std::vector<Item> items_;
  std::vector<Outfit> outfits_;
  std::vector<UserRecord> users_;
  std::unordered_map<ItemId, std::size_t> item_index_;
  std::unordered_map<OutfitId, std::size_t> outfit_index_;
  std::unordered_map<UserId, std::size_t> user_index_;
  // item -> indexes of outfits containing it (one entry per outfit).
  std::unordered_map<ItemId, std::vector<std::size_t>> postings_;
  std::filesystem::path base_dir_;
};

Item item_from_json(const Json& row);
Json item_to_json(const Item& item);

}  // namespace fashionrec
