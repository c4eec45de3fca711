#pragma once

#include <string>
#include <vector>

namespace fashionrec {

using ItemId = std::string;
using OutfitId = std::string;
using UserId = std::string;

struct Item {
  ItemId id;
  std::string category;
  std::string description;
  // File path (relative to the catalog directory) or URL of the item image.
  std::string image_ref;
  // Style tags (color, fit, design, ...) used by the attribute-overlap checks.
  std::vector<std::string> attributes;
};

struct Outfit {
  OutfitId id;
  std::vector<ItemId> item_ids;
};

struct UserRecord {
  UserId id;
  std::vector<OutfitId> outfit_ids;
};

}  // namespace fashionrec
