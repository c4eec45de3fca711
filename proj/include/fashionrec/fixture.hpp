#pragma once

#include <cstdint>
#include <filesystem>

#include "fashionrec/catalog.hpp"

namespace fashionrec {

// Synthetic catalog generator for tests, demos and the determinism run.
struct FixtureConfig {
  std::uint64_t seed = 42;
  std::size_t n_outfits = 200;
  std::size_t n_users = 30;
  std::size_t items_per_category = 40;
  std::size_t min_outfit_size = 3;
  std::size_t max_outfit_size = 5;
  std::size_t min_user_outfits = 10;
  std::size_t max_user_outfits = 25;
  std::size_t image_side = 16;

  void validate() const;
  Json to_json() const;
};

const std::vector<std::string>& fixture_categories();

// Builds the catalog in memory. Image refs point at images/<item id>.ppm.
Catalog make_fixture(const FixtureConfig& config = {});

// Writes items/outfits/users JSONL plus one small PPM per item under dir.
Catalog write_fixture(const std::filesystem::path& dir, const FixtureConfig& config = {});

// Deterministic PPM (P6) bytes for an item.
std::string fixture_image(const Item& item, std::size_t side);

}  // namespace fashionrec
