#include "fashionrec/fixture.hpp"

#include <algorithm>
#include <array>

#include "fashionrec/error.hpp"
#include "fashionrec/hashing.hpp"

namespace fashionrec {

namespace {

struct CategorySpec {
  const char* name;
  std::array<const char*, 4> nouns;
};

constexpr std::array<CategorySpec, 6> kCategories{{
    {"top", {"t-shirt", "blouse", "sweater", "tank top"}},
    {"jeans", {"jeans", "denim pants", "denim shorts", "flared jeans"}},
    {"shoes", {"sneakers", "boots", "loafers", "sandals"}},
    {"bag", {"tote", "crossbody bag", "backpack", "clutch"}},
    {"jacket", {"blazer", "bomber jacket", "trench coat", "denim jacket"}},
    {"hat", {"beanie", "bucket hat", "baseball cap", "fedora"}},
}};

constexpr std::array<const char*, 10> kColors{"black", "white", "navy", "beige", "red",
                                               "olive", "grey", "pink", "brown", "blue"};
constexpr std::array<const char*, 6> kFits{"slim-fit", "oversized", "relaxed", "cropped", "tailored", "loose"};
constexpr std::array<const char*, 8> kDesigns{"ribbed", "striped", "plain", "floral",
                                               "quilted", "distressed", "checked", "embroidered"};

struct Rgb {
  std::uint8_t r, g, b;
};

Rgb color_rgb(const std::string& name) {
  static const std::array<std::pair<const char*, Rgb>, 10> table{{
      {"black", {20, 20, 20}},   {"white", {245, 245, 245}}, {"navy", {25, 35, 90}},
      {"beige", {225, 205, 170}}, {"red", {200, 30, 40}},     {"olive", {110, 120, 50}},
      {"grey", {128, 128, 128}}, {"pink", {240, 160, 190}},  {"brown", {120, 75, 40}},
      {"blue", {50, 110, 210}},
  }};
  for (const auto& [n, rgb] : table) {
    if (name == n) return rgb;
  }
  return {128, 128, 128};
}

template <typename Array>
const char* pick(SplitMix64& rng, const Array& values) {
  return values[rng.below(values.size())];
}

// Skewed index: low indexes are much more popular, which makes shared items
// (and alternative pairs) common.
std::size_t popular_index(SplitMix64& rng, std::size_t n) {
  const double u = rng.unit();
  return std::min(n - 1, static_cast<std::size_t>(u * u * static_cast<double>(n)));
}

std::string padded(const char* prefix, std::size_t n, int width) {
  std::string digits = std::to_string(n);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

}  // namespace

void FixtureConfig::validate() const {
  if (n_outfits == 0 || items_per_category == 0) throw Error(ErrorCode::kConfig, "fixture needs outfits and items");
  if (min_outfit_size < 2 || max_outfit_size < min_outfit_size || max_outfit_size > kCategories.size()) {
    throw Error(ErrorCode::kConfig, "outfit size range must lie within [2, 6]");
  }
  if (min_user_outfits > max_user_outfits || max_user_outfits > n_outfits) {
    throw Error(ErrorCode::kConfig, "user outfit range must lie within [0, n_outfits]");
  }
  if (image_side == 0) throw Error(ErrorCode::kConfig, "image_side must be positive");
}

Json FixtureConfig::to_json() const {
  return Json{{"seed", seed},
              {"n_outfits", n_outfits},
              {"n_users", n_users},
              {"items_per_category", items_per_category},
              {"min_outfit_size", min_outfit_size},
              {"max_outfit_size", max_outfit_size},
              {"min_user_outfits", min_user_outfits},
              {"max_user_outfits", max_user_outfits},
              {"image_side", image_side}};
}

const std::vector<std::string>& fixture_categories() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& c : kCategories) out.emplace_back(c.name);
    return out;
  }();
  return names;
}

Catalog make_fixture(const FixtureConfig& config) {
  config.validate();
  SplitMix64 rng(config.seed);
  Catalog catalog;

  std::vector<std::vector<ItemId>> by_category(kCategories.size());
  std::size_t serial = 0;
  for (std::size_t c = 0; c < kCategories.size(); ++c) {
    for (std::size_t k = 0; k < config.items_per_category; ++k) {
      Item item;
      item.id = padded("i", ++serial, 4);
      item.category = kCategories[c].name;
      const std::string color = pick(rng, kColors);
      const std::string fit = pick(rng, kFits);
      const std::string design = pick(rng, kDesigns);
      item.description = color + " " + fit + " " + design + " " + pick(rng, kCategories[c].nouns);
      item.attributes = {color, fit, design};
      item.image_ref = "images/" + item.id + ".ppm";
      by_category[c].push_back(item.id);
      catalog.add_item(std::move(item));
    }
  }

  for (std::size_t o = 0; o < config.n_outfits; ++o) {
    const std::size_t size =
        config.min_outfit_size + rng.below(config.max_outfit_size - config.min_outfit_size + 1);
    std::array<std::size_t, kCategories.size()> order{};
    for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
    for (std::size_t c = 0; c < size; ++c) std::swap(order[c], order[c + rng.below(order.size() - c)]);
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size));
    Outfit outfit;
    outfit.id = padded("o", o + 1, 4);
    for (std::size_t c = 0; c < size; ++c) {
      const auto& pool = by_category[order[c]];
      outfit.item_ids.push_back(pool[popular_index(rng, pool.size())]);
    }
    catalog.add_outfit(std::move(outfit));
  }

  const auto& outfits = catalog.outfits();
  for (std::size_t u = 0; u < config.n_users; ++u) {
    const std::size_t count =
        config.min_user_outfits + rng.below(config.max_user_outfits - config.min_user_outfits + 1);
    std::vector<std::size_t> idx(outfits.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count));
    UserRecord user;
    user.id = padded("u", u + 1, 3);
    for (std::size_t i = 0; i < count; ++i) user.outfit_ids.push_back(outfits[idx[i]].id);
    catalog.add_user(std::move(user));
  }
  return catalog;
}

std::string fixture_image(const Item& item, std::size_t side) {
  const Rgb base = color_rgb(item.attributes.empty() ? "" : item.attributes.front());
  const std::uint64_t h = fnv1a64(item.id);
  std::string header = "P6\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  std::string pixels(side * side * 3, '\0');
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const std::uint64_t bit = (h >> ((x * 7 + y * 13) % 64)) & 1U;
      const int shade = bit ? 18 : -18;
      auto clamp = [&](int v) { return static_cast<char>(static_cast<std::uint8_t>(std::clamp(v + shade, 0, 255))); };
      const std::size_t p = (y * side + x) * 3;
      pixels[p] = clamp(base.r);
      pixels[p + 1] = clamp(base.g);
      pixels[p + 2] = clamp(base.b);
    }
  }
  return header + pixels;
}

Catalog write_fixture(const std::filesystem::path& dir, const FixtureConfig& config) {
  Catalog catalog = make_fixture(config);
  catalog.save_dir(dir);
  for (const auto& item : catalog.items()) write_file(dir / item.image_ref, fixture_image(item, config.image_side));
  catalog.set_base_dir(dir);
  return catalog;
}

}  // namespace fashionrec
