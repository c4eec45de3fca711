#include "fashionrec/tools.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fashionrec/error.hpp"
#include "fashionrec/hashing.hpp"
#include "http_util.hpp"

namespace fashionrec {

Json ToolDescriptor::to_json() const {
  return Json{{"name", name}, {"description", description}, {"inputSchema", input_schema}};
}

namespace {

bool matches_type(const Json& value, const std::string& type) {
  if (type == "string") return value.is_string();
  if (type == "integer") return value.is_number_integer();
  if (type == "number") return value.is_number();
  if (type == "boolean") return value.is_boolean();
  if (type == "array") return value.is_array();
  if (type == "object") return value.is_object();
  if (type == "null") return value.is_null();
  return true;
}

}  // namespace

void check_schema(const Json& schema, const Json& args) {
  if (!args.is_object()) throw Error(ErrorCode::kInput, "arguments must be a JSON object");
  if (auto req = schema.find("required"); req != schema.end()) {
    for (const auto& key : *req) {
      if (!args.contains(key.get<std::string>())) {
        throw Error(ErrorCode::kInput, "missing required argument \"" + key.get<std::string>() + "\"");
      }
    }
  }
  auto props = schema.find("properties");
  if (props == schema.end()) return;
  for (const auto& [key, value] : args.items()) {
    auto prop = props->find(key);
    if (prop == props->end()) {
      if (!schema.value("additionalProperties", true)) {
        throw Error(ErrorCode::kInput, "unexpected argument \"" + key + "\"");
      }
      continue;
    }
    const std::string type = prop->value("type", "");
    if (!type.empty() && !matches_type(value, type)) {
      throw Error(ErrorCode::kInput, "argument \"" + key + "\" must be of type " + type);
    }
    if (type == "array" && prop->contains("items")) {
      const std::string item_type = (*prop)["items"].value("type", "");
      for (const auto& element : value) {
        if (!item_type.empty() && !matches_type(element, item_type)) {
          throw Error(ErrorCode::kInput, "elements of \"" + key + "\" must be of type " + item_type);
        }
      }
    }
    if (type == "integer" && prop->contains("minimum") && value.get<long long>() < (*prop)["minimum"].get<long long>()) {
      throw Error(ErrorCode::kInput, "argument \"" + key + "\" is below its minimum");
    }
  }
}

void ToolRegistry::add(ToolDescriptor descriptor, Handler handler) {
  const std::string name = descriptor.name;
  if (!tools_.emplace(name, Entry{std::move(descriptor), std::move(handler)}).second) {
    throw Error(ErrorCode::kDuplicateId, "tool \"" + name + "\" registered twice");
  }
}

std::vector<ToolDescriptor> ToolRegistry::list_tools() const {
  std::vector<ToolDescriptor> out;
  for (const auto& [name, entry] : tools_) out.push_back(entry.descriptor);
  return out;
}

Json ToolRegistry::call_tool(const std::string& name, const Json& args) const {
  auto it = tools_.find(name);
  if (it == tools_.end()) throw Error(ErrorCode::kNotFound, "unknown tool \"" + name + "\"");
  check_schema(it->second.descriptor.input_schema, args);
  return it->second.handler(args);
}

namespace {

Json rpc_error(const Json& id, int code, const std::string& message) {
  return Json{{"jsonrpc", "2.0"}, {"id", id}, {"error", Json{{"code", code}, {"message", message}}}};
}

Json rpc_result(const Json& id, Json result) {
  return Json{{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}};
}

}  // namespace

std::optional<Json> handle_jsonrpc(const ToolRegistry& registry, const Json& request) {
  if (!request.is_object()) return rpc_error(nullptr, jsonrpc::kInvalidRequest, "request must be a JSON object");
  const bool has_id = request.contains("id");
  const Json id = has_id ? request["id"] : Json(nullptr);
  const bool id_ok = !has_id || id.is_string() || id.is_number_integer() || id.is_null();
  if (!id_ok || request.value("jsonrpc", "") != "2.0" || !request.contains("method") ||
      !request["method"].is_string()) {
    return rpc_error(id_ok ? id : Json(nullptr), jsonrpc::kInvalidRequest,
                     "request needs jsonrpc \"2.0\", an id and a string method");
  }
  if (!has_id) return std::nullopt;  // notification, e.g. notifications/initialized

  const std::string method = request["method"].get<std::string>();
  const Json params = request.value("params", Json::object());
  if (method == "initialize") {
    return rpc_result(id, Json{{"protocolVersion", kProtocolVersion},
                               {"capabilities", Json{{"tools", Json::object()}}},
                               {"serverInfo", Json{{"name", "fashionrec"}, {"version", "0.1.0"}}}});
  }
  if (method == "tools/list") {
    Json tools = Json::array();
    for (const auto& t : registry.list_tools()) tools.push_back(t.to_json());
    return rpc_result(id, Json{{"tools", tools}});
  }
  if (method == "tools/call") {
    if (!params.is_object() || !params.contains("name") || !params["name"].is_string()) {
      return rpc_error(id, jsonrpc::kInvalidParams, "tools/call needs a string \"name\"");
    }
    const std::string name = params["name"].get<std::string>();
    if (!registry.contains(name)) return rpc_error(id, jsonrpc::kMethodNotFound, "unknown tool \"" + name + "\"");
    const Json args = params.value("arguments", Json::object());
    try {
      Json outcome = registry.call_tool(name, args);
      return rpc_result(id, Json{{"content", Json::array({Json{{"type", "text"}, {"text", outcome.dump()}}})},
                                 {"structuredContent", outcome},
                                 {"isError", false}});
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInput) return rpc_error(id, jsonrpc::kInvalidParams, e.what());
      return rpc_result(id, Json{{"content", Json::array({Json{{"type", "text"}, {"text", e.what()}}})},
                                 {"isError", true}});
    } catch (const std::exception& e) {
      return rpc_error(id, jsonrpc::kInternalError, e.what());
    }
  }
  return rpc_error(id, jsonrpc::kMethodNotFound, "method \"" + method + "\" not found");
}

std::string handle_jsonrpc_text(const ToolRegistry& registry, const std::string& body) {
  Json request = Json::parse(body, nullptr, false);
  if (request.is_discarded()) return rpc_error(nullptr, jsonrpc::kParseError, "parse error").dump();
  auto response = handle_jsonrpc(registry, request);
  return response ? response->dump() : std::string();
}

ImageStore::ImageStore(std::filesystem::path work_dir, std::filesystem::path catalog_dir)
    : work_dir_(std::move(work_dir)), catalog_dir_(std::move(catalog_dir)) {}

std::optional<std::filesystem::path> ImageStore::resolve(const std::string& ref) const {
  if (ref.empty() || ref.rfind("http://", 0) == 0 || ref.rfind("https://", 0) == 0) return std::nullopt;
  const std::filesystem::path path(ref);
  for (const auto& part : path) {
    if (part == "..") return std::nullopt;
  }
  std::error_code ec;
  for (const auto& root : {work_dir_, catalog_dir_}) {
    if (path.is_absolute()) {
      const auto rel = path.lexically_relative(root);
      if (rel.empty() || *rel.begin() == "..") continue;
    }
    const auto candidate = path.is_absolute() ? path : root / path;
    if (std::filesystem::is_regular_file(candidate, ec)) return candidate;
  }
  return std::nullopt;
}

std::string ImageStore::read(const std::string& ref) const {
  auto path = resolve(ref);
  if (!path) throw Error(ErrorCode::kInput, "unreadable image reference \"" + ref + "\"");
  return read_file(*path);
}

std::string ImageStore::save_upload(const std::string& bytes, const std::string& extension) const {
  const std::string ref = "uploads/upload-" + hex64(fnv1a64(bytes)) + "." + extension;
  const auto path = work_dir_ / ref;
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) write_file(path, bytes);
  return ref;
}

std::string ImageStore::save_generated(const std::string& name, const std::string& bytes) const {
  const std::string ref = "generated/" + name;
  write_file(work_dir_ / ref, bytes);
  return ref;
}

Json RecommendContext::to_json() const {
  return Json{{"query", query},
              {"context_items", context_items},
              {"context_images", context_images},
              {"preference_summary", preference_summary},
              {"categories", categories},
              {"replace", replace},
              {"exclude", exclude}};
}

RecommendContext RecommendContext::from_json(const Json& args) {
  RecommendContext c;
  c.query = args.value("query", std::string());
  c.context_items = args.value("context_items", std::vector<std::string>{});
  c.context_images = args.value("context_images", std::vector<std::string>{});
  c.preference_summary = args.value("preference_summary", std::string());
  c.categories = args.value("categories", std::vector<std::string>{});
  c.replace = args.value("replace", false);
  c.exclude = args.value("exclude", std::vector<std::string>{});
  return c;
}

Json Recommendation::to_json() const {
  return Json{{"item_id", item_id}, {"category", category}, {"text", text}};
}

Recommendation Recommendation::from_json(const Json& row) {
  try {
    return Recommendation{row.at("item_id").get<std::string>(), row.at("category").get<std::string>(),
                          row.at("text").get<std::string>()};
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed recommendation: ") + e.what(), row.dump());
  }
}

StubRecommender::StubRecommender(const Catalog& catalog, std::shared_ptr<const ItemFeatures> features)
    : catalog_(catalog), features_(std::move(features)) {}

namespace {

std::string describe_items(const Catalog& catalog, const std::vector<ItemId>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += i + 1 == ids.size() ? " and " : ", ";
    out += catalog.item(ids[i]).description;
  }
  return out;
}

}  // namespace

Recommendation StubRecommender::recommend(const RecommendContext& ctx) const {
  if (catalog_.items().empty()) throw Error(ErrorCode::kInput, "cannot recommend from an empty catalog");

  std::vector<ItemId> known;
  for (const auto& id : ctx.context_items) {
    if (catalog_.has_item(id)) known.push_back(id);
  }
  std::set<std::string> present;
  for (const auto& id : known) present.insert(catalog_.item(id).category);
  const std::set<std::string> wanted(ctx.categories.begin(), ctx.categories.end());
  std::set<ItemId> blocked(known.begin(), known.end());
  blocked.insert(ctx.exclude.begin(), ctx.exclude.end());

  auto eligible = [&](const Item& item, bool strict) {
    if (blocked.contains(item.id)) return false;
    if (!strict) return true;
    // An explicit category request wins over "not yet in the outfit".
    if (!wanted.empty()) return wanted.contains(item.category);
    return !ctx.replace && !present.contains(item.category);
  };

  // Anchor: mean of the context features, or the query text when there is no context.
  std::vector<double> acc(features_->embedder().dim(), 0.0);
  std::size_t parts = 0;
  auto add = [&](const EmbeddingVector& v) {
    for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += v[d];
    ++parts;
  };
  for (const auto& id : known) add(features_->of(catalog_.item(id)));
  for (const auto& ref : ctx.context_images) add(features_->embedder().embed_image(ref));
  EmbeddingVector anchor;
  bool have_anchor = false;
  if (parts > 0) {
    for (auto& v : acc) v /= static_cast<double>(parts);
    if (std::any_of(acc.begin(), acc.end(), [](double v) { return v != 0.0; })) {
      anchor = EmbeddingVector(std::move(acc));
      have_anchor = true;
    }
  }
  if (!have_anchor) anchor = features_->embedder().embed_text(ctx.query.empty() ? "outfit" : ctx.query);

  const Item* best = nullptr;
  double best_sim = 0.0;
  for (bool strict : {true, false}) {
    for (const auto& item : catalog_.items()) {
      if (!eligible(item, strict)) continue;
      const double sim = cosine(anchor, features_->of(item));
      if (!best || sim > best_sim || (sim == best_sim && item.id < best->id)) {
        best = &item;
        best_sim = sim;
      }
    }
    if (best) break;
  }
  if (!best) throw Error(ErrorCode::kInput, "no catalog item left to recommend");

  Recommendation rec;
  rec.item_id = best->id;
  rec.category = best->category;
  rec.text = "I recommend the " + best->description + " (" + best->category + ", item " + best->id + ").";
  std::vector<ItemId> replaced, kept;
  for (const auto& id : known) {
    (ctx.replace && catalog_.item(id).category == best->category ? replaced : kept).push_back(id);
  }
  if (!replaced.empty()) {
    rec.text.pop_back();
    rec.text += " instead of the " + describe_items(catalog_, replaced) + ".";
  }
  if (!kept.empty()) rec.text += " It complements the " + describe_items(catalog_, kept) + ".";
  if (!ctx.preference_summary.empty()) rec.text += " It also suits your profile (" + ctx.preference_summary + ").";
  return rec;
}

HttpRecommender::HttpRecommender(std::string endpoint) : endpoint_(std::move(endpoint)) {}

Recommendation HttpRecommender::recommend(const RecommendContext& context) const {
  const std::string raw = detail::post_json(endpoint_, "/recommend", context.to_json());
  Json row = Json::parse(raw, nullptr, false);
  if (row.is_discarded()) throw ParseError("recommender returned malformed JSON", raw);
  return Recommendation::from_json(row);
}

StubImageGenerator::StubImageGenerator(const Catalog& catalog, std::shared_ptr<const ItemFeatures> features)
    : catalog_(catalog), features_(std::move(features)) {}

std::string StubImageGenerator::generate(const std::string& description, const std::optional<ItemId>& item) const {
  if (item && catalog_.has_item(*item)) return catalog_.item(*item).image_ref;
  const auto hits = catalog_.nearest_items(features_->embedder().embed_text(description), *features_, 1);
  if (hits.empty()) throw Error(ErrorCode::kInput, "cannot generate an image from an empty catalog");
  return catalog_.item(hits.front().id).image_ref;
}

HttpImageGenerator::HttpImageGenerator(std::string endpoint) : endpoint_(std::move(endpoint)) {}

std::string HttpImageGenerator::generate(const std::string& description, const std::optional<ItemId>& item) const {
  Json body{{"description", description}};
  if (item) body["item_id"] = *item;
  const std::string raw = detail::post_json(endpoint_, "/generate", body);
  Json row = Json::parse(raw, nullptr, false);
  if (row.is_discarded() || !row.contains("image_ref") || !row["image_ref"].is_string()) {
    throw ParseError("image generator returned no image_ref", raw);
  }
  return row["image_ref"].get<std::string>();
}

namespace {

struct Raster {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> rgb;  // width * height * 3
};

// Binary PPM (P6, maxval <= 255). Returns nullopt for anything else.
std::optional<Raster> decode_ppm(const std::string& bytes) {
  std::size_t pos = 0;
  auto token = [&]() -> std::optional<std::string> {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos == start) return std::nullopt;
    return bytes.substr(start, pos - start);
  };
  auto magic = token();
  if (!magic || *magic != "P6") return std::nullopt;
  auto w = token(), h = token(), maxval = token();
  if (!w || !h || !maxval) return std::nullopt;
  Raster r;
  try {
    r.width = std::stoi(*w);
    r.height = std::stoi(*h);
    if (std::stoi(*maxval) != 255) return std::nullopt;
  } catch (const std::exception&) {
    return std::nullopt;
  }
  ++pos;  // single whitespace byte before the raster
  const std::size_t need = static_cast<std::size_t>(r.width) * static_cast<std::size_t>(r.height) * 3;
  if (r.width <= 0 || r.height <= 0 || bytes.size() < pos + need) return std::nullopt;
  r.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
               bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return r;
}

void paint(Raster& canvas, int x0, int y0, int w, int h, const std::string& bytes) {
  const auto source = decode_ppm(bytes);
  const std::uint64_t hash = fnv1a64(bytes);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      unsigned char px[3];
      if (source) {
        const int sx = x * source->width / w;
        const int sy = y * source->height / h;
        const std::size_t at = (static_cast<std::size_t>(sy) * source->width + sx) * 3;
        std::copy_n(source->rgb.begin() + static_cast<std::ptrdiff_t>(at), 3, px);
      } else {
        px[0] = static_cast<unsigned char>(hash >> 16);
        px[1] = static_cast<unsigned char>(hash >> 8);
        px[2] = static_cast<unsigned char>(hash);
      }
      const std::size_t at = (static_cast<std::size_t>(y0 + y) * canvas.width + (x0 + x)) * 3;
      std::copy_n(px, 3, canvas.rgb.begin() + static_cast<std::ptrdiff_t>(at));
    }
  }
}

}  // namespace

StubTryOn::StubTryOn(const ImageStore& images) : images_(images) {}

std::string StubTryOn::try_on(const std::optional<std::string>& person_ref,
                              const std::vector<std::string>& item_refs) const {
  if (item_refs.empty()) throw Error(ErrorCode::kInput, "try-on needs at least one item image");
  std::vector<std::string> items;
  for (const auto& ref : item_refs) items.push_back(images_.read(ref));
  std::optional<std::string> person;
  if (person_ref) person = images_.read(*person_ref);

  Raster canvas;
  canvas.width = canvas.height = kCanvasSize;
  canvas.rgb.assign(static_cast<std::size_t>(kCanvasSize) * kCanvasSize * 3, 238);
  if (person) paint(canvas, 0, 0, kCanvasSize, kCanvasSize, *person);

  const int n = static_cast<int>(items.size());
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int rows = (n + cols - 1) / cols;
  const int cell_w = kCanvasSize / cols;
  const int cell_h = kCanvasSize / rows;
  constexpr int kPad = 8;
  std::uint64_t digest = fnv1a64(person ? *person : std::string("-"));
  for (int i = 0; i < n; ++i) {
    const int x0 = (i % cols) * cell_w + kPad;
    const int y0 = (i / cols) * cell_h + kPad;
    paint(canvas, x0, y0, cell_w - 2 * kPad, cell_h - 2 * kPad, items[static_cast<std::size_t>(i)]);
    digest = fnv1a64(items[static_cast<std::size_t>(i)], digest ^ 0x9e3779b97f4a7c15ULL);
  }

  std::string out = "P6\n" + std::to_string(kCanvasSize) + " " + std::to_string(kCanvasSize) + "\n255\n";
  out.append(reinterpret_cast<const char*>(canvas.rgb.data()), canvas.rgb.size());
  return images_.save_generated("tryon-" + hex64(digest) + ".ppm", out);
}

namespace {

Json schema(Json properties, std::vector<std::string> required) {
  return Json{{"type", "object"}, {"properties", std::move(properties)}, {"required", std::move(required)}};
}

Json string_array() { return Json{{"type", "array"}, {"items", Json{{"type", "string"}}}}; }

}  // namespace

ToolRegistry make_tool_registry(const Catalog& catalog, std::shared_ptr<const ItemFeatures> features,
                                ToolBackends backends) {
  ToolRegistry registry;
  const auto recommender = backends.recommender;
  const auto generator = backends.image_generator;
  const auto try_on = backends.try_on;

  registry.add(
      ToolDescriptor{"recommend",
                     "Recommend one catalog item that completes or modifies the user's outfit, given the "
                     "conversation query, the outfit items and the user's preference summary.",
                     schema(Json{{"query", Json{{"type", "string"}}},
                                 {"context_items", string_array()},
                                 {"context_images", string_array()},
                                 {"preference_summary", Json{{"type", "string"}}},
                                 {"categories", string_array()},
                                 {"replace", Json{{"type", "boolean"}}},
                                 {"exclude", string_array()}},
                            {"query"})},
      [recommender](const Json& args) { return recommender->recommend(RecommendContext::from_json(args)).to_json(); });

  registry.add(ToolDescriptor{"generate_image", "Generate a product image for an item description.",
                              schema(Json{{"description", Json{{"type", "string"}}},
                                          {"item_id", Json{{"type", "string"}}}},
                                     {"description"})},
               [generator](const Json& args) {
                 std::optional<ItemId> item;
                 if (args.contains("item_id")) item = args["item_id"].get<std::string>();
                 return Json{{"image_ref", generator->generate(args["description"].get<std::string>(), item)}};
               });

  registry.add(
      ToolDescriptor{"retrieve_similar",
                     "Find the k catalog items most similar to an item, an image or a text query, optionally "
                     "within one category.",
                     schema(Json{{"item_id", Json{{"type", "string"}}},
                                 {"image_ref", Json{{"type", "string"}}},
                                 {"query_text", Json{{"type", "string"}}},
                                 {"category", Json{{"type", "string"}}},
                                 {"k", Json{{"type", "integer"}, {"minimum", 1}}}},
                            {"k"})},
      [&catalog, features](const Json& args) {
        std::optional<EmbeddingVector> query;
        std::set<ItemId> skip;
        if (args.contains("item_id")) {
          const Item& item = catalog.item(args["item_id"].get<std::string>());
          query = features->of(item);
          skip.insert(item.id);
        } else if (args.contains("image_ref")) {
          query = features->embedder().embed_image(args["image_ref"].get<std::string>());
        } else if (args.contains("query_text")) {
          query = features->embedder().embed_text(args["query_text"].get<std::string>());
        } else {
          throw Error(ErrorCode::kInput, "retrieve_similar needs item_id, image_ref or query_text");
        }
        std::optional<std::string> category;
        if (args.contains("category")) category = args["category"].get<std::string>();
        const auto k = args["k"].get<std::size_t>();
        Json results = Json::array();
        for (const auto& hit : catalog.nearest_items(*query, *features, k + skip.size(), category)) {
          if (skip.contains(hit.id) || results.size() == k) continue;
          results.push_back(Json{{"id", hit.id},
                                 {"similarity", hit.similarity},
                                 {"image_ref", catalog.item(hit.id).image_ref},
                                 {"description", catalog.item(hit.id).description}});
        }
        return Json{{"results", results}};
      });

  registry.add(ToolDescriptor{"try_on", "Render a virtual try-on composite of the given item images.",
                              schema(Json{{"person_ref", Json{{"type", "string"}}}, {"item_refs", string_array()}},
                                     {"item_refs"})},
               [try_on](const Json& args) {
                 std::optional<std::string> person;
                 if (args.contains("person_ref")) person = args["person_ref"].get<std::string>();
                 return Json{{"image_ref", try_on->try_on(person, args["item_refs"].get<std::vector<std::string>>())}};
               });
  return registry;
}

}  // namespace fashionrec
