#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "fashionrec/hashing.hpp"
#include "fashionrec/tools.hpp"
#include "test_support.hpp"

namespace fashionrec {
namespace {

using testing::fixture_catalog;
using testing::mock_features;
using testing::TempDir;
using testing::throws_code;

struct ToolRig {
  TempDir work;
  std::shared_ptr<ItemFeatures> features = mock_features();
  Catalog catalog;
  std::unique_ptr<ImageStore> images;
  ToolRegistry registry;

  ToolRig() {
    catalog = write_fixture(work / "catalog", FixtureConfig{.n_outfits = 40, .n_users = 5, .items_per_category = 10,
                                                           .min_user_outfits = 3, .max_user_outfits = 6});
    images = std::make_unique<ImageStore>(work / "work", work / "catalog");
    registry = make_tool_registry(
        catalog, features,
        ToolBackends{std::make_shared<StubRecommender>(catalog, features),
                     std::make_shared<StubImageGenerator>(catalog, features), std::make_shared<StubTryOn>(*images)});
  }

  Json rpc(const Json& request) const {
    auto r = handle_jsonrpc(registry, request);
    return r ? *r : Json();
  }
  Json call(const std::string& tool, const Json& args, int id = 1) const {
    return rpc(Json{{"jsonrpc", "2.0"}, {"id", id}, {"method", "tools/call"},
                    {"params", Json{{"name", tool}, {"arguments", args}}}});
  }
};

TEST(Schema, RequiredTypesAndMinimum) {
  const Json schema = Json::parse(R"({"type":"object","required":["k"],"properties":{
      "k":{"type":"integer","minimum":1},"tags":{"type":"array","items":{"type":"string"}}}})");
  EXPECT_NO_THROW(check_schema(schema, Json{{"k", 2}, {"extra", true}}));
  EXPECT_TRUE(throws_code([&] { check_schema(schema, Json::object()); }, ErrorCode::kInput));
  EXPECT_TRUE(throws_code([&] { check_schema(schema, Json{{"k", "2"}}); }, ErrorCode::kInput));
  EXPECT_TRUE(throws_code([&] { check_schema(schema, Json{{"k", 0}}); }, ErrorCode::kInput));
  EXPECT_TRUE(throws_code([&] { check_schema(schema, Json{{"k", 1}, {"tags", {"a", 3}}}); }, ErrorCode::kInput));
  EXPECT_TRUE(throws_code([&] { check_schema(schema, Json::array()); }, ErrorCode::kInput));
}

TEST(Registry, DuplicateAndUnknown) {
  ToolRegistry r;
  r.add(ToolDescriptor{"echo", "", Json{{"type", "object"}}}, [](const Json& a) { return a; });
  EXPECT_TRUE(throws_code([&] { r.add(ToolDescriptor{"echo", "", Json::object()}, [](const Json& a) { return a; }); },
                          ErrorCode::kDuplicateId));
  EXPECT_TRUE(throws_code([&] { r.call_tool("nope", Json::object()); }, ErrorCode::kNotFound));
  EXPECT_EQ(r.call_tool("echo", Json{{"x", 1}}), (Json{{"x", 1}}));
}

TEST(JsonRpc, InitializeAndList) {
  ToolRig rig;
  const Json init = rig.rpc(Json{{"jsonrpc", "2.0"}, {"id", 0}, {"method", "initialize"}});
  EXPECT_EQ(init["result"]["protocolVersion"], kProtocolVersion);
  const Json list = rig.rpc(Json{{"jsonrpc", "2.0"}, {"id", "a"}, {"method", "tools/list"}});
  EXPECT_EQ(list["id"], "a");
  std::vector<std::string> names;
  for (const auto& t : list["result"]["tools"]) {
    names.push_back(t["name"]);
    EXPECT_EQ(t["inputSchema"]["type"], "object");
    EXPECT_FALSE(t["description"].get<std::string>().empty());
  }
  EXPECT_EQ(names, (std::vector<std::string>{"generate_image", "recommend", "retrieve_similar", "try_on"}));
}

TEST(JsonRpc, ErrorCodes) {
  ToolRig rig;
  const Json parse = Json::parse(handle_jsonrpc_text(rig.registry, "{not json"));
  EXPECT_EQ(parse["error"]["code"], jsonrpc::kParseError);
  EXPECT_TRUE(parse["id"].is_null());

  EXPECT_EQ(rig.rpc(Json{{"id", 1}, {"method", "tools/list"}})["error"]["code"], jsonrpc::kInvalidRequest);
  EXPECT_EQ(rig.rpc(Json::array())["error"]["code"], jsonrpc::kInvalidRequest);
  EXPECT_EQ(rig.rpc(Json{{"jsonrpc", "2.0"}, {"id", 2}, {"method", 7}})["error"]["code"], jsonrpc::kInvalidRequest);
  EXPECT_EQ(rig.rpc(Json{{"jsonrpc", "2.0"}, {"id", 3}, {"method", "bogus"}})["error"]["code"],
            jsonrpc::kMethodNotFound);
  EXPECT_EQ(rig.call("no_such_tool", Json::object())["error"]["code"], jsonrpc::kMethodNotFound);
  EXPECT_EQ(rig.call("retrieve_similar", Json{{"k", "three"}})["error"]["code"], jsonrpc::kInvalidParams);
  EXPECT_EQ(rig.rpc(Json{{"jsonrpc", "2.0"}, {"id", 4}, {"method", "tools/call"}, {"params", Json::object()}})
                ["error"]["code"],
            jsonrpc::kInvalidParams);

  const Json failed = rig.call("retrieve_similar", Json{{"item_id", "zzz"}, {"k", 2}});
  EXPECT_TRUE(failed["result"]["isError"].get<bool>());
}

TEST(JsonRpc, NotificationGetsNoResponse) {
  ToolRig rig;
  EXPECT_FALSE(handle_jsonrpc(rig.registry, Json{{"jsonrpc", "2.0"}, {"method", "notifications/initialized"}}));
  EXPECT_EQ(handle_jsonrpc_text(rig.registry, R"({"jsonrpc":"2.0","method":"tools/list"})"), "");
}

TEST(RetrieveSimilar, MatchesBruteForceRanking) {
  ToolRig rig;
  for (const auto& probe : {rig.catalog.items()[0], rig.catalog.items()[17], rig.catalog.items()[41]}) {
    const Json out = rig.call("retrieve_similar", Json{{"item_id", probe.id}, {"category", "shoes"}, {"k", 4}});
    const auto& results = out["result"]["structuredContent"]["results"];
    std::vector<std::pair<double, std::string>> expected;
    for (const auto& item : rig.catalog.items()) {
      if (item.category != "shoes" || item.id == probe.id) continue;
      expected.emplace_back(-cosine(rig.features->of(probe), rig.features->of(item)), item.id);
    }
    std::sort(expected.begin(), expected.end());
    ASSERT_EQ(results.size(), 4U);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(results[i]["id"], expected[i].second);
      EXPECT_NEAR(results[i]["similarity"].get<double>(), -expected[i].first, 1e-12);
    }
  }
}

TEST(RetrieveSimilar, TextAndImageQueries) {
  ToolRig rig;
  const Json text = rig.call("retrieve_similar", Json{{"query_text", "black jeans"}, {"k", 2}});
  EXPECT_EQ(text["result"]["structuredContent"]["results"].size(), 2U);
  const Item& first = rig.catalog.items()[3];
  const Json image = rig.call("retrieve_similar", Json{{"image_ref", first.image_ref}, {"k", 1}});
  EXPECT_FALSE(image["result"]["structuredContent"]["results"].empty());
  EXPECT_EQ(rig.call("retrieve_similar", Json{{"k", 1}})["error"]["code"], jsonrpc::kInvalidParams);
}

TEST(StubRecommender, PicksNearestToContextMean) {
  ToolRig rig;
  const Outfit& outfit = rig.catalog.outfits().front();
  RecommendContext ctx;
  ctx.query = "finish this look";
  ctx.context_items = {outfit.item_ids[0], outfit.item_ids[1]};
  const StubRecommender rec(rig.catalog, rig.features);
  const auto got = rec.recommend(ctx);

  std::set<std::string> present;
  std::vector<double> mean(64, 0.0);
  for (const auto& id : ctx.context_items) {
    present.insert(rig.catalog.item(id).category);
    const auto& f = rig.features->of(rig.catalog.item(id));
    for (std::size_t d = 0; d < 64; ++d) mean[d] += f[d] / 2.0;
  }
  const EmbeddingVector anchor(mean);
  std::string best;
  double best_sim = -2;
  for (const auto& item : rig.catalog.items()) {
    if (present.contains(item.category)) continue;
    const double s = cosine(anchor, rig.features->of(item));
    if (s > best_sim) {
      best_sim = s;
      best = item.id;
    }
  }
  EXPECT_EQ(got.item_id, best);
  EXPECT_EQ(rec.recommend(ctx).text, got.text);
  EXPECT_NE(got.text.find(best), std::string::npos);
}

TEST(StubRecommender, HonoursCategoriesExcludeAndReplace) {
  ToolRig rig;
  const Outfit& outfit = rig.catalog.outfits().front();
  const StubRecommender rec(rig.catalog, rig.features);
  RecommendContext ctx;
  ctx.query = "q";
  ctx.context_items = outfit.item_ids;
  ctx.categories = {"hat"};
  const auto first = rec.recommend(ctx);
  EXPECT_EQ(first.category, "hat");
  ctx.exclude = {first.item_id};
  EXPECT_NE(rec.recommend(ctx).item_id, first.item_id);

  RecommendContext swap;
  swap.query = "q";
  swap.context_items = outfit.item_ids;
  const std::string cat = rig.catalog.item(outfit.item_ids[0]).category;
  swap.categories = {cat};
  swap.replace = true;
  const auto replaced = rec.recommend(swap);
  EXPECT_EQ(replaced.category, cat);
  EXPECT_NE(replaced.text.find("instead of"), std::string::npos);
  EXPECT_EQ(std::count(outfit.item_ids.begin(), outfit.item_ids.end(), replaced.item_id), 0);
}

TEST(TryOn, DeterministicCanvas) {
  ToolRig rig;
  const std::vector<std::string> refs{rig.catalog.items()[0].image_ref, rig.catalog.items()[12].image_ref};
  const StubTryOn t(*rig.images);
  const std::string a = t.try_on(std::nullopt, refs);
  const std::string b = t.try_on(std::nullopt, refs);
  EXPECT_EQ(a, b);
  const std::string bytes = rig.images->read(a);
  EXPECT_EQ(bytes.rfind("P6\n512 512\n255\n", 0), 0U);
  EXPECT_EQ(bytes.size(), std::string("P6\n512 512\n255\n").size() + 512U * 512U * 3U);
  EXPECT_TRUE(throws_code([&] { t.try_on(std::nullopt, {}); }, ErrorCode::kInput));
  EXPECT_EQ(rig.call("try_on", Json{{"item_refs", Json::array()}})["error"]["code"], jsonrpc::kInvalidParams);
}

TEST(ImageStore, ResolvesInsideRootsOnly) {
  ToolRig rig;
  const std::string ref = rig.catalog.items()[0].image_ref;
  EXPECT_TRUE(rig.images->resolve(ref).has_value());
  EXPECT_FALSE(rig.images->resolve("../" + ref).has_value());
  EXPECT_FALSE(rig.images->resolve("images/../" + ref).has_value());
  EXPECT_FALSE(rig.images->resolve("/etc/passwd").has_value());
  EXPECT_FALSE(rig.images->resolve("https://example.com/x.png").has_value());
  EXPECT_TRUE(rig.images->resolve((rig.work / "catalog" / ref).string()).has_value());
  EXPECT_TRUE(throws_code([&] { rig.images->read("missing.png"); }, ErrorCode::kInput));

  const std::string up = rig.images->save_upload("abc", "png");
  EXPECT_EQ(up, rig.images->save_upload("abc", "png"));
  EXPECT_EQ(rig.images->read(up), "abc");
  EXPECT_EQ(rig.images->read(rig.images->save_generated("g.bin", "xyz")), "xyz");
}

TEST(GenerateImage, StubReturnsCatalogImagery) {
  ToolRig rig;
  const Item& item = rig.catalog.items()[5];
  const Json out = rig.call("generate_image", Json{{"description", item.description}, {"item_id", item.id}});
  EXPECT_EQ(out["result"]["structuredContent"]["image_ref"], item.image_ref);
  const Json free = rig.call("generate_image", Json{{"description", "a red tote"}});
  EXPECT_TRUE(rig.images->resolve(free["result"]["structuredContent"]["image_ref"]).has_value());
}

}  // namespace
}  // namespace fashionrec
