#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "fashionrec/jsonl.hpp"
#include "test_support.hpp"

namespace fashionrec {
namespace {

using testing::TempDir;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), {"--log-level", "off"});
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return CliRun{code, out.str(), err.str()};
}

std::string small(const TempDir& dir) {
  const std::string path = (dir / "catalog").string();
  const CliRun r = run({"make-fixture", "--out", path, "--outfits", "60", "--users", "8", "--items-per-category", "12"});
  EXPECT_EQ(r.code, cli::kOk) << r.err;
  return path;
}

std::string slurp(const std::filesystem::path& p) { return read_file(p); }

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, cli::kIoOrConfig);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kIoOrConfig);
  const CliRun missing = run({"build-dataset"});
  EXPECT_EQ(missing.code, cli::kIoOrConfig);
  EXPECT_NE(missing.err.find("--catalog"), std::string::npos);
  EXPECT_EQ(run({"build-dataset", "--catalog", "x", "--out", "y", "--task", "nope"}).code, cli::kIoOrConfig);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
}

TEST(Cli, MissingFilesExitTwo) {
  TempDir dir;
  EXPECT_EQ(run({"ingest", "--catalog", (dir / "absent").string()}).code, cli::kIoOrConfig);
  EXPECT_EQ(run({"--config", (dir / "none.json").string(), "ingest", "--catalog", "x"}).code, cli::kIoOrConfig);
}

TEST(Cli, IngestReportsStatsAndDanglingRefs) {
  TempDir dir;
  const std::string catalog = small(dir);
  const CliRun ok = run({"ingest", "--catalog", catalog, "--out", (dir / "copy").string()});
  ASSERT_EQ(ok.code, cli::kOk) << ok.err;
  EXPECT_EQ(Json::parse(ok.out)["stats"]["n_outfits"], 60);
  EXPECT_EQ(slurp(dir / "copy" / "items.jsonl"), slurp(std::filesystem::path(catalog) / "items.jsonl"));

  std::string outfits = slurp(std::filesystem::path(catalog) / "outfits.jsonl");
  outfits += R"({"id":"o9999","items":["i0001","i9999"]})" "\n";
  write_file(std::filesystem::path(catalog) / "outfits.jsonl", outfits);
  const CliRun bad = run({"ingest", "--catalog", catalog});
  EXPECT_EQ(bad.code, cli::kValidationFailure);
  EXPECT_NE(bad.err.find("i9999"), std::string::npos);
}

TEST(Cli, ConfigFilePrecedence) {
  TempDir dir;
  const std::string catalog = small(dir);
  write_file(dir / "cfg.json", Json{{"catalog", catalog},
                                    {"seed", 1},
                                    {"build-dataset", Json{{"seed", 2}, {"task", "basic"}, {"dim", 32}}}}
                                   .dump());
  const auto cfg = (dir / "cfg.json").string();
  auto manifest_seed = [&](const std::string& out) {
    return read_json(std::filesystem::path(out) / "split.json")[0]["seed"].get<long long>();
  };
  const std::string a = (dir / "a").string(), b = (dir / "b").string();
  ASSERT_EQ(run({"--config", cfg, "build-dataset", "--out", a}).code, cli::kOk);
  EXPECT_EQ(manifest_seed(a), 2);
  ASSERT_EQ(run({"--config", cfg, "build-dataset", "--out", b, "--seed", "3"}).code, cli::kOk);
  EXPECT_EQ(manifest_seed(b), 3);
  EXPECT_FALSE(std::filesystem::exists(std::filesystem::path(a) / "personalized.jsonl"));

  write_file(dir / "bad.json", R"({"build-dataset":{"seed":"seven"}})");
  EXPECT_EQ(run({"--config", (dir / "bad.json").string(), "build-dataset", "--catalog", catalog, "--out", a}).code,
            cli::kIoOrConfig);
  write_file(dir / "list.json", "[1,2]");
  EXPECT_EQ(run({"--config", (dir / "list.json").string(), "ingest", "--catalog", catalog}).code, cli::kIoOrConfig);
}

TEST(Cli, PipelineIsDeterministic) {
  TempDir dir;
  const std::string catalog = small(dir);
  for (const std::string out : {"r1", "r2"}) {
    const std::string ds = (dir / out).string();
    ASSERT_EQ(run({"build-dataset", "--catalog", catalog, "--out", ds, "--dim", "64"}).code, cli::kOk);
    ASSERT_EQ(run({"gen-dialogues", "--catalog", catalog, "--dataset", ds}).code, cli::kOk);
    ASSERT_EQ(run({"validate-dialogues", "--catalog", catalog, "--dataset", ds}).code, cli::kOk);
  }
  for (const std::string f : {"basic.jsonl", "personalized.jsonl", "alternative.jsonl", "split.json",
                              "dialogues.jsonl"}) {
    EXPECT_EQ(slurp(dir / "r1" / f), slurp(dir / "r2" / f)) << f;
  }
}

TEST(Cli, ValidateFlagsTamperedDialogues) {
  TempDir dir;
  const std::string catalog = small(dir);
  const std::string ds = (dir / "ds").string();
  ASSERT_EQ(run({"build-dataset", "--catalog", catalog, "--out", ds, "--task", "basic", "--dim", "32"}).code, cli::kOk);
  ASSERT_EQ(run({"gen-dialogues", "--catalog", catalog, "--dataset", ds}).code, cli::kOk);
  std::vector<Json> rows;
  for_each_jsonl(std::filesystem::path(ds) / "dialogues.jsonl", [&](const Json& row, std::size_t) { rows.push_back(row); });
  ASSERT_FALSE(rows.empty());
  rows.pop_back();
  write_jsonl(std::filesystem::path(ds) / "dialogues.jsonl", rows);
  const CliRun r = run({"validate-dialogues", "--catalog", catalog, "--dataset", ds});
  EXPECT_EQ(r.code, cli::kValidationFailure);
  EXPECT_EQ(Json::parse(r.out)["missing"], 1);
}

TEST(Cli, EvaluateWritesReport) {
  TempDir dir;
  write_jsonl(dir / "pred.jsonl", {Json{{"id", "a"}, {"gen_text", "x"}, {"gt_text", "x"}},
                                   Json{{"id", "b"}, {"gen_text", "y"}, {"gt_text", "z"}, {"gen_image", "g.png"},
                                        {"gt_image", "g.png"}, {"history_images", {"g.png"}}}});
  const CliRun r = run({"evaluate", "--predictions", (dir / "pred.jsonl").string(), "--out", (dir / "rep").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const Json report = read_json(dir / "rep" / "report.json");
  EXPECT_EQ(report["sbert"]["n"], 2);
  EXPECT_NEAR(report["cis"]["mean"].get<double>(), 100.0, 1e-6);
  EXPECT_NE(r.err.find("S-BERT"), std::string::npos);
}

TEST(Cli, RetrieveNeedsOneQuery) {
  TempDir dir;
  const std::string catalog = small(dir);
  EXPECT_EQ(run({"retrieve", "--catalog", catalog}).code, cli::kIoOrConfig);
  EXPECT_EQ(run({"retrieve", "--catalog", catalog, "--item", "i0001", "--query-text", "x"}).code, cli::kIoOrConfig);
  const CliRun r = run({"retrieve", "--catalog", catalog, "--item", "i0001", "--k", "3", "--dim", "32"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const Json results = Json::parse(r.out)["results"];
  ASSERT_EQ(results.size(), 3U);
  for (const auto& hit : results) EXPECT_NE(hit["id"], "i0001");
}

TEST(Cli, EmbedCacheNeedsPath) {
  TempDir dir;
  const std::string catalog = small(dir);
  EXPECT_EQ(run({"embed-cache", "--catalog", catalog}).code, cli::kIoOrConfig);
  const CliRun r = run({"embed-cache", "--catalog", catalog, "--embed-cache", (dir / "c.jsonl").string(), "--dim", "16"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(Json::parse(r.out)["items"], 72);
}

}  // namespace
}  // namespace fashionrec
