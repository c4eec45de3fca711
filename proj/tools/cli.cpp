#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <functional>
#include <iostream>
#include <sstream>

#include "fashionrec/catalog.hpp"
#include "fashionrec/dialogue.hpp"
#include "fashionrec/error.hpp"
#include "fashionrec/fixture.hpp"
#include "fashionrec/metrics.hpp"
#include "fashionrec/sample_builder.hpp"
#include "fashionrec/server.hpp"
#include "fashionrec/service.hpp"

namespace fashionrec::cli {

namespace {

namespace fs = std::filesystem;

// Registers options whose values may also come from the JSON config file.
// Lookup order: command line, config[subcommand][name], config[name].
class Binder {
 public:
  explicit Binder(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* option(const std::string& name, T& var, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, var, help);
    fills_.push_back([opt, name, &var](const Json& cfg) {
      if (opt->count() == 0 && cfg.contains(name)) var = cfg.at(name).get<T>();
    });
    return opt;
  }

  // Required, but satisfiable from the config file.
  template <typename T>
  CLI::Option* required(const std::string& name, T& var, const std::string& help) {
    CLI::Option* opt = option(name, var, help + " (required)");
    required_.push_back({name, opt});
    return opt;
  }

  CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
    CLI::Option* opt = app_->add_flag("--" + name, var, help);
    fills_.push_back([opt, name, &var](const Json& cfg) {
      if (opt->count() == 0 && cfg.contains(name)) var = cfg.at(name).get<bool>();
    });
    return opt;
  }

  void apply(const Json& config) const {
    Json merged = Json::object();
    if (!config.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");
    for (const auto& [key, value] : config.items()) {
      if (!value.is_object()) merged[key] = value;
    }
    if (config.contains(app_->get_name()) && config[app_->get_name()].is_object()) {
      merged.update(config[app_->get_name()]);
    }
    try {
      for (const auto& fill : fills_) fill(merged);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kConfig, std::string("config value has the wrong type: ") + e.what());
    }
    for (const auto& [name, opt] : required_) {
      if (opt->count() == 0 && !merged.contains(name)) {
        throw Error(ErrorCode::kConfig, app_->get_name() + " needs --" + name);
      }
    }
  }

  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::function<void(const Json&)>> fills_;
  std::vector<std::pair<std::string, CLI::Option*>> required_;
};

struct EmbedFlags {
  std::size_t dim = 512;
  std::string backend = "mock";
  std::string endpoint;
  std::string cache;

  void bind(Binder& b, const std::string& backend_flag = "embed-backend") {
    b.option("dim", dim, "embedding dimension");
    b.option(backend_flag, backend, "embedding backend: mock or remote")
        ->check(CLI::IsMember({"mock", "remote"}));
    b.option("embed-endpoint", endpoint, "remote embedding service URL");
    b.option("embed-cache", cache, "JSONL embedding cache file");
  }

  EmbedderConfig config(const fs::path& image_root) const {
    EmbedderConfig c;
    c.dim = dim;
    c.backend = backend == "remote" ? EmbedBackend::kRemote : EmbedBackend::kMock;
    if (!endpoint.empty()) c.endpoint = endpoint;
    if (!cache.empty()) c.cache_path = cache;
    c.image_root = image_root;
    c.validate();
    return c;
  }
};

void print(std::ostream& out, const Json& summary) { out << summary.dump(2) << '\n'; }

SplitRatios parse_ratios(const std::string& text) {
  SplitRatios ratios{};
  std::stringstream ss(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i == 3) break;
    try {
      ratios[i++] = std::stod(part);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfig, "bad split ratio \"" + part + "\"");
    }
  }
  if (i != 3 || std::getline(ss, part, ',')) throw Error(ErrorCode::kConfig, "--ratios needs three comma-separated values");
  return ratios;
}

std::vector<TaskKind> parse_tasks(const std::string& task) {
  if (task == "all") return {TaskKind::kBasic, TaskKind::kPersonalized, TaskKind::kAlternative};
  return {task_from_string(task)};
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDanglingReference:
    case ErrorCode::kDuplicateId:
    case ErrorCode::kContract: return kValidationFailure;
    default: return kIoOrConfig;
  }
}

void copy_images(const Catalog& catalog, const fs::path& out) {
  for (const auto& item : catalog.items()) {
    if (item.image_ref.empty() || item.image_ref.find("://") != std::string::npos) continue;
    const fs::path src = catalog.base_dir() / item.image_ref;
    const fs::path dst = out / item.image_ref;
    if (!fs::exists(src) || fs::weakly_canonical(src) == fs::weakly_canonical(dst)) continue;
    fs::create_directories(dst.parent_path());
    fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto logger = spdlog::get("fashionrec");
  if (!logger) logger = spdlog::stderr_color_mt("fashionrec");
  spdlog::set_default_logger(logger);

  CLI::App app{"fashionrec: outfit recommendation dataset, evaluation and chat tooling"};
  app.require_subcommand(1);
  std::string config_path;
  std::string log_level = "warn";
  app.add_option("--config", config_path, "JSON config file; command-line flags take precedence");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  std::vector<std::unique_ptr<Binder>> binders;
  auto sub = [&](const std::string& name, const std::string& help) -> Binder& {
    binders.push_back(std::make_unique<Binder>(app.add_subcommand(name, help)));
    return *binders.back();
  };

  // make-fixture
  FixtureConfig fixture;
  std::string fixture_out;
  {
    Binder& b = sub("make-fixture", "write a synthetic catalog with images");
    b.required("out", fixture_out, "output directory");
    b.option("seed", fixture.seed, "generator seed");
    b.option("outfits", fixture.n_outfits, "number of outfits");
    b.option("users", fixture.n_users, "number of users");
    b.option("items-per-category", fixture.items_per_category, "items per category");
  }

  // ingest
  std::string items_path, outfits_path, users_path, ingest_catalog, ingest_out;
  {
    Binder& b = sub("ingest", "validate a catalog and report statistics");
    b.option("items", items_path, "items.jsonl");
    b.option("outfits", outfits_path, "outfits.jsonl");
    b.option("users", users_path, "users.jsonl");
    b.option("catalog", ingest_catalog, "directory holding the three JSONL files");
    b.option("out", ingest_out, "write a canonical copy (JSONL and images) here");
  }

  // build-dataset
  std::string bd_catalog, bd_out, bd_task = "all", bd_ratios = "0.9,0.05,0.05";
  DatasetOptions bd;
  EmbedFlags bd_embed;
  {
    Binder& b = sub("build-dataset", "build instruction samples and the split manifest");
    b.required("catalog", bd_catalog, "catalog directory");
    b.required("out", bd_out, "dataset output directory");
    b.option("task", bd_task, "basic, personalized, alternative or all")
        ->check(CLI::IsMember({"basic", "personalized", "alternative", "all"}));
    b.option("seed", bd.seed, "seed for target draws and split shuffles");
    b.option("ratios", bd_ratios, "train,valid,test ratios");
    b.option("top-k", bd.filter.top_k, "filtered history size");
    b.option("alpha", bd.filter.alpha, "weight of |H_c| when choosing the target");
    b.option("beta", bd.filter.beta, "interaction-count weight in the history score");
    b.option("min-user-history", bd.filter.min_user_history, "minimum |U_c|");
    b.option("min-compatible", bd.filter.min_compatible_items, "minimum |H_c|");
    bd_embed.bind(b);
  }

  // gen-dialogues
  std::string gd_catalog, gd_dataset, gd_out, gd_backend = "fallback";
  ChatBackendConfig gd_chat;
  std::size_t gd_in_flight = 4;
  {
    Binder& b = sub("gen-dialogues", "generate dialogues for every sample");
    b.required("catalog", gd_catalog, "catalog directory");
    b.required("dataset", gd_dataset, "dataset directory from build-dataset");
    b.option("out", gd_out, "output directory (default: the dataset directory)");
    b.option("backend", gd_backend, "fallback or remote")->check(CLI::IsMember({"fallback", "remote"}));
    b.option("endpoint", gd_chat.endpoint, "chat-completions base URL for the remote backend");
    b.option("model", gd_chat.model, "model name sent to the remote backend");
    b.option("temperature", gd_chat.temperature, "sampling temperature");
    b.option("timeout", gd_chat.timeout_sec, "per-request timeout in seconds");
    b.option("max-in-flight", gd_in_flight, "concurrent backend requests");
  }

  // validate-dialogues
  std::string vd_catalog, vd_dataset, vd_dialogues;
  {
    Binder& b = sub("validate-dialogues", "check dialogues against the generation rules");
    b.required("catalog", vd_catalog, "catalog directory");
    b.required("dataset", vd_dataset, "dataset directory");
    b.option("dialogues", vd_dialogues, "dialogues.jsonl (default: <dataset>/dialogues.jsonl)");
  }

  // evaluate
  std::string ev_predictions, ev_out, ev_text_endpoint, ev_image_root;
  EmbedFlags ev_embed;
  {
    Binder& b = sub("evaluate", "score predictions with S-BERT, CTS, CIS and Per.");
    b.required("predictions", ev_predictions, "predictions.jsonl");
    b.option("out", ev_out, "write report.json and report.txt here");
    b.option("text-embed-endpoint", ev_text_endpoint, "sentence-embedding service (default: --embed-endpoint)");
    b.option("image-root", ev_image_root, "directory relative image refs resolve against");
    ev_embed.bind(b);
  }

  // serve
  std::string sv_host = "127.0.0.1", sv_catalog, sv_work = "work", sv_rec, sv_img;
  int sv_port = 8080;
  bool sv_strict = false;
  EmbedFlags sv_embed;
  {
    Binder& b = sub("serve", "run the chat assistant HTTP service");
    b.required("catalog", sv_catalog, "catalog directory");
    b.option("host", sv_host, "bind address");
    b.option("port", sv_port, "bind port (0 picks a free one)");
    b.option("work-dir", sv_work, "uploads, generated images and sessions");
    b.option("recommend-endpoint", sv_rec, "HTTP recommender (default: built-in stub)");
    b.option("image-endpoint", sv_img, "HTTP image generator (default: built-in stub)");
    b.flag("strict-users", sv_strict, "reject sessions for unknown users");
    sv_embed.bind(b);
  }

  // embed-cache
  std::string ec_catalog;
  EmbedFlags ec_embed;
  {
    Binder& b = sub("embed-cache", "precompute text and image embeddings for every item");
    b.required("catalog", ec_catalog, "catalog directory");
    ec_embed.bind(b, "backend");
  }

  // retrieve
  std::string rt_catalog, rt_text, rt_image, rt_item, rt_category;
  std::size_t rt_k = 5;
  EmbedFlags rt_embed;
  {
    Binder& b = sub("retrieve", "nearest catalog items to a text, image or item");
    b.required("catalog", rt_catalog, "catalog directory");
    b.option("query-text", rt_text, "query text");
    b.option("query-image", rt_image, "query image ref");
    b.option("item", rt_item, "query item id (excluded from results)");
    b.option("category", rt_category, "restrict results to a category");
    b.option("k", rt_k, "number of results");
    rt_embed.bind(b);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kIoOrConfig;
  }

  const auto level = spdlog::level::from_str(log_level);
  spdlog::set_level(level);

  CLI::App* active = app.get_subcommands().front();
  const std::string name = active->get_name();

  try {
    const Json config = config_path.empty() ? Json::object() : read_json(config_path);
    for (const auto& b : binders) {
      if (b->app() == active) b->apply(config);
    }

    if (name == "make-fixture") {
      const Catalog catalog = write_fixture(fixture_out, fixture);
      print(out, Json{{"out", fixture_out}, {"config", fixture.to_json()}, {"stats", catalog.stats().to_json()}});
      return kOk;
    }

    if (name == "ingest") {
      Catalog catalog;
      if (!ingest_catalog.empty()) {
        if (!items_path.empty() || !outfits_path.empty() || !users_path.empty()) {
          throw Error(ErrorCode::kConfig, "use either --catalog or --items/--outfits/--users");
        }
        catalog = Catalog::load_dir(ingest_catalog);
      } else {
        if (items_path.empty() || outfits_path.empty() || users_path.empty()) {
          throw Error(ErrorCode::kConfig, "ingest needs --items, --outfits and --users (or --catalog)");
        }
        catalog = Catalog::ingest(items_path, outfits_path, users_path);
      }
      Json summary{{"stats", catalog.stats().to_json()}, {"categories", catalog.categories()}};
      if (!ingest_out.empty()) {
        catalog.save_dir(ingest_out);
        copy_images(catalog, ingest_out);
        summary["out"] = ingest_out;
      }
      print(out, summary);
      return kOk;
    }

    if (name == "build-dataset") {
      const Catalog catalog = Catalog::load_dir(bd_catalog);
      bd.tasks = parse_tasks(bd_task);
      bd.ratios = parse_ratios(bd_ratios);
      bd.filter.validate();
      const ItemFeatures features(make_embedder(bd_embed.config(catalog.base_dir())));
      const DatasetSummary summary = build_dataset(catalog, features, bd, bd_out);
      for (const auto& w : summary.warnings) spdlog::warn("{}", w);
      Json j = summary.to_json();
      j["out"] = bd_out;
      print(out, j);
      return kOk;
    }

    if (name == "gen-dialogues") {
      const Catalog catalog = Catalog::load_dir(gd_catalog);
      const auto contexts = load_contexts(catalog, gd_dataset);
      std::unique_ptr<DialogueBackend> backend;
      if (gd_backend == "remote") {
        if (gd_chat.endpoint.empty()) throw Error(ErrorCode::kConfig, "--backend remote needs --endpoint");
        backend = std::make_unique<RemoteChatBackend>(gd_chat);
      } else {
        backend = std::make_unique<TemplateBackend>();
      }
      if (gd_in_flight == 0) throw Error(ErrorCode::kConfig, "--max-in-flight must be positive");
      const fs::path dir = gd_out.empty() ? fs::path(gd_dataset) : fs::path(gd_out);
      const GenerationSummary summary = generate_dialogues(contexts, *backend, dir, gd_in_flight);
      Json j = summary.to_json();
      j["backend"] = gd_backend;
      j["out"] = (dir / "dialogues.jsonl").string();
      print(out, j);
      return summary.failed == 0 ? kOk : kValidationFailure;
    }

    if (name == "validate-dialogues") {
      const Catalog catalog = Catalog::load_dir(vd_catalog);
      const auto contexts = load_contexts(catalog, vd_dataset);
      const fs::path path = vd_dialogues.empty() ? fs::path(vd_dataset) / "dialogues.jsonl" : fs::path(vd_dialogues);
      std::vector<Dialogue> dialogues;
      for_each_jsonl(path, [&](const Json& row, std::size_t) { dialogues.push_back(Dialogue::from_json(row)); });
      const ValidationSummary summary = validate_dialogues(contexts, dialogues);
      print(out, summary.to_json());
      return summary.violations.empty() && summary.missing == 0 ? kOk : kValidationFailure;
    }

    if (name == "evaluate") {
      std::vector<EvalPair> pairs;
      for_each_jsonl(ev_predictions, [&](const Json& row, std::size_t) { pairs.push_back(EvalPair::from_json(row)); });
      const fs::path root = ev_image_root.empty() ? fs::path(ev_predictions).parent_path() : fs::path(ev_image_root);
      const auto embedder = make_embedder(ev_embed.config(root));
      auto text_embedder = embedder;
      if (!ev_text_endpoint.empty()) {
        EmbedFlags text_flags = ev_embed;
        text_flags.endpoint = ev_text_endpoint;
        text_flags.backend = "remote";
        text_flags.cache.clear();
        text_embedder = make_embedder(text_flags.config(root));
      }
      const MetricReport report = evaluate_run(pairs, *text_embedder, *embedder);
      if (!ev_out.empty()) {
        write_json(fs::path(ev_out) / "report.json", report.to_json());
        write_file(fs::path(ev_out) / "report.txt", report.to_table());
      }
      err << report.to_table();
      print(out, report.to_json());
      return kOk;
    }

    if (name == "serve") {
      ServiceConfig sc;
      sc.catalog_dir = sv_catalog;
      sc.work_dir = sv_work;
      sc.embedder = sv_embed.config({});
      if (!sv_rec.empty()) sc.recommend_endpoint = sv_rec;
      if (!sv_img.empty()) sc.image_endpoint = sv_img;
      sc.allow_anonymous = !sv_strict;
      Service service(sc);
      ChatServer server(service.orchestrator());
      const int port = server.bind(sv_host, sv_port);
      print(out, Json{{"listening", "http://" + sv_host + ":" + std::to_string(port)},
                      {"catalog", service.catalog().stats().to_json()}});
      out.flush();
      server.run();
      return kOk;
    }

    if (name == "embed-cache") {
      if (ec_embed.cache.empty()) throw Error(ErrorCode::kConfig, "embed-cache needs --embed-cache");
      const Catalog catalog = Catalog::load_dir(ec_catalog);
      const auto embedder = make_embedder(ec_embed.config(catalog.base_dir()));
      std::size_t embedded = 0;
      for (const auto& item : catalog.items()) {
        embedder->embed_text(item.description);
        if (!item.image_ref.empty()) embedder->embed_image(item.image_ref);
        ++embedded;
      }
      const auto* caching = dynamic_cast<const CachingEmbedder*>(embedder.get());
      print(out, Json{{"items", embedded},
                      {"entries", caching ? caching->size() : 0},
                      {"backend", embedder->backend_id()},
                      {"cache", ec_embed.cache}});
      return kOk;
    }

    if (name == "retrieve") {
      const int given = !rt_text.empty() + !rt_image.empty() + !rt_item.empty();
      if (given != 1) throw Error(ErrorCode::kConfig, "give exactly one of --query-text, --query-image, --item");
      if (rt_k == 0) throw Error(ErrorCode::kConfig, "--k must be at least 1");
      const Catalog catalog = Catalog::load_dir(rt_catalog);
      const ItemFeatures features(make_embedder(rt_embed.config(catalog.base_dir())));
      std::optional<EmbeddingVector> query;
      if (!rt_text.empty()) query = features.embedder().embed_text(rt_text);
      if (!rt_image.empty()) query = features.embedder().embed_image(rt_image);
      if (!rt_item.empty()) query = features.of(catalog.item(rt_item));
      std::optional<std::string> category;
      if (!rt_category.empty()) category = rt_category;
      auto hits = catalog.nearest_items(*query, features, rt_k + (rt_item.empty() ? 0 : 1), category);
      std::erase_if(hits, [&](const ScoredItem& s) { return s.id == rt_item; });
      if (hits.size() > rt_k) hits.resize(rt_k);
      Json results = Json::array();
      for (const auto& h : hits) {
        const Item& item = catalog.item(h.id);
        results.push_back(Json{{"id", h.id},
                               {"similarity", h.similarity},
                               {"category", item.category},
                               {"description", item.description},
                               {"image_ref", item.image_ref}});
      }
      print(out, Json{{"results", results}});
      return kOk;
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kIoOrConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIoOrConfig;
  }
  err << app.help();
  return kIoOrConfig;
}

}  // namespace fashionrec::cli
