#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cli.hpp"
#include "fashionrec/error.hpp"
#include "fashionrec/fixture.hpp"
#include "fashionrec/history_filter.hpp"
#include "fashionrec/metrics.hpp"
#include "fashionrec/sample_builder.hpp"
#include "fashionrec/service.hpp"

namespace py = pybind11;
using namespace fashionrec;

namespace {

py::object to_py(const Json& value) { return py::module_::import("json").attr("loads")(value.dump()); }

Json from_py(const py::handle& value) {
  return Json::parse(py::module_::import("json").attr("dumps")(value).cast<std::string>());
}

std::shared_ptr<ItemFeatures> mock_features(std::size_t dim) {
  return std::make_shared<ItemFeatures>(std::make_shared<MockEmbedder>(dim));
}

py::dict outcome_to_py(const FilterOutcome& o) {
  py::dict d;
  d["partial"] = std::vector<ItemId>(o.partial.begin(), o.partial.end());
  d["target"] = o.target;
  d["filtered_history"] = o.filtered_history;
  py::list scores;
  for (const auto& s : o.scores) {
    py::dict row;
    row["id"] = s.id;
    row["sim"] = s.sim;
    row["count"] = s.count;
    row["score"] = s.score;
    scores.append(row);
  }
  d["scores"] = scores;
  return d;
}

// Owns a Service so Python can drive the chat orchestrator without HTTP.
class PyAssistant {
 public:
  PyAssistant(const std::filesystem::path& catalog_dir, const std::filesystem::path& work_dir, std::size_t dim,
              bool allow_anonymous) {
    ServiceConfig config;
    config.catalog_dir = catalog_dir;
    config.work_dir = work_dir;
    config.embedder.dim = dim;
    config.allow_anonymous = allow_anonymous;
    service_ = std::make_unique<Service>(config);
  }

  std::string create_session(const std::optional<std::string>& user) {
    return service_->orchestrator().create_session(user).id;
  }
  py::object send(const std::string& session, const std::string& text, const std::vector<std::string>& images) {
    return to_py(service_->orchestrator().handle_message(session, text, images).to_json());
  }
  py::object transcript(const std::string& session) {
    return to_py(service_->orchestrator().session(session).to_json());
  }
  std::string rpc(const std::string& body) { return handle_jsonrpc_text(service_->orchestrator().tools(), body); }

 private:
  std::unique_ptr<Service> service_;
};

}  // namespace

PYBIND11_MODULE(_fashionrec, m) {
  m.doc() = "Bindings for the fashionrec core library.";

  static py::exception<Error> error(m, "FashionrecError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      // args == (code, message)
      PyErr_SetObject(error.ptr(), py::make_tuple(to_string(e.code()), e.what()).ptr());
    }
  });

  m.def(
      "make_fixture",
      [](const std::filesystem::path& out, std::uint64_t seed, std::size_t outfits, std::size_t users,
         std::size_t items_per_category) {
        FixtureConfig c;
        c.seed = seed;
        c.n_outfits = outfits;
        c.n_users = users;
        c.items_per_category = items_per_category;
        return to_py(write_fixture(out, c).stats().to_json());
      },
      py::arg("out"), py::arg("seed") = 42, py::arg("outfits") = 200, py::arg("users") = 30,
      py::arg("items_per_category") = 40, "Write a synthetic catalog with images; returns its statistics.");

  py::class_<Catalog>(m, "Catalog")
      .def_static("load", &Catalog::load_dir, py::arg("dir"))
      .def("stats", [](const Catalog& c) { return to_py(c.stats().to_json()); })
      .def("categories", &Catalog::categories)
      .def("item", [](const Catalog& c, const std::string& id) { return to_py(item_to_json(c.item(id))); })
      .def("item_ids",
           [](const Catalog& c) {
             std::vector<ItemId> ids;
             for (const auto& i : c.items()) ids.push_back(i.id);
             return ids;
           })
      .def("outfit", [](const Catalog& c, const std::string& id) { return c.outfit(id).item_ids; })
      .def("outfit_ids",
           [](const Catalog& c) {
             std::vector<OutfitId> ids;
             for (const auto& o : c.outfits()) ids.push_back(o.id);
             return ids;
           })
      .def("user_outfits", [](const Catalog& c, const std::string& id) { return c.user(id).outfit_ids; })
      .def("user_ids", [](const Catalog& c) {
        std::vector<UserId> ids;
        for (const auto& u : c.users()) ids.push_back(u.id);
        return ids;
      });

  m.def(
      "mock_embed",
      [](const std::string& payload, std::size_t dim) {
        const auto v = mock_embed(payload, dim);
        return std::vector<double>(v.values().begin(), v.values().end());
      },
      py::arg("payload"), py::arg("dim") = 512);
  m.def(
      "cosine",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return cosine(EmbeddingVector(a), EmbeddingVector(b));
      },
      py::arg("a"), py::arg("b"));
  m.def("history_score", &history_score, py::arg("sim"), py::arg("count"), py::arg("max_count"),
        py::arg("beta") = 2.0);

  m.def(
      "filter_user_history",
      [](const Catalog& catalog, const std::string& outfit, const std::string& user, std::size_t dim,
         std::size_t min_user_history, std::size_t min_compatible, double alpha, double beta,
         std::size_t top_k) -> py::object {
        const auto features = mock_features(dim);
        FilterConfig config;
        config.min_user_history = min_user_history;
        config.min_compatible_items = min_compatible;
        config.alpha = alpha;
        config.beta = beta;
        config.top_k = top_k;
        const HistoryFilter filter(catalog, *features, config);
        const auto outcome = filter.filter_user_history(outfit, user);
        if (!outcome) return py::none();
        return outcome_to_py(*outcome);
      },
      py::arg("catalog"), py::arg("outfit"), py::arg("user"), py::arg("dim") = 512, py::arg("min_user_history") = 10,
      py::arg("min_compatible") = 3, py::arg("alpha") = 3.0, py::arg("beta") = 2.0, py::arg("top_k") = 5,
      "Filtered history for (outfit, user) with the mock embedder, or None when no target qualifies.");

  m.def("find_alternative_pairs", [](const Catalog& catalog) {
    py::list out;
    for (const auto& p : find_alternative_pairs(catalog)) out.append(py::make_tuple(p.outfit_a, p.outfit_b, p.shared));
    return out;
  });

  m.def(
      "build_dataset",
      [](const Catalog& catalog, const std::filesystem::path& out, std::uint64_t seed,
         const std::vector<std::string>& tasks, std::array<double, 3> ratios, std::size_t dim) {
        DatasetOptions options;
        options.seed = seed;
        options.ratios = ratios;
        options.tasks.clear();
        for (const auto& t : tasks) options.tasks.push_back(task_from_string(t));
        const auto features = mock_features(dim);
        return to_py(build_dataset(catalog, *features, options, out).to_json());
      },
      py::arg("catalog"), py::arg("out"), py::arg("seed") = 42,
      py::arg("tasks") = std::vector<std::string>{"basic", "personalized", "alternative"},
      py::arg("ratios") = std::array<double, 3>{0.9, 0.05, 0.05}, py::arg("dim") = 512);

  m.def("sbert_similarity", [](const std::string& a, const std::string& b, std::size_t dim) {
    return sbert_similarity(a, b, MockEmbedder(dim));
  }, py::arg("generated"), py::arg("ground_truth"), py::arg("dim") = 512);
  m.def("cts", [](const std::string& t, const std::string& i, std::size_t dim) { return cts(t, i, MockEmbedder(dim)); },
        py::arg("generated_text"), py::arg("gt_image"), py::arg("dim") = 512);
  m.def("cis", [](const std::string& g, const std::string& i, std::size_t dim) { return cis(g, i, MockEmbedder(dim)); },
        py::arg("generated_image"), py::arg("gt_image"), py::arg("dim") = 512);
  m.def("personalization",
        [](const std::string& g, const std::vector<std::string>& h, std::size_t dim) {
          return personalization(g, h, MockEmbedder(dim));
        },
        py::arg("generated_image"), py::arg("history_images"), py::arg("dim") = 512);
  m.def(
      "evaluate_run",
      [](const py::list& rows, std::size_t dim) {
        std::vector<EvalPair> pairs;
        for (const auto& row : rows) pairs.push_back(EvalPair::from_json(from_py(row)));
        const MockEmbedder e(dim);
        return to_py(evaluate_run(pairs, e, e).to_json());
      },
      py::arg("pairs"), py::arg("dim") = 512, "Mean metrics over prediction rows (mock embedder).");

  m.def(
      "mmr_loss",
      [](std::vector<std::vector<double>> logits, const std::vector<std::size_t>& tokens, std::size_t start) {
        return mmr_loss(LogitTable(std::move(logits)), tokens, start);
      },
      py::arg("logits"), py::arg("response_tokens"), py::arg("response_start"));
  m.def(
      "t2i_loss",
      [](std::vector<std::vector<double>> logits, std::size_t length,
         const std::vector<std::pair<std::size_t, std::size_t>>& masked) {
        return t2i_loss(LogitTable(std::move(logits)), MaskSpec{length, masked});
      },
      py::arg("logits"), py::arg("length"), py::arg("masked"));

  py::class_<PyAssistant>(m, "Assistant")
      .def(py::init<const std::filesystem::path&, const std::filesystem::path&, std::size_t, bool>(),
           py::arg("catalog_dir"), py::arg("work_dir"), py::arg("dim") = 512, py::arg("allow_anonymous") = true)
      .def("create_session", &PyAssistant::create_session, py::arg("user_id") = py::none())
      .def("send", &PyAssistant::send, py::arg("session_id"), py::arg("text"),
           py::arg("images") = std::vector<std::string>{})
      .def("transcript", &PyAssistant::transcript, py::arg("session_id"))
      .def("rpc", &PyAssistant::rpc, py::arg("body"), "JSON-RPC request text in, response text out (empty for notifications).");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
