#include "fashionrec/server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "fashionrec/error.hpp"

namespace fashionrec {

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kInput:
    case ErrorCode::kParse:
    case ErrorCode::kOutOfRange:
    case ErrorCode::kDimensionMismatch: return 400;
    case ErrorCode::kBackend: return 502;
    default: return 500;
  }
}

void send_json(httplib::Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, Json{{"code", code}, {"message", message}}, status);
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    Json body = Json::parse(req.body);
    if (!body.is_object()) throw Error(ErrorCode::kInput, "request body must be a JSON object");
    return body;
  } catch (const Json::parse_error&) {
    throw Error(ErrorCode::kParse, "request body is not valid JSON");
  }
}

std::string extension_for_mime(const std::string& mime) {
  if (mime == "image/png") return "png";
  if (mime == "image/jpeg" || mime == "image/jpg") return "jpg";
  if (mime == "image/webp") return "webp";
  if (mime == "image/x-portable-pixmap") return "ppm";
  return "bin";
}

std::string mime_for_path(const std::string& path) {
  auto ends = [&](const char* s) { return path.ends_with(s); };
  if (ends(".png")) return "image/png";
  if (ends(".jpg") || ends(".jpeg")) return "image/jpeg";
  if (ends(".webp")) return "image/webp";
  if (ends(".ppm")) return "image/x-portable-pixmap";
  return "application/octet-stream";
}

}  // namespace

std::string decode_image_entry(const ImageStore& images, const Json& entry) {
  if (entry.is_string()) {
    const auto& s = entry.get_ref<const std::string&>();
    if (!s.starts_with("data:")) {
      if (s.empty()) throw Error(ErrorCode::kInput, "empty image ref");
      return s;
    }
    const auto comma = s.find(',');
    const auto header = s.substr(5, comma == std::string::npos ? 0 : comma - 5);
    if (comma == std::string::npos || header.find(";base64") == std::string::npos) {
      throw Error(ErrorCode::kInput, "image data URLs must be base64 encoded");
    }
    return images.save_upload(base64_decode(s.substr(comma + 1)), extension_for_mime(header.substr(0, header.find(';'))));
  }
  if (entry.is_object() && entry.contains("base64") && entry["base64"].is_string()) {
    return images.save_upload(base64_decode(entry["base64"].get<std::string>()), entry.value("ext", std::string("bin")));
  }
  throw Error(ErrorCode::kInput, "image entries must be refs, data URLs or {\"base64\": ...} objects");
}

struct ChatServer::Impl {
  Orchestrator& orchestrator;
  httplib::Server server;

  explicit Impl(Orchestrator& o) : orchestrator(o) { routes(); }

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  }

  void routes() {
    server.Post("/rpc", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string out = handle_jsonrpc_text(orchestrator.tools(), req.body);
      if (out.empty()) {
        res.status = 204;
      } else {
        res.set_content(out, "application/json");
      }
    });

    server.Post("/session", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Json body = parse_body(req);
        std::optional<UserId> user;
        if (body.contains("user_id") && body["user_id"].is_string()) user = body["user_id"].get<std::string>();
        const Session s = orchestrator.create_session(user);
        send_json(res, Json{{"id", s.id}, {"user_id", s.user_id ? Json(*s.user_id) : Json(nullptr)}});
      });
    });

    server.Post(R"(/session/([^/]+)/message)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Json body = parse_body(req);
        const std::string text = body.value("text", std::string());
        std::vector<std::string> refs;
        for (const auto& entry : body.value("images", Json::array())) {
          refs.push_back(decode_image_entry(orchestrator.images(), entry));
        }
        send_json(res, orchestrator.handle_message(req.matches[1], text, refs).to_json());
      });
    });

    server.Get(R"(/session/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, orchestrator.session(req.matches[1]).to_json()); });
    });

    server.Get("/users", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        Json ids = Json::array();
        for (const auto& u : orchestrator.catalog().users()) ids.push_back(u.id);
        send_json(res, Json{{"users", ids}});
      });
    });

    server.Get("/image", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (!req.has_param("ref")) throw Error(ErrorCode::kInput, "missing ref parameter");
        const std::string ref = req.get_param_value("ref");
        res.set_content(orchestrator.images().read(ref), mime_for_path(ref));
      });
    });

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
      send_error(res, 500, "internal", "unhandled server error");
    });
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (res.body.empty()) send_error(res, res.status, "http", "no route for " + req.method + " " + req.path);
    });
  }
};

ChatServer::ChatServer(Orchestrator& orchestrator) : impl_(std::make_unique<Impl>(orchestrator)) {}

ChatServer::~ChatServer() { stop(); }

void ChatServer::listen(const std::string& host, int port) {
  bind(host, port);
  run();
}

int ChatServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kConfig, "cannot bind " + host + ":" + std::to_string(port));
  spdlog::info("serving on http://{}:{}", host, bound);
  return bound;
}

void ChatServer::run() { impl_->server.listen_after_bind(); }

void ChatServer::stop() {
  if (impl_) impl_->server.stop();
}

bool ChatServer::running() const { return impl_->server.is_running(); }

}  // namespace fashionrec
