#pragma once

#include <string>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "fashionrec/error.hpp"

namespace fashionrec::detail {

// "http://host:port/base" -> ("http://host:port", "/base")
inline std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  const auto start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = endpoint.find('/', start);
  if (slash == std::string::npos) return {endpoint, ""};
  std::string base = endpoint.substr(slash);
  while (!base.empty() && base.back() == '/') base.pop_back();
  return {endpoint.substr(0, slash), base};
}

// POSTs a JSON body and returns the raw response body. Throws kBackend on
// transport failure or non-2xx status.
inline std::string post_json(const std::string& endpoint, const std::string& path,
                             const nlohmann::json& body, int timeout_sec = 30) {
  const auto [host, base] = split_endpoint(endpoint);
  httplib::Client client(host);
  client.set_connection_timeout(timeout_sec, 0);
  client.set_read_timeout(timeout_sec, 0);
  auto res = client.Post(base + path, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kBackend, "endpoint unreachable: " + endpoint + base + path + " (" +
                                         httplib::to_string(res.error()) + ")");
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::kBackend, "endpoint " + endpoint + base + path + " returned HTTP " +
                                         std::to_string(res->status));
  }
  return res->body;
}

}  // namespace fashionrec::detail
