#pragma once

#include <cstdlib>
#include <optional>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "evmem/error.hpp"

namespace evmem {

struct UrlParts {
  std::string base;  // scheme://host[:port]
  std::string path;  // always starts with '/'
};

inline UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::config, "URL without scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::optional<std::string> env_var(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

/// POSTs a JSON body and returns the parsed JSON reply. Any non-2xx status,
/// connection failure or unparsable body is a TransportError.
inline nlohmann::json post_json(const std::string& url, const std::string& bearer, const nlohmann::json& body,
                                int timeout_seconds = 120) {
  const auto parts = split_url(url);
  httplib::Client client(parts.base);
  client.set_connection_timeout(timeout_seconds);
  client.set_read_timeout(timeout_seconds);
  httplib::Headers headers;
  if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);
  auto res = client.Post(parts.path, headers, body.dump(), "application/json");
  if (!res) throw TransportError(0, "request to " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw TransportError(res->status, "request to " + url + " rejected: " + res->body.substr(0, 200));
  }
  auto parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) throw TransportError(res->status, "unparsable reply from " + url);
  return parsed;
}

}  // namespace evmem
