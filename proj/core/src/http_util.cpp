#include "http_util.hpp"

#include <httplib.h>

#include "tracegraph/errors.hpp"

namespace tracegraph::detail {

namespace {

struct SplitUrl {
  std::string origin;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("URL needs a scheme: '" + url + "'");
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::string& bearer_token) {
  SplitUrl target = split_url(url);
  httplib::Client client(target.origin);
  client.set_connection_timeout(10);
  client.set_read_timeout(300);
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);

  auto res = client.Post(target.path, headers, body.dump(), "application/json");
  if (!res) {
    throw BackendError("HTTP request to " + url + " failed: " + httplib::to_string(res.error()),
                       true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw BackendError("HTTP " + std::to_string(res->status) + " from " + url, true);
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendError("HTTP " + std::to_string(res->status) + " from " + url, false);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw BackendError(std::string("unparseable response body: ") + e.what(), false);
  }
}

}  // namespace tracegraph::detail
