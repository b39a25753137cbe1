#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace tracegraph::detail {

/// POST a JSON body and parse the JSON reply. Connection failures, 429 and
/// 5xx are retryable BackendErrors; other failures are not.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::string& bearer_token);

}  // namespace tracegraph::detail
