#include "tracegraph/model_client.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "tracegraph/errors.hpp"
#include "tracegraph/text_util.hpp"

namespace tracegraph {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
    case Role::kTool: return "tool";
  }
  return "user";
}

std::string describe_tools(const ToolSchema& schema) {
  std::ostringstream out;
  out << "TOOLS\n";
  for (const auto& tool : schema) {
    out << "- " << tool.name << ": " << tool.description << "\n";
    for (const auto& p : tool.params) out << "    " << p << "\n";
  }
  out << "Invoke exactly one tool per reply by ending the reply with a single line of JSON:\n"
      << R"({"tool": "<name>", "args": {"<param>": "<value>"}})" << "\n";
  return out.str();
}

std::optional<ToolCall> parse_tool_call(std::string_view content, const ToolSchema& schema) {
  std::string_view directive;
  std::string_view rest = content;
  while (!rest.empty()) {
    auto nl = rest.find('\n');
    std::string_view line = text::trim(rest.substr(0, nl));
    if (line.starts_with('{')) directive = line;
    rest.remove_prefix(nl == std::string_view::npos ? rest.size() : nl + 1);
  }
  if (directive.empty()) return std::nullopt;

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(directive);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(std::string("tool directive is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("tool") || !j["tool"].is_string()) {
    throw ProtocolError("tool directive needs a string \"tool\" field");
  }
  ToolCall call{j["tool"].get<std::string>(), {}};
  if (!schema.empty()) {
    bool known = false;
    for (const auto& spec : schema) known = known || spec.name == call.tool;
    if (!known) throw ProtocolError("unknown tool '" + call.tool + "'");
  }
  if (j.contains("args")) {
    const auto& args = j["args"];
    if (!args.is_object()) throw ProtocolError("tool directive \"args\" must be an object");
    for (auto it = args.begin(); it != args.end(); ++it) {
      const auto& v = it.value();
      std::string value;
      if (v.is_string()) {
        value = v.get<std::string>();
      } else if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i > 0) value += ',';
          value += v[i].is_string() ? v[i].get<std::string>() : v[i].dump();
        }
      } else {
        value = v.dump();
      }
      call.args.emplace(it.key(), std::move(value));
    }
  }
  return call;
}

std::string format_tool_call(const ToolCall& call) {
  nlohmann::ordered_json j;
  j["tool"] = call.tool;
  j["args"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : call.args) j["args"][k] = v;
  return j.dump();
}

std::uint64_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

// ---------------------------------------------------------------------------
// ScriptedBackend

ScriptedBackend::ScriptedBackend(std::vector<std::string> responses, bool cycle)
    : responses_(std::move(responses)), cycle_(cycle) {}

ScriptedBackend::ScriptedBackend(Responder responder) : responder_(std::move(responder)) {}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open script '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("script '" + path + "': " + e.what());
  }
  if (!j.is_object() || !j.contains("responses") || !j["responses"].is_array()) {
    throw ConfigError("script '" + path + "' needs a \"responses\" array");
  }
  std::vector<std::string> responses;
  for (const auto& r : j["responses"]) {
    if (!r.is_string()) throw ConfigError("script responses must be strings");
    responses.push_back(r.get<std::string>());
  }
  bool cycle = j.value("cycle", false);
  return std::make_unique<ScriptedBackend>(std::move(responses), cycle);
}

ChatTurn ScriptedBackend::complete(std::span<const ChatTurn> turns, double /*temperature*/,
                                   const ToolSchema& tools) {
  std::lock_guard lock(mu_);
  ++calls_;
  if (responder_) return ChatTurn{Role::kAssistant, responder_(turns, tools), std::nullopt};
  if (cursor_ >= responses_.size()) {
    if (!cycle_ || responses_.empty()) throw BackendError("script exhausted", false);
    cursor_ = 0;
  }
  return ChatTurn{Role::kAssistant, responses_[cursor_++], std::nullopt};
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

// ---------------------------------------------------------------------------
// HttpBackend

HttpBackendConfig HttpBackendConfig::from_env() {
  auto get = [](const char* name) {
    const char* v = std::getenv(name);
    return std::string(v ? v : "");
  };
  HttpBackendConfig config{get("TRACEGRAPH_LLM_URL"), get("TRACEGRAPH_LLM_MODEL"),
                           get("TRACEGRAPH_LLM_KEY")};
  if (config.url.empty()) throw ConfigError("TRACEGRAPH_LLM_URL is not set");
  return config;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.url.empty()) throw ConfigError("HTTP backend needs a URL");
}

ChatTurn HttpBackend::complete(std::span<const ChatTurn> turns, double temperature,
                               const ToolSchema& tools) {
  nlohmann::json messages = nlohmann::json::array();
  bool schema_sent = tools.empty();
  for (const auto& turn : turns) {
    nlohmann::json m;
    std::string content = turn.content;
    if (turn.role == Role::kTool) {
      m["role"] = "user";
      content = "[tool result: " + turn.tool_name.value_or("?") + "]\n" + content;
    } else {
      m["role"] = std::string(to_string(turn.role));
    }
    if (turn.role == Role::kSystem && !schema_sent) {
      content += "\n\n" + describe_tools(tools);
      schema_sent = true;
    }
    m["content"] = std::move(content);
    messages.push_back(std::move(m));
  }
  if (!schema_sent) {
    messages.insert(messages.begin(), {{"role", "system"}, {"content", describe_tools(tools)}});
  }

  nlohmann::json request;
  request["model"] = config_.model;
  request["messages"] = std::move(messages);
  request["temperature"] = temperature;

  nlohmann::json response = detail::post_json(config_.url, request, config_.api_key);
  try {
    return ChatTurn{Role::kAssistant,
                    response.at("choices").at(0).at("message").at("content").get<std::string>(),
                    std::nullopt};
  } catch (const nlohmann::json::exception&) {
    throw BackendError("response lacks choices[0].message.content", false);
  }
}

// ---------------------------------------------------------------------------

ChatTurn complete_with_meter(Backend& backend, std::span<const ChatTurn> turns,
                             double temperature, const ToolSchema& tools, CostMeter& meter,
                             const RetryPolicy& retry) {
  std::uint64_t input = 0;
  for (const auto& turn : turns) input += estimate_tokens(turn.content);

  const bool timed = !backend.deterministic();
  for (int attempt = 0;; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    meter.input_tokens += input;
    try {
      ChatTurn reply = backend.complete(turns, temperature, tools);
      if (timed) {
        meter.wall_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      meter.output_tokens += estimate_tokens(reply.content);
      return reply;
    } catch (const BackendError& e) {
      if (timed) {
        meter.wall_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      if (!e.retryable() || attempt >= retry.max_retries) throw;
      std::this_thread::sleep_for(retry.base_delay * (1LL << attempt));
    }
  }
}

}  // namespace tracegraph
