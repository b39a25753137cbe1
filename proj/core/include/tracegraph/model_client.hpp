#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracegraph/cost.hpp"

namespace tracegraph {

enum class Role { kSystem, kUser, kAssistant, kTool };

std::string_view to_string(Role role);

struct ChatTurn {
  Role role = Role::kUser;
  std::string content;
  std::optional<std::string> tool_name;  // set on tool turns

  bool operator==(const ChatTurn&) const = default;
};

struct ToolSpec {
  std::string name;
  std::string description;
  std::vector<std::string> params;  // "name: meaning"
};

using ToolSchema = std::vector<ToolSpec>;

/// Text block listing the tools and the directive format, for prompts.
std::string describe_tools(const ToolSchema& schema);

/// One tool invocation. Argument values are strings; JSON arrays of strings
/// are joined with ','.
struct ToolCall {
  std::string tool;
  std::map<std::string, std::string> args;

  bool operator==(const ToolCall&) const = default;
};

/// An assistant turn carries at most one directive: a JSON object
/// {"tool": name, "args": {...}} alone on a line. Text before it is
/// reasoning. Returns nullopt when no line starts with '{'; throws
/// ProtocolError when the directive line is malformed or names a tool
/// outside `schema` (an empty schema accepts any name).
std::optional<ToolCall> parse_tool_call(std::string_view content, const ToolSchema& schema = {});

/// Single-line JSON rendering of a directive, parseable by parse_tool_call.
std::string format_tool_call(const ToolCall& call);

/// ceil(bytes / 4).
std::uint64_t estimate_tokens(std::string_view text);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatTurn complete(std::span<const ChatTurn> turns, double temperature,
                            const ToolSchema& tools) = 0;
  virtual std::string name() const = 0;
  /// Deterministic backends produce identical output for identical input.
  virtual bool deterministic() const = 0;
};

/// Test and replay backend. Either replays a fixed list of responses or
/// delegates to a responder function. Thread-safe.
class ScriptedBackend final : public Backend {
 public:
  using Responder =
      std::function<std::string(std::span<const ChatTurn> turns, const ToolSchema& tools)>;

  /// Replays `responses` in order. When exhausted: cycles from the start if
  /// `cycle`, otherwise throws a non-retryable BackendError.
  explicit ScriptedBackend(std::vector<std::string> responses, bool cycle = false);
  explicit ScriptedBackend(Responder responder);

  /// Script file: {"responses": [...], "cycle": bool}.
  static std::unique_ptr<ScriptedBackend> from_file(const std::string& path);

  ChatTurn complete(std::span<const ChatTurn> turns, double temperature,
                    const ToolSchema& tools) override;
  std::string name() const override { return "scripted"; }
  bool deterministic() const override { return true; }
  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> responses_;
  bool cycle_ = false;
  Responder responder_;
  std::size_t cursor_ = 0;
  std::size_t calls_ = 0;
};

struct HttpBackendConfig {
  std::string url;    // full chat-completions endpoint
  std::string model;
  std::string api_key;

  /// TRACEGRAPH_LLM_URL, TRACEGRAPH_LLM_MODEL, TRACEGRAPH_LLM_KEY.
  static HttpBackendConfig from_env();
};

/// Chat-completions client: POST {model, messages, temperature}, reads
/// choices[0].message.content. The tool schema travels in the system turn;
/// tool turns are sent as user messages tagged with the tool name.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  ChatTurn complete(std::span<const ChatTurn> turns, double temperature,
                    const ToolSchema& tools) override;
  std::string name() const override { return "http:" + config_.model; }
  bool deterministic() const override { return false; }

 private:
  HttpBackendConfig config_;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};
};

/// Calls the backend and charges `meter`: every attempt adds the estimated
/// tokens of all input turns; a successful reply adds its output tokens.
/// Retryable BackendErrors are retried with exponential backoff. Wall time
/// is only accumulated for non-deterministic backends, so scripted runs are
/// reproducible byte for byte.
ChatTurn complete_with_meter(Backend& backend, std::span<const ChatTurn> turns,
                             double temperature, const ToolSchema& tools, CostMeter& meter,
                             const RetryPolicy& retry = {});

}  // namespace tracegraph
