#pragma once

#include <charconv>
#include <optional>
#include <string>

#include "tracegraph/errors.hpp"
#include "tracegraph/model_client.hpp"

namespace tracegraph::tool_args {

inline std::optional<std::string> optional(const ToolCall& call, const std::string& name) {
  auto it = call.args.find(name);
  if (it == call.args.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

inline std::string required(const ToolCall& call, const std::string& name) {
  auto v = optional(call, name);
  if (!v) throw ToolError(call.tool + " needs argument '" + name + "'");
  return *v;
}

inline std::size_t number(const ToolCall& call, const std::string& name, std::size_t fallback) {
  auto v = optional(call, name);
  if (!v) return fallback;
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ToolError("argument '" + name + "' must be a non-negative integer, got '" + *v + "'");
  }
  return out;
}

}  // namespace tracegraph::tool_args
