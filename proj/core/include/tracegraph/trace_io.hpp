#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "tracegraph/graph.hpp"

namespace tracegraph {

inline constexpr std::string_view kTraceFormatVersion = "tracegraph/1";

/// Serialize a sealed graph as a TraceFileV1 JSON document.
///
/// canonical=true sorts every array (sessions by first member ts, operations
/// by ts_start, variables by first version ts, edges by (dst ts, src ts),
/// ties by id) so equal graphs produce identical bytes. canonical=false keeps
/// insertion order. Throws StateError for unsealed graphs.
std::string export_trace(const ExecutionGraph& graph, bool canonical = true);

struct ImportOptions {
  /// Reject documents whose graph fails validate() (ValidationError with the
  /// first error code). Turn off to inspect broken files.
  bool validate = true;
};

/// Parse a TraceFileV1 document into a sealed graph. Malformed JSON or a
/// wrong schema throws ParseError.
ExecutionGraph import_trace(std::string_view document, ImportOptions options = {});

ExecutionGraph load_trace_file(const std::string& path, ImportOptions options = {});
void save_trace_file(const ExecutionGraph& graph, const std::string& path,
                     bool canonical = true);

struct DotOptions {
  std::size_t max_value_chars = 40;
};

/// Graphviz text: one ellipse per variable version, one box per operation,
/// edges routed source -> operation -> destination.
std::string export_dot(const ExecutionGraph& graph, DotOptions options = {});

}  // namespace tracegraph
