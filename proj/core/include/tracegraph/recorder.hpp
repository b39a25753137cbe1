#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>

#include "tracegraph/graph.hpp"

namespace tracegraph {

/// Maps a rendered snapshot to the key that decides which variable chain it
/// belongs to. Must be pure.
struct IdentityStrategy {
  std::string name;
  std::function<std::string(std::string_view snapshot)> key;
};

/// Built-in strategy names.
namespace identity {
/// key = FNV-1a of the rendered text
inline constexpr std::string_view kByRender = "by-render";
/// "by-field:<name>": key = value of <name> in a key=value rendering
inline constexpr std::string_view kByFieldPrefix = "by-field:";
/// alias of by-field:id
inline constexpr std::string_view kMem0Dict = "mem0-dict";
/// every call starts a new chain
inline constexpr std::string_view kUnique = "unique";
}  // namespace identity

/// Parses "k=v" pairs separated by newlines or ';'. Returns nullopt when
/// `field` is absent.
std::optional<std::string> find_field(std::string_view rendering, std::string_view field);

struct VarConfig {
  std::string category;
  std::string comment;
  Metadata metadata;
  std::string identity = std::string(identity::kByRender);
  std::string renderer = "text";
};

/// An endpoint given by value: materialized via comment_variable first.
struct Snapshot {
  std::string text;
  VarConfig config;
};

using Endpoint = std::variant<VarRef, Snapshot>;

/// Explicit instrumentation API. Builds one ExecutionGraph.
///
/// Operations are flat: at most one is active, and every edge is attributed
/// to it. Variables are versioned by identity key (scoped per category): a
/// second comment_variable with the same key appends a version instead of
/// creating a new chain. Timestamps come from the graph's logical clock.
///
/// A context is single-threaded; record independent graphs on separate
/// contexts.
class TraceContext {
 public:
  explicit TraceContext(std::string graph_id = "graph", Metadata metadata = {});

  std::string begin_session(std::string label, std::string comment = {},
                            Metadata metadata = {});
  void end_session();

  std::string begin_operation(std::string name, std::string category,
                              std::string comment = {}, Metadata metadata = {});
  void end_operation();

  VarRef comment_variable(std::string_view snapshot, const VarConfig& config);

  /// Records src -> dst under the active operation. If the destination is an
  /// existing version that predates the source, or was not created inside the
  /// active operation, a new version carrying the same value is appended and
  /// used as the destination.
  DependencyEdge comment_link(const Endpoint& source, const Endpoint& target,
                              std::string comment = {}, Metadata metadata = {});

  void register_identity(IdentityStrategy strategy);
  void register_renderer(std::string name,
                         std::function<std::string(std::string_view)> render);

  /// Seals and hands over the graph. The context is unusable afterwards.
  ExecutionGraph finish();

  const ExecutionGraph& graph() const { return graph_; }
  const std::optional<std::string>& active_session() const { return session_; }
  const std::optional<std::string>& active_operation() const { return operation_; }

  /// RAII helper around begin_operation/end_operation.
  class OperationScope {
   public:
    OperationScope(TraceContext& ctx, std::string name, std::string category,
                   std::string comment = {}, Metadata metadata = {});
    ~OperationScope();
    OperationScope(const OperationScope&) = delete;
    OperationScope& operator=(const OperationScope&) = delete;
    const std::string& op_id() const { return op_id_; }

   private:
    TraceContext& ctx_;
    std::string op_id_;
  };

 private:
  void require_open() const;
  std::string identity_key(std::string_view strategy, std::string_view rendered) const;
  VarRef materialize(const Endpoint& endpoint);
  VarRef reversion(const VarRef& ref);

  ExecutionGraph graph_;
  bool finished_ = false;
  std::optional<std::string> session_;
  std::optional<std::string> operation_;
  std::size_t session_count_ = 0;
  std::size_t op_count_ = 0;
  std::size_t var_count_ = 0;
  std::map<std::string, IdentityStrategy, std::less<>> strategies_;
  std::map<std::string, std::function<std::string(std::string_view)>, std::less<>> renderers_;
  std::unordered_map<std::string, std::string> chain_by_key_;
};

}  // namespace tracegraph
