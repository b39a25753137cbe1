#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tracegraph {

/// Logical clock value. Unitless, unique per graph.
using Tick = std::uint64_t;
using Metadata = std::map<std::string, std::string>;

/// Handle to one version of a traced variable.
struct VarRef {
  std::string var_id;
  std::uint32_t version = 0;

  auto operator<=>(const VarRef&) const = default;
  bool operator==(const VarRef&) const = default;
};

/// "var-00003#1"
std::string to_string(const VarRef& ref);

struct Session {
  std::string session_id;
  std::string label;
  std::string comment;
  Metadata metadata;
  std::vector<std::string> operation_ids;

  bool operator==(const Session&) const = default;
};

struct OperationRecord {
  std::string op_id;
  std::string session_id;
  std::string name;
  std::string category;
  std::string comment;
  Metadata metadata;
  Tick ts_start = 0;
  Tick ts_end = 0;

  bool operator==(const OperationRecord&) const = default;
};

struct VariableVersion {
  std::uint32_t version = 0;
  Tick ts = 0;
  std::string value;
  std::string comment;
  Metadata metadata;

  bool operator==(const VariableVersion&) const = default;
};

struct VariableChain {
  std::string var_id;
  std::string identity_key;
  std::string category;
  std::vector<VariableVersion> versions;

  const VariableVersion& latest() const { return versions.back(); }
  bool operator==(const VariableChain&) const = default;
};

struct DependencyEdge {
  VarRef src;
  VarRef dst;
  std::string op_id;
  std::string comment;
  Metadata metadata;

  bool operator==(const DependencyEdge&) const = default;
};

/// The full trace of one program run.
///
/// Storage keeps insertion order (non-canonical export relies on it) and
/// hash indices for lookup. The mutators do not enforce invariants: the
/// recorder and importer are responsible for producing valid graphs, and
/// validate() reports anything that slipped through. Mutation after seal()
/// throws StateError.
class ExecutionGraph {
 public:
  ExecutionGraph() = default;
  explicit ExecutionGraph(std::string graph_id) : graph_id_(std::move(graph_id)) {}

  const std::string& graph_id() const { return graph_id_; }
  const Metadata& metadata() const { return metadata_; }
  const std::vector<Session>& sessions() const { return sessions_; }
  const std::vector<OperationRecord>& operations() const { return operations_; }
  const std::vector<VariableChain>& variables() const { return variables_; }
  const std::vector<DependencyEdge>& edges() const { return edges_; }
  Tick clock() const { return clock_; }
  bool sealed() const { return sealed_; }

  const Session* find_session(std::string_view id) const;
  const OperationRecord* find_operation(std::string_view id) const;
  const VariableChain* find_variable(std::string_view id) const;
  const VariableVersion* find_version(const VarRef& ref) const;

  /// Like find_*, but throw NotFound.
  const OperationRecord& operation(std::string_view id) const;
  const VariableChain& variable(std::string_view id) const;
  const VariableVersion& version(const VarRef& ref) const;

  std::size_t version_count() const;

  // Mutation.
  void set_graph_id(std::string id);
  Metadata& mutable_metadata();
  Session& add_session(Session session);
  OperationRecord& add_operation(OperationRecord op);
  VariableChain& add_variable(VariableChain chain);
  VariableVersion& append_version(std::string_view var_id, VariableVersion v);
  DependencyEdge& add_edge(DependencyEdge edge);
  Session& mutable_session(std::string_view id);
  OperationRecord& mutable_operation(std::string_view id);

  /// Returns the current clock value and advances it.
  Tick tick();
  void set_clock(Tick value);
  void seal() { sealed_ = true; }

  /// Structural equality: same content regardless of insertion order.
  friend bool operator==(const ExecutionGraph& a, const ExecutionGraph& b);

 private:
  void require_mutable() const;

  std::string graph_id_;
  Metadata metadata_;
  std::vector<Session> sessions_;
  std::vector<OperationRecord> operations_;
  std::vector<VariableChain> variables_;
  std::vector<DependencyEdge> edges_;
  Tick clock_ = 0;
  bool sealed_ = false;

  std::unordered_map<std::string, std::size_t> session_index_;
  std::unordered_map<std::string, std::size_t> op_index_;
  std::unordered_map<std::string, std::size_t> var_index_;
};

// ---------------------------------------------------------------------------
// Validation

enum class Severity { kError, kWarning };

struct Violation {
  Severity severity = Severity::kError;
  std::string code;    // e.g. "CYCLE_RISK"
  std::string id;      // offending object id
  std::string detail;
};

/// Codes reported by validate(). Errors unless noted.
namespace violation {
inline constexpr std::string_view kMissingEndpoint = "MISSING_ENDPOINT";
inline constexpr std::string_view kMissingOperation = "MISSING_OPERATION";
inline constexpr std::string_view kCycleRisk = "CYCLE_RISK";
inline constexpr std::string_view kSelfLoop = "SELF_LOOP";
inline constexpr std::string_view kDuplicateTimestamp = "DUPLICATE_TIMESTAMP";
inline constexpr std::string_view kDuplicateId = "DUPLICATE_ID";
inline constexpr std::string_view kVersionOrder = "VERSION_ORDER";
inline constexpr std::string_view kEmptyChain = "EMPTY_CHAIN";
inline constexpr std::string_view kOperationInterval = "OPERATION_INTERVAL";
inline constexpr std::string_view kMissingSession = "MISSING_SESSION";
inline constexpr std::string_view kSessionMember = "SESSION_MEMBER";
inline constexpr std::string_view kOperationCycle = "OPERATION_CYCLE";
inline constexpr std::string_view kNoEdges = "NO_EDGES";  // warning
}  // namespace violation

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const;  // no errors; warnings allowed
  bool empty() const { return violations.empty(); }
  std::vector<Violation> errors() const;
  std::vector<Violation> warnings() const;
  const Violation* first_error() const;
};

ValidationReport validate(const ExecutionGraph& graph);

// ---------------------------------------------------------------------------
// Queries

/// Precomputed operation-level view of a graph: In/Out per operation,
/// per-variable involvement, and the precedence DAG (a precedes b iff
/// Out(a) and In(b) share a variable version). The graph must outlive it.
class GraphIndex {
 public:
  explicit GraphIndex(const ExecutionGraph& graph);

  const ExecutionGraph& graph() const { return *graph_; }

  const std::vector<VarRef>& inputs_of(std::string_view op_id) const;
  const std::vector<VarRef>& outputs_of(std::string_view op_id) const;
  std::vector<std::string> ops_involving(std::string_view var_id,
                                         std::optional<std::uint32_t> version = {}) const;
  std::set<std::string> op_ancestors(std::span<const std::string> op_set) const;
  std::set<std::string> op_descendants(std::span<const std::string> op_set) const;

  /// Direct successors / predecessors in the precedence DAG.
  const std::vector<std::size_t>& successors(std::size_t op) const { return succ_[op]; }
  const std::vector<std::size_t>& predecessors(std::size_t op) const { return pred_[op]; }

  /// Operation position in graph().operations(), or NotFound.
  std::size_t op_position(std::string_view op_id) const;
  std::size_t op_count() const { return in_.size(); }

  /// Operations ordered by (ts_start, op_id).
  const std::vector<std::size_t>& ops_by_time() const { return by_time_; }

 private:
  std::set<std::string> closure(std::span<const std::string> op_set, bool upstream) const;

  const ExecutionGraph* graph_;
  std::vector<std::vector<VarRef>> in_;
  std::vector<std::vector<VarRef>> out_;
  std::vector<std::vector<std::size_t>> succ_;
  std::vector<std::vector<std::size_t>> pred_;
  std::vector<std::size_t> by_time_;
  // var_id -> ops (positions) touching any version, with the versions touched.
  std::unordered_map<std::string, std::vector<std::pair<std::uint32_t, std::size_t>>> involvement_;
};

std::vector<VarRef> inputs_of(const ExecutionGraph& graph, std::string_view op_id);
std::vector<VarRef> outputs_of(const ExecutionGraph& graph, std::string_view op_id);
std::vector<std::string> ops_involving(const ExecutionGraph& graph, std::string_view var_id,
                                       std::optional<std::uint32_t> version = {});
std::set<std::string> op_ancestors(const ExecutionGraph& graph,
                                   std::span<const std::string> op_set);
std::set<std::string> op_descendants(const ExecutionGraph& graph,
                                     std::span<const std::string> op_set);

}  // namespace tracegraph
