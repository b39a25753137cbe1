#include "tracegraph/graph.hpp"

#include <algorithm>
#include <deque>
#include <tuple>
#include <unordered_set>

#include "tracegraph/errors.hpp"

namespace tracegraph {

std::string to_string(const VarRef& ref) {
  return ref.var_id + "#" + std::to_string(ref.version);
}

// ---------------------------------------------------------------------------
// ExecutionGraph

namespace {

template <typename Map>
std::optional<std::size_t> lookup(const Map& index, std::string_view id) {
  auto it = index.find(std::string(id));
  if (it == index.end()) return std::nullopt;
  return it->second;
}

}  // namespace

const Session* ExecutionGraph::find_session(std::string_view id) const {
  auto pos = lookup(session_index_, id);
  return pos ? &sessions_[*pos] : nullptr;
}

const OperationRecord* ExecutionGraph::find_operation(std::string_view id) const {
  auto pos = lookup(op_index_, id);
  return pos ? &operations_[*pos] : nullptr;
}

const VariableChain* ExecutionGraph::find_variable(std::string_view id) const {
  auto pos = lookup(var_index_, id);
  return pos ? &variables_[*pos] : nullptr;
}

const VariableVersion* ExecutionGraph::find_version(const VarRef& ref) const {
  const VariableChain* chain = find_variable(ref.var_id);
  if (chain == nullptr || ref.version >= chain->versions.size()) return nullptr;
  const VariableVersion& v = chain->versions[ref.version];
  // Raw-built chains may have gaps; only trust a slot whose number matches.
  if (v.version != ref.version) {
    for (const auto& candidate : chain->versions) {
      if (candidate.version == ref.version) return &candidate;
    }
    return nullptr;
  }
  return &v;
}

const OperationRecord& ExecutionGraph::operation(std::string_view id) const {
  if (const auto* op = find_operation(id)) return *op;
  throw NotFound("unknown operation '" + std::string(id) + "'");
}

const VariableChain& ExecutionGraph::variable(std::string_view id) const {
  if (const auto* chain = find_variable(id)) return *chain;
  throw NotFound("unknown variable '" + std::string(id) + "'");
}

const VariableVersion& ExecutionGraph::version(const VarRef& ref) const {
  if (const auto* v = find_version(ref)) return *v;
  throw NotFound("unknown variable version '" + to_string(ref) + "'");
}

std::size_t ExecutionGraph::version_count() const {
  std::size_t n = 0;
  for (const auto& chain : variables_) n += chain.versions.size();
  return n;
}

void ExecutionGraph::require_mutable() const {
  if (sealed_) throw StateError("graph '" + graph_id_ + "' is sealed");
}

void ExecutionGraph::set_graph_id(std::string id) {
  require_mutable();
  graph_id_ = std::move(id);
}

Metadata& ExecutionGraph::mutable_metadata() {
  require_mutable();
  return metadata_;
}

Session& ExecutionGraph::add_session(Session session) {
  require_mutable();
  session_index_.try_emplace(session.session_id, sessions_.size());
  sessions_.push_back(std::move(session));
  return sessions_.back();
}

OperationRecord& ExecutionGraph::add_operation(OperationRecord op) {
  require_mutable();
  op_index_.try_emplace(op.op_id, operations_.size());
  operations_.push_back(std::move(op));
  return operations_.back();
}

VariableChain& ExecutionGraph::add_variable(VariableChain chain) {
  require_mutable();
  var_index_.try_emplace(chain.var_id, variables_.size());
  variables_.push_back(std::move(chain));
  return variables_.back();
}

VariableVersion& ExecutionGraph::append_version(std::string_view var_id, VariableVersion v) {
  require_mutable();
  auto pos = lookup(var_index_, var_id);
  if (!pos) throw NotFound("unknown variable '" + std::string(var_id) + "'");
  auto& versions = variables_[*pos].versions;
  versions.push_back(std::move(v));
  return versions.back();
}

DependencyEdge& ExecutionGraph::add_edge(DependencyEdge edge) {
  require_mutable();
  edges_.push_back(std::move(edge));
  return edges_.back();
}

Session& ExecutionGraph::mutable_session(std::string_view id) {
  require_mutable();
  auto pos = lookup(session_index_, id);
  if (!pos) throw NotFound("unknown session '" + std::string(id) + "'");
  return sessions_[*pos];
}

OperationRecord& ExecutionGraph::mutable_operation(std::string_view id) {
  require_mutable();
  auto pos = lookup(op_index_, id);
  if (!pos) throw NotFound("unknown operation '" + std::string(id) + "'");
  return operations_[*pos];
}

Tick ExecutionGraph::tick() {
  require_mutable();
  return clock_++;
}

void ExecutionGraph::set_clock(Tick value) {
  require_mutable();
  clock_ = value;
}

namespace {

template <typename T, typename Key>
std::vector<const T*> sorted_by(const std::vector<T>& items, Key key) {
  std::vector<const T*> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(&item);
  std::sort(out.begin(), out.end(), [&](const T* a, const T* b) { return key(*a) < key(*b); });
  return out;
}

template <typename T, typename Key>
bool same_items(const std::vector<T>& a, const std::vector<T>& b, Key key) {
  if (a.size() != b.size()) return false;
  auto sa = sorted_by(a, key);
  auto sb = sorted_by(b, key);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (!(*sa[i] == *sb[i])) return false;
  }
  return true;
}

auto edge_key(const DependencyEdge& e) {
  return std::tie(e.src, e.dst, e.op_id, e.comment, e.metadata);
}

}  // namespace

bool operator==(const ExecutionGraph& a, const ExecutionGraph& b) {
  return a.graph_id_ == b.graph_id_ && a.metadata_ == b.metadata_ &&
         same_items(a.sessions_, b.sessions_, [](const Session& s) { return s.session_id; }) &&
         same_items(a.operations_, b.operations_,
                    [](const OperationRecord& o) { return o.op_id; }) &&
         same_items(a.variables_, b.variables_,
                    [](const VariableChain& v) { return v.var_id; }) &&
         same_items(a.edges_, b.edges_, edge_key);
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::ok() const { return first_error() == nullptr; }

std::vector<Violation> ValidationReport::errors() const {
  std::vector<Violation> out;
  for (const auto& v : violations) {
    if (v.severity == Severity::kError) out.push_back(v);
  }
  return out;
}

std::vector<Violation> ValidationReport::warnings() const {
  std::vector<Violation> out;
  for (const auto& v : violations) {
    if (v.severity == Severity::kWarning) out.push_back(v);
  }
  return out;
}

const Violation* ValidationReport::first_error() const {
  for (const auto& v : violations) {
    if (v.severity == Severity::kError) return &v;
  }
  return nullptr;
}

namespace {

class ReportBuilder {
 public:
  void error(std::string_view code, std::string id, std::string detail) {
    report_.violations.push_back(
        {Severity::kError, std::string(code), std::move(id), std::move(detail)});
  }
  void warning(std::string_view code, std::string id, std::string detail) {
    report_.violations.push_back(
        {Severity::kWarning, std::string(code), std::move(id), std::move(detail)});
  }
  ValidationReport take() { return std::move(report_); }
  bool has_errors() const { return report_.first_error() != nullptr; }

 private:
  ValidationReport report_;
};

// Kahn's algorithm; returns true if the precedence DAG has a cycle.
bool has_operation_cycle(const GraphIndex& index, std::string* witness) {
  const std::size_t n = index.op_count();
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i) indegree[i] = index.predecessors(i).size();
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::size_t seen = 0;
  while (!ready.empty()) {
    std::size_t op = ready.front();
    ready.pop_front();
    ++seen;
    for (std::size_t next : index.successors(op)) {
      if (--indegree[next] == 0) ready.push_back(next);
    }
  }
  if (seen == n) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] != 0) {
      *witness = index.graph().operations()[i].op_id;
      break;
    }
  }
  return true;
}

}  // namespace

ValidationReport validate(const ExecutionGraph& graph) {
  ReportBuilder report;

  std::unordered_set<std::string> seen_ids;
  auto check_unique = [&](const std::string& kind, const std::string& id) {
    if (!seen_ids.insert(kind + ":" + id).second) {
      report.error(violation::kDuplicateId, id, "duplicate " + kind + " id");
    }
  };

  std::unordered_map<Tick, std::string> ts_owner;
  auto claim_ts = [&](Tick ts, const std::string& owner) {
    auto [it, inserted] = ts_owner.try_emplace(ts, owner);
    if (!inserted) {
      report.error(violation::kDuplicateTimestamp, owner,
                   "timestamp " + std::to_string(ts) + " already used by " + it->second);
    }
  };

  for (const auto& session : graph.sessions()) {
    check_unique("session", session.session_id);
    std::unordered_set<std::string> members;
    for (const auto& op_id : session.operation_ids) {
      if (graph.find_operation(op_id) == nullptr) {
        report.error(violation::kSessionMember, session.session_id,
                     "member operation '" + op_id + "' does not exist");
      } else if (!members.insert(op_id).second) {
        report.error(violation::kSessionMember, session.session_id,
                     "member operation '" + op_id + "' listed twice");
      }
    }
  }

  for (const auto& op : graph.operations()) {
    check_unique("operation", op.op_id);
    if (op.ts_start > op.ts_end) {
      report.error(violation::kOperationInterval, op.op_id, "ts_start > ts_end");
    }
    if (graph.find_session(op.session_id) == nullptr) {
      report.error(violation::kMissingSession, op.op_id,
                   "session '" + op.session_id + "' does not exist");
    }
    claim_ts(op.ts_start, op.op_id);
    if (op.ts_end != op.ts_start) claim_ts(op.ts_end, op.op_id);
  }

  for (const auto& chain : graph.variables()) {
    check_unique("variable", chain.var_id);
    if (chain.versions.empty()) {
      report.error(violation::kEmptyChain, chain.var_id, "variable has no versions");
      continue;
    }
    for (std::size_t i = 0; i < chain.versions.size(); ++i) {
      const auto& v = chain.versions[i];
      const std::string ref = chain.var_id + "#" + std::to_string(v.version);
      if (v.version != i) {
        report.error(violation::kVersionOrder, ref, "version numbers must be 0,1,2,...");
      }
      if (i > 0 && v.ts <= chain.versions[i - 1].ts) {
        report.error(violation::kVersionOrder, ref, "version timestamps must increase");
      }
      claim_ts(v.ts, ref);
    }
  }

  for (std::size_t i = 0; i < graph.edges().size(); ++i) {
    const auto& e = graph.edges()[i];
    const std::string id = to_string(e.src) + "->" + to_string(e.dst);
    if (graph.find_operation(e.op_id) == nullptr) {
      report.error(violation::kMissingOperation, id,
                   "edge operation '" + e.op_id + "' does not exist");
    }
    if (e.src == e.dst) {
      report.error(violation::kSelfLoop, id, "edge source equals destination");
      continue;
    }
    const auto* src = graph.find_version(e.src);
    const auto* dst = graph.find_version(e.dst);
    if (src == nullptr) {
      report.error(violation::kMissingEndpoint, id, "source " + to_string(e.src) + " missing");
    }
    if (dst == nullptr) {
      report.error(violation::kMissingEndpoint, id,
                   "destination " + to_string(e.dst) + " missing");
    }
    if (src != nullptr && dst != nullptr && dst->ts <= src->ts) {
      report.error(violation::kCycleRisk, id,
                   "destination timestamp " + std::to_string(dst->ts) +
                       " is not after source timestamp " + std::to_string(src->ts));
    }
  }

  if (!report.has_errors()) {
    GraphIndex index(graph);
    std::string witness;
    if (has_operation_cycle(index, &witness)) {
      report.error(violation::kOperationCycle, witness,
                   "operation precedence contains a cycle");
    }
    for (std::size_t i = 0; i < index.op_count(); ++i) {
      const auto& op = graph.operations()[i];
      if (index.inputs_of(op.op_id).empty() && index.outputs_of(op.op_id).empty()) {
        report.warning(violation::kNoEdges, op.op_id, "operation recorded no edges");
      }
    }
  }

  return report.take();
}

// ---------------------------------------------------------------------------
// GraphIndex

GraphIndex::GraphIndex(const ExecutionGraph& graph)
    : graph_(&graph),
      in_(graph.operations().size()),
      out_(graph.operations().size()),
      succ_(graph.operations().size()),
      pred_(graph.operations().size()) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < graph.operations().size(); ++i) {
    pos.try_emplace(graph.operations()[i].op_id, i);
  }

  std::map<VarRef, std::vector<std::size_t>> producers;
  std::map<VarRef, std::vector<std::size_t>> consumers;
  for (const auto& e : graph.edges()) {
    auto it = pos.find(e.op_id);
    if (it == pos.end()) continue;
    in_[it->second].push_back(e.src);
    out_[it->second].push_back(e.dst);
    consumers[e.src].push_back(it->second);
    producers[e.dst].push_back(it->second);
  }

  auto normalize = [](std::vector<VarRef>& refs) {
    std::sort(refs.begin(), refs.end());
    refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
  };
  for (std::size_t i = 0; i < in_.size(); ++i) {
    normalize(in_[i]);
    normalize(out_[i]);
    for (const auto& ref : in_[i]) involvement_[ref.var_id].emplace_back(ref.version, i);
    for (const auto& ref : out_[i]) involvement_[ref.var_id].emplace_back(ref.version, i);
  }

  for (const auto& [ref, makers] : producers) {
    auto it = consumers.find(ref);
    if (it == consumers.end()) continue;
    for (std::size_t a : makers) {
      for (std::size_t b : it->second) {
        if (a != b) {
          succ_[a].push_back(b);
          pred_[b].push_back(a);
        }
      }
    }
  }
  for (auto* adj : {&succ_, &pred_}) {
    for (auto& list : *adj) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
  }

  by_time_.resize(graph.operations().size());
  for (std::size_t i = 0; i < by_time_.size(); ++i) by_time_[i] = i;
  const auto& ops = graph.operations();
  std::sort(by_time_.begin(), by_time_.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(ops[a].ts_start, ops[a].op_id) < std::tie(ops[b].ts_start, ops[b].op_id);
  });
}

std::size_t GraphIndex::op_position(std::string_view op_id) const {
  const auto* op = graph_->find_operation(op_id);
  if (op == nullptr) throw NotFound("unknown operation '" + std::string(op_id) + "'");
  return static_cast<std::size_t>(op - graph_->operations().data());
}

const std::vector<VarRef>& GraphIndex::inputs_of(std::string_view op_id) const {
  return in_[op_position(op_id)];
}

const std::vector<VarRef>& GraphIndex::outputs_of(std::string_view op_id) const {
  return out_[op_position(op_id)];
}

std::vector<std::string> GraphIndex::ops_involving(std::string_view var_id,
                                                   std::optional<std::uint32_t> version) const {
  if (graph_->find_variable(var_id) == nullptr) {
    throw NotFound("unknown variable '" + std::string(var_id) + "'");
  }
  std::vector<std::size_t> found;
  auto it = involvement_.find(std::string(var_id));
  if (it != involvement_.end()) {
    for (const auto& [v, op] : it->second) {
      if (!version || *version == v) found.push_back(op);
    }
  }
  std::sort(found.begin(), found.end());
  found.erase(std::unique(found.begin(), found.end()), found.end());
  const auto& ops = graph_->operations();
  std::sort(found.begin(), found.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(ops[a].ts_start, ops[a].op_id) < std::tie(ops[b].ts_start, ops[b].op_id);
  });
  std::vector<std::string> ids;
  ids.reserve(found.size());
  for (std::size_t op : found) ids.push_back(ops[op].op_id);
  return ids;
}

std::set<std::string> GraphIndex::closure(std::span<const std::string> op_set,
                                          bool upstream) const {
  std::vector<char> start(op_count(), 0);
  std::vector<char> reached(op_count(), 0);
  std::deque<std::size_t> frontier;
  for (const auto& id : op_set) {
    std::size_t p = op_position(id);
    start[p] = 1;
    frontier.push_back(p);
  }
  while (!frontier.empty()) {
    std::size_t op = frontier.front();
    frontier.pop_front();
    for (std::size_t next : upstream ? pred_[op] : succ_[op]) {
      if (!reached[next]) {
        reached[next] = 1;
        frontier.push_back(next);
      }
    }
  }
  std::set<std::string> result;
  for (std::size_t i = 0; i < reached.size(); ++i) {
    if (reached[i] && !start[i]) result.insert(graph_->operations()[i].op_id);
  }
  return result;
}

std::set<std::string> GraphIndex::op_ancestors(std::span<const std::string> op_set) const {
  return closure(op_set, true);
}

std::set<std::string> GraphIndex::op_descendants(std::span<const std::string> op_set) const {
  return closure(op_set, false);
}

std::vector<VarRef> inputs_of(const ExecutionGraph& graph, std::string_view op_id) {
  return GraphIndex(graph).inputs_of(op_id);
}

std::vector<VarRef> outputs_of(const ExecutionGraph& graph, std::string_view op_id) {
  return GraphIndex(graph).outputs_of(op_id);
}

std::vector<std::string> ops_involving(const ExecutionGraph& graph, std::string_view var_id,
                                       std::optional<std::uint32_t> version) {
  return GraphIndex(graph).ops_involving(var_id, version);
}

std::set<std::string> op_ancestors(const ExecutionGraph& graph,
                                   std::span<const std::string> op_set) {
  return GraphIndex(graph).op_ancestors(op_set);
}

std::set<std::string> op_descendants(const ExecutionGraph& graph,
                                     std::span<const std::string> op_set) {
  return GraphIndex(graph).op_descendants(op_set);
}

}  // namespace tracegraph
