#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "tracegraph/agent.hpp"
#include "tracegraph/graph.hpp"
#include "tracegraph/model_client.hpp"
#include "tracegraph/retrieval.hpp"

namespace tracegraph {

struct ExploreConfig {
  std::size_t capacity = 16;  // N
  std::uint64_t context_threshold = 272000;  // T
  std::size_t max_iters = 200;
  double temperature = 1.0;
  std::size_t page_size_chars = 4000;
  std::size_t search_limit = 8;
  /// Replaces retrieval seeding when set.
  std::optional<std::vector<VarRef>> seeds;
  /// Appended to the system instruction when non-empty.
  std::string prior_knowledge;
  RetryPolicy retry;
  /// Dense half of seed retrieval; the hashing embedder when null.
  std::shared_ptr<const retrieval::EmbeddingProvider> embedder;

  /// Throws ConfigError unless capacity >= 2, max_iters >= 1, page size >= 1.
  void check() const;
};

/// Bounded earliest-first work list. Entries are ordered by (timestamp,
/// var_id, version); a full list rejects insertions instead of evicting.
class ToExploreList {
 public:
  enum class AddStatus { kAccepted, kFull, kExplored, kQueued };

  explicit ToExploreList(std::size_t capacity) : capacity_(capacity) {}

  AddStatus add(const VarRef& ref, Tick ts);
  /// Removes and returns the earliest entry, or nullopt when empty.
  std::optional<std::pair<VarRef, Tick>> pop();

  std::size_t size() const { return queue_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return queue_.empty(); }
  bool queued(const VarRef& ref) const;
  bool explored(const VarRef& ref) const { return explored_.count(ref) > 0; }
  /// Queued entries, earliest first.
  std::vector<std::pair<VarRef, Tick>> entries() const;

 private:
  using Key = std::tuple<Tick, std::string, std::uint32_t>;
  std::size_t capacity_;
  std::set<Key> queue_;
  std::set<VarRef> explored_;
};

std::string_view to_string(ToExploreList::AddStatus status);

enum class RenderMode { kPreview, kFull };

/// Text view of one operation: header fields, then INPUTS, OUTPUTS and
/// DEPENDENCIES sections with entries sorted by id. Preview omits every
/// variable value. The text is split into pages of `page_size_chars` code
/// points. Throws NotFound for an unknown op, RangeError for a bad page.
std::string render_operation_subgraph(const GraphIndex& index, std::string_view op_id,
                                      RenderMode mode, std::size_t page = 0,
                                      std::size_t page_size_chars = 4000);
/// Number of pages the rendering spans.
std::size_t operation_page_count(const GraphIndex& index, std::string_view op_id,
                                 RenderMode mode, std::size_t page_size_chars = 4000);

/// One page of a variable value. Throws NotFound / RangeError.
std::string read_variable(const ExecutionGraph& graph, const VarRef& ref, std::size_t page = 0,
                          std::size_t page_size_chars = 4000);
std::size_t variable_page_count(const ExecutionGraph& graph, const VarRef& ref,
                                std::size_t page_size_chars = 4000);

struct SearchHit {
  std::size_t offset = 0;  // byte offset of the match
  std::string excerpt;     // 80 code points starting 20 before the match

  bool operator==(const SearchHit&) const = default;
};

/// Up to `max_hits` non-overlapping, non-empty matches of a POSIX extended
/// regex in the value. Throws ToolError for an invalid pattern.
std::vector<SearchHit> search_variable(const ExecutionGraph& graph, const VarRef& ref,
                                       std::string_view pattern, std::size_t max_hits);

/// "var-00001#2", or "var-00001" for the latest version. Throws ToolError on
/// malformed text and NotFound for unknown variables or versions.
VarRef parse_var_ref(const ExecutionGraph& graph, std::string_view text);

/// The tool surface of the graph explorer.
class ExplorerEnvironment final : public ToolEnvironment {
 public:
  ExplorerEnvironment(const ExecutionGraph& graph, const ExploreConfig& config);

  const ToolSchema& schema() const override { return schema_; }
  StepResult step(const ToolCall& call) override;

  /// Queues seeds; returns how many were accepted.
  std::size_t seed(const std::vector<VarRef>& refs);
  const ToExploreList& list() const { return list_; }
  const std::vector<VarRef>& popped() const { return popped_; }

  static const ToolSchema& tool_schema();

 private:
  std::string pop_next();
  std::string list_ops(const ToolCall& call);
  std::string view_op(const ToolCall& call);
  std::string read_var(const ToolCall& call);
  std::string search_var(const ToolCall& call);
  std::string add_to_explore(const ToolCall& call);
  StepResult report_fault(const ToolCall& call);

  const ExecutionGraph& graph_;
  GraphIndex index_;
  ExploreConfig config_;
  ToolSchema schema_;
  ToExploreList list_;
  std::vector<VarRef> popped_;
};

/// Report-side argument checks shared by both explorers: op must exist, type
/// must parse. Throws ToolError.
FaultReport parse_fault_report(const ExecutionGraph& graph, const ToolCall& call);

/// Evidence variables (latest versions) followed by the question.
std::vector<VarRef> source_evidence_seeds(const ExecutionGraph& graph, const CaseSpec& spec);

/// "ERROR TYPES" block listing every type with its definition.
std::string error_type_guide();

std::string explorer_instruction(const ExploreConfig& config);
std::string explorer_case_text(const ExecutionGraph& graph, const CaseSpec& spec,
                               const ToExploreList& list);

/// Seeds the list, then drives the agent loop until a report or the budget.
AttributionResult run_attribution(const ExecutionGraph& graph, const CaseSpec& spec,
                                  Backend& backend, const ExploreConfig& config = {});

}  // namespace tracegraph
