#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tracegraph/agent.hpp"
#include "tracegraph/explorer.hpp"
#include "tracegraph/graph.hpp"

namespace tracegraph {

inline constexpr std::string_view kBlockSeparator = "===== OPERATION BLOCK =====";

struct BlockEntry {
  std::string category;
  std::uint32_t version = 0;
  std::string value;
};

/// One operation flattened to text: attributes and variable values, with no
/// edges and no variable ids.
struct OperationBlock {
  std::size_t index = 0;
  std::string op_id;
  std::string name;
  std::string category;
  std::string comment;
  Metadata metadata;
  std::vector<BlockEntry> inputs;
  std::vector<BlockEntry> outputs;
  /// Variables the op both reads and writes (any versions).
  std::vector<BlockEntry> intermediates;
  std::string text;
};

struct OperationLog {
  std::vector<OperationBlock> blocks;

  /// Concatenated block texts, each starting with the separator line.
  std::string text() const;
};

/// One block per operation in (ts_start, op_id) order.
OperationLog build_log(const ExecutionGraph& graph);

struct BlockHit {
  std::size_t block_index = 0;
  std::string op_id;
  std::vector<std::string> excerpts;  // up to 3, 120 code points each

  bool operator==(const BlockHit&) const = default;
};

/// Blocks whose text matches the POSIX extended regex, ascending index, at
/// most `limit`. Throws ToolError for an invalid pattern.
std::vector<BlockHit> search_operations(const OperationLog& log, std::string_view pattern,
                                        std::size_t limit = 8);

class ObsEnvironment final : public ToolEnvironment {
 public:
  ObsEnvironment(const ExecutionGraph& graph, const ExploreConfig& config);

  const ToolSchema& schema() const override { return tool_schema(); }
  StepResult step(const ToolCall& call) override;

  const OperationLog& log() const { return log_; }
  static const ToolSchema& tool_schema();

 private:
  const ExecutionGraph& graph_;
  ExploreConfig config_;
  OperationLog log_;
};

std::string obs_instruction(const ExploreConfig& config);
std::string obs_case_text(const ExecutionGraph& graph, const CaseSpec& spec,
                          const OperationLog& log);

AttributionResult run_attribution_obs(const ExecutionGraph& graph, const CaseSpec& spec,
                                      Backend& backend, const ExploreConfig& config = {});

}  // namespace tracegraph
