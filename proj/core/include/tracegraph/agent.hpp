#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tracegraph/cost.hpp"
#include "tracegraph/graph.hpp"
#include "tracegraph/model_client.hpp"
#include "tracegraph/taxonomy.hpp"

namespace tracegraph {

/// What the agent is told about one failed case. Truth fields are optional
/// and never shown to the agent.
struct CaseSpec {
  std::string case_id;
  VarRef question_var;
  std::string golden_answer;
  std::string prediction;
  std::vector<std::string> evidence_var_ids;
  std::optional<std::string> truth_op_id;
  std::optional<ErrorType> truth_error_type;
};

enum class Termination { kReport, kBudget };

std::string_view to_string(Termination t);

struct FaultReport {
  std::string op_id;
  ErrorType error_type = ErrorType::kResponse;
  std::string explanation;
};

struct AttributionResult {
  std::string case_id;
  std::string method;  // "graph" or "obs"
  std::string predicted_op_id;            // empty on budget exhaustion
  std::optional<ErrorType> error_type;    // empty on budget exhaustion
  std::string explanation;
  CostMeter meter;
  std::size_t iterations = 0;
  Termination terminated_by = Termination::kBudget;
  /// Largest context estimate seen after a management pass.
  std::uint64_t peak_context_tokens = 0;
  /// Every turn in order, before any summarization. Not serialized.
  std::vector<ChatTurn> transcript;
};

nlohmann::ordered_json to_json(const CaseSpec& spec);
CaseSpec case_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const AttributionResult& result);
AttributionResult result_from_json(const nlohmann::json& j);
nlohmann::ordered_json transcript_json(const std::vector<ChatTurn>& turns);

/// Turns the agent sees. The first `pinned` turns (instruction and case
/// statement) are never summarized away.
struct WorkingContext {
  std::vector<ChatTurn> turns;
  std::size_t pinned = 0;

  std::uint64_t estimate() const;
};

inline constexpr std::size_t kKeepRecentTurns = 4;

/// If the estimate exceeds `threshold`, replaces the unpinned turns older
/// than the most recent four with one "SUMMARY: ..." assistant turn written
/// by `backend`, then trims the summary (and, as a last resort, the tails of
/// the recent turns) until the estimate fits. Throws ConfigError when the
/// pinned prefix alone exceeds the threshold.
WorkingContext manage_context(WorkingContext ctx, Backend& backend, std::uint64_t threshold,
                              CostMeter& meter, double temperature = 1.0,
                              const RetryPolicy& retry = {});

/// Outcome of applying one tool call.
struct StepResult {
  std::string observation;
  std::optional<FaultReport> report;
};

/// A tool surface the agent loop drives.
class ToolEnvironment {
 public:
  virtual ~ToolEnvironment() = default;
  virtual const ToolSchema& schema() const = 0;
  /// Must not throw for agent mistakes: errors become observations.
  virtual StepResult step(const ToolCall& call) = 0;
};

struct LoopSettings {
  std::size_t max_iters = 200;
  std::uint64_t context_threshold = 272000;
  double temperature = 1.0;
  RetryPolicy retry;
};

/// Runs assistant turns until a report_fault or `max_iters` turns. Throws
/// RunError (with the partial meter) when the backend fails for good.
AttributionResult run_agent_loop(ToolEnvironment& env, const std::string& system_text,
                                 const std::string& case_text, Backend& backend,
                                 const LoopSettings& settings, std::string case_id,
                                 std::string method);

}  // namespace tracegraph
