#pragma once

#include <functional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracegraph/agent.hpp"
#include "tracegraph/graph.hpp"

namespace tracegraph {

/// Criterion shown to attribution agents, so judge behaviour can be audited
/// against the checker below.
inline constexpr std::string_view kDecisiveErrorCriterion =
    "The decisive error is the earliest operation whose output is wrong, such that "
    "correcting that output (with every downstream operation then running ideally) "
    "turns the final answer correct. Every operation upstream of it must be correct. "
    "If several operations are wrong, report the one that comes first in execution order.";

using OpSet = std::set<std::string>;

class FaultOracle {
 public:
  virtual ~FaultOracle() = default;
  virtual bool is_faulty(std::string_view op_id) const = 0;
};

/// outcome(graph, {}) is the observed result; 1 means failure.
class OutcomeOracle {
 public:
  virtual ~OutcomeOracle() = default;
  virtual int outcome(const ExecutionGraph& graph, const OpSet& intervention) const = 0;
};

class LambdaFaultOracle final : public FaultOracle {
 public:
  explicit LambdaFaultOracle(std::function<bool(std::string_view)> fn) : fn_(std::move(fn)) {}
  bool is_faulty(std::string_view op_id) const override { return fn_(op_id); }

 private:
  std::function<bool(std::string_view)> fn_;
};

class LambdaOutcomeOracle final : public OutcomeOracle {
 public:
  explicit LambdaOutcomeOracle(std::function<int(const ExecutionGraph&, const OpSet&)> fn)
      : fn_(std::move(fn)) {}
  int outcome(const ExecutionGraph& graph, const OpSet& intervention) const override {
    return fn_(graph, intervention);
  }

 private:
  std::function<int(const ExecutionGraph&, const OpSet&)> fn_;
};

struct CutSetVerdict {
  OpSet candidate;
  bool all_faulty = false;
  bool ancestors_correct = false;
  bool rescues = false;

  bool valid() const { return all_faulty && ancestors_correct && rescues; }
};

CutSetVerdict check_candidate(const GraphIndex& index, const OpSet& candidate,
                              const FaultOracle& faults, const OutcomeOracle& outcome);
CutSetVerdict check_candidate(const ExecutionGraph& graph, const OpSet& candidate,
                              const FaultOracle& faults, const OutcomeOracle& outcome);

/// Every valid candidate with no valid strict subset, in enumeration order
/// (size, then lexicographic over sorted op ids). Throws TooLarge when the
/// graph has more than `max_ops` operations.
std::vector<OpSet> brute_force_decisive_sets(const ExecutionGraph& graph,
                                             const FaultOracle& faults,
                                             const OutcomeOracle& outcome,
                                             std::size_t max_ops = 12);

/// True when no two operation intervals overlap.
bool is_strictly_sequential(const ExecutionGraph& graph);

/// Earliest faulty operation (by ts_start) whose singleton is a valid cut.
/// Throws NotSequential when intervals overlap, NoFault when there is none.
std::string singleton_decisive(const ExecutionGraph& graph, const FaultOracle& faults,
                               const OutcomeOracle& outcome);

struct Truth {
  std::string case_id;
  std::string op_id;
  ErrorType error_type = ErrorType::kResponse;
};

struct Scores {
  double eta = 0.0;  // error-type accuracy
  double oia = 0.0;  // faulty-operation accuracy
  double mean_tokens_k = 0.0;
  double mean_minutes = 0.0;
  std::size_t n = 0;
};

/// Results are matched to truths by case id; a result without a truth
/// throws NotFound. Empty input scores all zeros.
Scores score(std::span<const AttributionResult> results, std::span<const Truth> truths);

}  // namespace tracegraph
