#include "tracegraph/attribution.hpp"

#include <algorithm>
#include <map>

#include "tracegraph/errors.hpp"

namespace tracegraph {

CutSetVerdict check_candidate(const GraphIndex& index, const OpSet& candidate,
                              const FaultOracle& faults, const OutcomeOracle& outcome) {
  CutSetVerdict v;
  v.candidate = candidate;
  v.all_faulty = std::all_of(candidate.begin(), candidate.end(),
                             [&](const std::string& op) { return faults.is_faulty(op); });
  const std::vector<std::string> ops(candidate.begin(), candidate.end());
  const auto ancestors = index.op_ancestors(ops);
  v.ancestors_correct = std::none_of(ancestors.begin(), ancestors.end(),
                                     [&](const std::string& op) { return faults.is_faulty(op); });
  v.rescues = outcome.outcome(index.graph(), candidate) == 0;
  return v;
}

CutSetVerdict check_candidate(const ExecutionGraph& graph, const OpSet& candidate,
                              const FaultOracle& faults, const OutcomeOracle& outcome) {
  return check_candidate(GraphIndex(graph), candidate, faults, outcome);
}

std::vector<OpSet> brute_force_decisive_sets(const ExecutionGraph& graph,
                                             const FaultOracle& faults,
                                             const OutcomeOracle& outcome,
                                             std::size_t max_ops) {
  const std::size_t n = graph.operations().size();
  if (n > max_ops) {
    throw TooLarge("graph has " + std::to_string(n) + " operations, limit is " +
                   std::to_string(max_ops));
  }
  std::vector<std::string> ids;
  for (const auto& op : graph.operations()) ids.push_back(op.op_id);
  std::sort(ids.begin(), ids.end());

  const GraphIndex index(graph);
  std::vector<OpSet> kept;
  for (std::size_t size = 0; size <= n; ++size) {
    // Lexicographic combinations of `size` out of n via a selection mask.
    std::vector<bool> mask(n, false);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(size), true);
    do {
      OpSet candidate;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask[i]) candidate.insert(ids[i]);
      }
      const bool has_kept_subset = std::any_of(kept.begin(), kept.end(), [&](const OpSet& k) {
        return std::includes(candidate.begin(), candidate.end(), k.begin(), k.end());
      });
      if (has_kept_subset) continue;
      // Cheap necessary condition first: most subsets contain a correct op.
      const bool all_faulty = std::all_of(candidate.begin(), candidate.end(),
                                          [&](const std::string& op) { return faults.is_faulty(op); });
      if (!all_faulty) continue;
      if (check_candidate(index, candidate, faults, outcome).valid()) {
        kept.push_back(std::move(candidate));
      }
    } while (std::prev_permutation(mask.begin(), mask.end()));
  }
  return kept;
}

bool is_strictly_sequential(const ExecutionGraph& graph) {
  std::vector<const OperationRecord*> ops;
  for (const auto& op : graph.operations()) ops.push_back(&op);
  std::sort(ops.begin(), ops.end(), [](auto* a, auto* b) { return a->ts_start < b->ts_start; });
  for (std::size_t i = 1; i < ops.size(); ++i) {
    if (ops[i]->ts_start <= ops[i - 1]->ts_end) return false;
  }
  return true;
}

std::string singleton_decisive(const ExecutionGraph& graph, const FaultOracle& faults,
                               const OutcomeOracle& outcome) {
  if (!is_strictly_sequential(graph)) {
    throw NotSequential("operation intervals overlap; execution is not strictly sequential");
  }
  std::vector<const OperationRecord*> ops;
  for (const auto& op : graph.operations()) ops.push_back(&op);
  std::sort(ops.begin(), ops.end(), [](auto* a, auto* b) { return a->ts_start < b->ts_start; });

  const GraphIndex index(graph);
  for (const auto* op : ops) {
    if (!faults.is_faulty(op->op_id)) continue;
    if (check_candidate(index, OpSet{op->op_id}, faults, outcome).valid()) return op->op_id;
  }
  throw NoFault("no faulty operation forms a valid singleton cut");
}

Scores score(std::span<const AttributionResult> results, std::span<const Truth> truths) {
  std::map<std::string, const Truth*> by_case;
  for (const auto& t : truths) by_case[t.case_id] = &t;

  Scores s;
  s.n = results.size();
  if (results.empty()) return s;
  std::size_t type_hits = 0;
  std::size_t op_hits = 0;
  double tokens = 0.0;
  double seconds = 0.0;
  for (const auto& r : results) {
    auto it = by_case.find(r.case_id);
    if (it == by_case.end()) throw NotFound("no ground truth for case '" + r.case_id + "'");
    if (r.error_type && *r.error_type == it->second->error_type) ++type_hits;
    if (!r.predicted_op_id.empty() && r.predicted_op_id == it->second->op_id) ++op_hits;
    tokens += static_cast<double>(r.meter.total_tokens());
    seconds += r.meter.wall_seconds;
  }
  const double n = static_cast<double>(results.size());
  s.eta = static_cast<double>(type_hits) / n;
  s.oia = static_cast<double>(op_hits) / n;
  s.mean_tokens_k = tokens / n / 1000.0;
  s.mean_minutes = seconds / n / 60.0;
  return s;
}

}  // namespace tracegraph
