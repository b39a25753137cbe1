#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tracegraph/agent.hpp"
#include "tracegraph/attribution.hpp"
#include "tracegraph/graph.hpp"
#include "tracegraph/model_client.hpp"
#include "tracegraph/taxonomy.hpp"

namespace tracegraph::faultsim {

struct SimConfig {
  std::uint64_t seed = 0;
  std::size_t n_messages = 40;
  std::size_t memories_per_message = 1;
  double update_prob = 0.2;
  double delete_prob = 0.02;
  std::size_t top_k = 10;
  /// One of the five pipeline types, or none for a healthy run.
  std::optional<ErrorType> fault;

  /// Throws ConfigError for out-of-range values or an evaluation-side fault.
  void check() const;
};

/// A generated run of a memory pipeline plus its ground truth.
struct FaultCase {
  std::string case_id;
  SimConfig config;
  ExecutionGraph graph;
  VarRef question_var;
  VarRef prediction_var;
  std::string golden_answer;
  std::string prediction;
  std::vector<std::string> evidence_var_ids;  // raw messages holding the answer
  std::string evidence_unit_id;                // memory unit extracted from it
  std::optional<std::string> truth_op_id;
  std::optional<ErrorType> truth_error_type;
  int outcome = 0;  // 1 = wrong answer

  CaseSpec spec() const;
};

/// Deterministic in `config`. Three sessions: memory construction (extract,
/// occasional update and delete per message), retrieval (embed_query,
/// search, context_assemble) and response (build_prompt, generate).
FaultCase generate(const SimConfig& config, std::string case_id = "case");

/// Monotone corruption propagation. An op is corrupt when it is faulty and
/// neither in `intervention` nor downstream of it, or when any op feeding it
/// is corrupt. Returns 1 when the producer of `outcome_var` is corrupt.
int propagate(const GraphIndex& index, const OpSet& faulty, const VarRef& outcome_var,
              const OpSet& intervention);

int propagation_outcome(const FaultCase& fc, const OpSet& intervention);

/// Oracles over a generated case. The case must outlive them.
class TruthFaultOracle final : public FaultOracle {
 public:
  explicit TruthFaultOracle(const FaultCase& fc) : fc_(fc) {}
  bool is_faulty(std::string_view op_id) const override {
    return fc_.truth_op_id && *fc_.truth_op_id == op_id;
  }

 private:
  const FaultCase& fc_;
};

class PropagationOracle final : public OutcomeOracle {
 public:
  explicit PropagationOracle(const FaultCase& fc);
  int outcome(const ExecutionGraph& graph, const OpSet& intervention) const override;

 private:
  const FaultCase& fc_;
  GraphIndex index_;
  OpSet faulty_;
};

/// Scripted judge that knows the truth. It pops, lists the operations of
/// the popped variable, previews each unseen one, reports the truth op when
/// it sees it and otherwise queues that op's outputs. Never reports when the
/// case has no truth. `graph` must outlive the backend.
std::unique_ptr<ScriptedBackend> omniscient_judge(const ExecutionGraph& graph,
                                                  const CaseSpec& spec);

/// Log-search counterpart: searches the truth op id, views the hit, reports.
std::unique_ptr<ScriptedBackend> obs_twin_judge(const CaseSpec& spec);

/// Stratified mix: each entry gets floor(n * w / sum) cases, remainders go to
/// the earliest entries. Seeds are base_seed, base_seed + 1, ...
using SuiteMix = std::vector<std::pair<std::optional<ErrorType>, double>>;

SuiteMix uniform_system_mix();

std::vector<FaultCase> make_suite(std::size_t n_cases, std::uint64_t base_seed,
                                  const SuiteMix& mix, const SimConfig& base = {});

struct ManifestRow {
  std::string case_id;
  std::uint64_t seed = 0;
  std::string truth_op_id;       // empty when none
  std::string truth_error_type;  // empty when none

  bool operator==(const ManifestRow&) const = default;
};

/// manifest.tsv with a header line, then <case>.trace.json and <case>.case.json.
void write_suite(const std::string& dir, const std::vector<FaultCase>& cases);
std::vector<ManifestRow> read_manifest(const std::string& path);

}  // namespace tracegraph::faultsim
