#include <gtest/gtest.h>

#include "tracegraph/attribution.hpp"
#include "tracegraph/errors.hpp"
#include "tracegraph/faultsim.hpp"
#include "tracegraph/recorder.hpp"

using namespace tracegraph;

namespace {

VarConfig cfg() {
  VarConfig c;
  c.category = "v";
  c.identity = "unique";
  return c;
}

/// Ops recorded in order; op i reads the outputs of the ops listed in
/// feeds[i] (or a fresh input when empty) and writes one variable.
ExecutionGraph dag(const std::vector<std::vector<int>>& feeds) {
  TraceContext ctx("dag");
  ctx.begin_session("s");
  std::vector<VarRef> outs;
  for (std::size_t i = 0; i < feeds.size(); ++i) {
    ctx.begin_operation("op" + std::to_string(i), "c");
    std::vector<Endpoint> srcs;
    if (feeds[i].empty()) srcs.push_back(Snapshot{"in" + std::to_string(i), cfg()});
    for (int src : feeds[i]) srcs.push_back(outs[static_cast<std::size_t>(src)]);
    // The output is materialized by the first link, after its source.
    Endpoint dst = Snapshot{"out" + std::to_string(i), cfg()};
    VarRef out;
    for (const auto& src : srcs) {
      out = ctx.comment_link(src, dst).dst;
      dst = out;
    }
    outs.push_back(out);
    ctx.end_operation();
  }
  ctx.end_session();
  return ctx.finish();
}

std::string id(int i) { return "op-0000" + std::to_string(i); }

/// Independent outcome model: the answer is wrong while any faulty op is
/// neither intervened on nor downstream of an intervened op.
LambdaOutcomeOracle unrescued(const OpSet& faulty) {
  return LambdaOutcomeOracle([faulty](const ExecutionGraph& g, const OpSet& fix) {
    const std::vector<std::string> fixed(fix.begin(), fix.end());
    const auto below = fixed.empty() ? std::set<std::string>{} : op_descendants(g, fixed);
    for (const auto& f : faulty) {
      if (!fix.count(f) && !below.count(f)) return 1;
    }
    return 0;
  });
}

LambdaFaultOracle in_set(const OpSet& faulty) {
  return LambdaFaultOracle([faulty](std::string_view op) { return faulty.count(std::string(op)) > 0; });
}

}  // namespace

TEST(CheckCandidate, ThreeConditions) {
  auto g = dag({{}, {0}, {1}});
  const OpSet faulty = {id(0), id(1)};
  auto faults = in_set(faulty);
  auto outcome = unrescued(faulty);
  auto v = check_candidate(g, {id(0)}, faults, outcome);
  EXPECT_TRUE(v.valid());
  v = check_candidate(g, {id(1)}, faults, outcome);
  EXPECT_TRUE(v.all_faulty);
  EXPECT_FALSE(v.ancestors_correct);
  v = check_candidate(g, {id(2)}, faults, outcome);
  EXPECT_FALSE(v.all_faulty);
  EXPECT_FALSE(v.rescues);
}

TEST(BruteForce, ChainPicksEarliestFault) {
  auto g = dag({{}, {0}, {1}, {2}});
  const OpSet faulty = {id(1), id(3)};
  auto sets = brute_force_decisive_sets(g, in_set(faulty), unrescued(faulty));
  EXPECT_EQ(sets, (std::vector<OpSet>{{id(1)}}));
  EXPECT_EQ(singleton_decisive(g, in_set(faulty), unrescued(faulty)), id(1));
}

TEST(BruteForce, IndependentBranchesNeedBoth) {
  // op0 and op1 are independent sources feeding op2.
  auto g = dag({{}, {}, {0, 1}});
  const OpSet faulty = {id(0), id(1)};
  auto sets = brute_force_decisive_sets(g, in_set(faulty), unrescued(faulty));
  EXPECT_EQ(sets, (std::vector<OpSet>{{id(0), id(1)}}));
  EXPECT_THROW(singleton_decisive(g, in_set(faulty), unrescued(faulty)), NoFault);
}

TEST(BruteForce, SeveralMinimalSetsInOrder) {
  // A fault in either branch is enough to rescue when the outcome only
  // needs one clean branch.
  auto g = dag({{}, {}, {0, 1}});
  const OpSet faulty = {id(0), id(1)};
  LambdaOutcomeOracle either([&](const ExecutionGraph&, const OpSet& fix) {
    return fix.empty() ? 1 : 0;
  });
  auto sets = brute_force_decisive_sets(g, in_set(faulty), either);
  EXPECT_EQ(sets, (std::vector<OpSet>{{id(0)}, {id(1)}}));
}

TEST(BruteForce, HealthyRunGivesEmptySet) {
  auto g = dag({{}, {0}});
  auto sets = brute_force_decisive_sets(g, in_set({}), unrescued({}));
  EXPECT_EQ(sets, (std::vector<OpSet>{OpSet{}}));
  EXPECT_THROW(singleton_decisive(g, in_set({}), unrescued({})), NoFault);
}

TEST(BruteForce, SizeLimit) {
  auto g = dag({{}, {0}, {1}, {2}});
  EXPECT_THROW(brute_force_decisive_sets(g, in_set({}), unrescued({}), 3), TooLarge);
}

TEST(Sequential, OverlapDetection) {
  auto g = dag({{}, {0}});
  EXPECT_TRUE(is_strictly_sequential(g));
  ExecutionGraph overlap;
  overlap.add_session(Session{"s", "", "", {}, {"a", "b"}});
  overlap.add_operation(OperationRecord{"a", "s", "a", "c", "", {}, 1, 5});
  overlap.add_operation(OperationRecord{"b", "s", "b", "c", "", {}, 3, 8});
  EXPECT_FALSE(is_strictly_sequential(overlap));
  EXPECT_THROW(singleton_decisive(overlap, in_set({"a"}), unrescued({"a"})), NotSequential);
}

TEST(BruteForce, FaultsimCasesAgreeWithTruth) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; checked < 100; ++seed) {
    faultsim::SimConfig sc;
    sc.seed = seed;
    sc.n_messages = 1 + seed % 4;
    sc.fault = kSystemErrorTypes[seed % 5];
    auto fc = faultsim::generate(sc, "bf");
    if (fc.graph.operations().size() > 12) continue;
    ++checked;
    faultsim::TruthFaultOracle faults(fc);
    faultsim::PropagationOracle outcome(fc);
    ASSERT_EQ(brute_force_decisive_sets(fc.graph, faults, outcome),
              (std::vector<OpSet>{{*fc.truth_op_id}}))
        << "seed " << seed;
  }
}

namespace {

AttributionResult res(std::string id, std::string op, std::optional<ErrorType> t,
                      std::uint64_t tokens, double secs) {
  AttributionResult r;
  r.case_id = std::move(id);
  r.predicted_op_id = std::move(op);
  r.error_type = t;
  r.meter = CostMeter{tokens, 0, secs};
  return r;
}

}  // namespace

TEST(Score, AllCorrect) {
  std::vector<Truth> truths = {{"a", "op-1", ErrorType::kUpdate}};
  std::vector<AttributionResult> results = {res("a", "op-1", ErrorType::kUpdate, 2000, 120)};
  auto s = score(results, truths);
  EXPECT_EQ(s.eta, 1.0);
  EXPECT_EQ(s.oia, 1.0);
  EXPECT_EQ(s.mean_tokens_k, 2.0);
  EXPECT_EQ(s.mean_minutes, 2.0);
  EXPECT_EQ(s.n, 1u);
}

TEST(Score, HalfOpsRight) {
  std::vector<Truth> truths = {{"a", "op-1", ErrorType::kUpdate}, {"b", "op-2", ErrorType::kRetrieval}};
  std::vector<AttributionResult> results = {res("a", "op-1", ErrorType::kUpdate, 0, 0),
                                            res("b", "op-9", ErrorType::kDeletion, 0, 0)};
  auto s = score(results, truths);
  EXPECT_EQ(s.oia, 0.5);
  EXPECT_EQ(s.eta, 0.5);
}

TEST(Score, BudgetRunsCountAsMisses) {
  std::vector<Truth> truths = {{"a", "op-1", ErrorType::kUpdate}};
  std::vector<AttributionResult> results = {res("a", "", std::nullopt, 500, 0)};
  auto s = score(results, truths);
  EXPECT_EQ(s.eta, 0.0);
  EXPECT_EQ(s.oia, 0.0);
  EXPECT_EQ(s.mean_tokens_k, 0.5);
}

TEST(Score, MissingTruthAndEmpty) {
  std::vector<AttributionResult> results = {res("zz", "", std::nullopt, 0, 0)};
  EXPECT_THROW(score(results, std::vector<Truth>{}), NotFound);
  auto s = score(std::vector<AttributionResult>{}, std::vector<Truth>{});
  EXPECT_EQ(s.n, 0u);
  EXPECT_EQ(s.eta, 0.0);
}
