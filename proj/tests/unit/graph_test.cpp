#include <gtest/gtest.h>

#include <algorithm>

#include "tracegraph/errors.hpp"
#include "tracegraph/graph.hpp"

using namespace tracegraph;

namespace {

// a#0 -(op-0)-> b#0 -(op-1)-> c#0, plus d#0 feeding op-1.
ExecutionGraph chain() {
  ExecutionGraph g("chain");
  g.add_session(Session{"sess-000", "main", "", {}, {"op-0", "op-1"}});
  g.add_operation(OperationRecord{"op-0", "sess-000", "first", "x", "", {}, 1, 4});
  g.add_operation(OperationRecord{"op-1", "sess-000", "second", "y", "", {}, 5, 9});
  g.add_variable(VariableChain{"a", "ka", "in", {VariableVersion{0, 0, "A", "", {}}}});
  g.add_variable(VariableChain{"b", "kb", "mid", {VariableVersion{0, 2, "B", "", {}}}});
  g.add_variable(VariableChain{"c", "kc", "out", {VariableVersion{0, 7, "C", "", {}}}});
  g.add_variable(VariableChain{"d", "kd", "in", {VariableVersion{0, 6, "D", "", {}}}});
  g.add_edge(DependencyEdge{{"a", 0}, {"b", 0}, "op-0", "", {}});
  g.add_edge(DependencyEdge{{"b", 0}, {"c", 0}, "op-1", "", {}});
  g.add_edge(DependencyEdge{{"d", 0}, {"c", 0}, "op-1", "", {}});
  g.set_clock(10);
  return g;
}

bool has_code(const ValidationReport& r, std::string_view code) {
  return std::any_of(r.violations.begin(), r.violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

}  // namespace

TEST(Graph, VarRefPrintsWithVersion) {
  EXPECT_EQ(to_string(VarRef{"var-00003", 1}), "var-00003#1");
}

TEST(Graph, LookupsAndNotFound) {
  auto g = chain();
  EXPECT_EQ(g.operation("op-1").name, "second");
  EXPECT_EQ(g.version({"b", 0}).value, "B");
  EXPECT_EQ(g.find_version({"b", 1}), nullptr);
  EXPECT_THROW(g.operation("nope"), NotFound);
  EXPECT_THROW(g.version({"zz", 0}), NotFound);
  EXPECT_EQ(g.version_count(), 4u);
}

TEST(Graph, SealedGraphRejectsMutation) {
  auto g = chain();
  g.seal();
  EXPECT_THROW(g.add_edge(DependencyEdge{{"a", 0}, {"c", 0}, "op-1", "", {}}), StateError);
  EXPECT_THROW(g.tick(), StateError);
}

TEST(Graph, TickAdvancesClock) {
  ExecutionGraph g;
  EXPECT_EQ(g.tick(), 0u);
  EXPECT_EQ(g.tick(), 1u);
  EXPECT_EQ(g.clock(), 2u);
}

TEST(Graph, EqualityIgnoresInsertionOrder) {
  auto a = chain();
  ExecutionGraph b("chain");
  b.add_session(a.sessions()[0]);
  for (auto it = a.operations().rbegin(); it != a.operations().rend(); ++it) b.add_operation(*it);
  for (auto it = a.variables().rbegin(); it != a.variables().rend(); ++it) b.add_variable(*it);
  for (auto it = a.edges().rbegin(); it != a.edges().rend(); ++it) b.add_edge(*it);
  EXPECT_TRUE(a == b);
  b.mutable_operation("op-0").comment = "changed";
  EXPECT_FALSE(a == b);
}

TEST(Validate, CleanGraphHasNoViolations) {
  auto r = validate(chain());
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.empty());
}

TEST(Validate, CycleRiskWhenDestinationNotLater) {
  auto g = chain();
  g.add_edge(DependencyEdge{{"c", 0}, {"b", 0}, "op-1", "", {}});
  auto r = validate(g);
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(has_code(r, violation::kCycleRisk));
}

TEST(Validate, SelfLoopAndMissingEndpoint) {
  auto g = chain();
  g.add_edge(DependencyEdge{{"a", 0}, {"a", 0}, "op-0", "", {}});
  g.add_edge(DependencyEdge{{"a", 0}, {"ghost", 0}, "op-0", "", {}});
  auto r = validate(g);
  EXPECT_TRUE(has_code(r, violation::kSelfLoop));
  EXPECT_TRUE(has_code(r, violation::kMissingEndpoint));
}

TEST(Validate, MissingOperationAndSession) {
  auto g = chain();
  g.add_edge(DependencyEdge{{"a", 0}, {"c", 0}, "op-9", "", {}});
  g.add_operation(OperationRecord{"op-2", "sess-404", "lost", "z", "", {}, 20, 21});
  auto r = validate(g);
  EXPECT_TRUE(has_code(r, violation::kMissingOperation));
  EXPECT_TRUE(has_code(r, violation::kMissingSession));
}

TEST(Validate, DuplicateTimestampsAndIntervals) {
  auto g = chain();
  g.add_variable(VariableChain{"e", "ke", "in", {VariableVersion{0, 2, "E", "", {}}}});
  g.add_operation(OperationRecord{"op-3", "sess-000", "bad", "z", "", {}, 30, 25});
  auto r = validate(g);
  EXPECT_TRUE(has_code(r, violation::kDuplicateTimestamp));
  EXPECT_TRUE(has_code(r, violation::kOperationInterval));
}

TEST(Validate, VersionOrderAndEmptyChain) {
  auto g = chain();
  g.add_variable(VariableChain{"f", "kf", "in",
                               {VariableVersion{0, 40, "", "", {}}, VariableVersion{1, 39, "", "", {}}}});
  g.add_variable(VariableChain{"g", "kg", "in", {}});
  auto r = validate(g);
  EXPECT_TRUE(has_code(r, violation::kVersionOrder));
  EXPECT_TRUE(has_code(r, violation::kEmptyChain));
}

TEST(Validate, OperationWithoutEdgesIsOnlyAWarning) {
  auto g = chain();
  g.add_operation(OperationRecord{"op-4", "sess-000", "idle", "z", "", {}, 50, 51});
  g.mutable_session("sess-000").operation_ids.push_back("op-4");
  auto r = validate(g);
  EXPECT_TRUE(r.ok());
  ASSERT_EQ(r.warnings().size(), 1u);
  EXPECT_EQ(r.warnings()[0].code, violation::kNoEdges);
}

TEST(Validate, SessionMemberMustExist) {
  auto g = chain();
  g.mutable_session("sess-000").operation_ids.push_back("op-77");
  EXPECT_TRUE(has_code(validate(g), violation::kSessionMember));
}

TEST(GraphIndex, InputsOutputsAndPrecedence) {
  auto g = chain();
  GraphIndex idx(g);
  EXPECT_EQ(idx.inputs_of("op-0"), (std::vector<VarRef>{{"a", 0}}));
  EXPECT_EQ(idx.outputs_of("op-0"), (std::vector<VarRef>{{"b", 0}}));
  EXPECT_EQ(idx.inputs_of("op-1"), (std::vector<VarRef>{{"b", 0}, {"d", 0}}));
  EXPECT_EQ(idx.successors(idx.op_position("op-0")),
            (std::vector<std::size_t>{idx.op_position("op-1")}));
  const std::vector<std::string> last = {"op-1"};
  const std::vector<std::string> first = {"op-0"};
  EXPECT_EQ(idx.op_ancestors(last), (std::set<std::string>{"op-0"}));
  EXPECT_EQ(idx.op_descendants(first), (std::set<std::string>{"op-1"}));
  EXPECT_TRUE(idx.op_descendants(last).empty());
}

TEST(GraphIndex, OpsInvolvingByVersion) {
  auto g = chain();
  EXPECT_EQ(ops_involving(g, "b"), (std::vector<std::string>{"op-0", "op-1"}));
  EXPECT_EQ(ops_involving(g, "b", 0u), (std::vector<std::string>{"op-0", "op-1"}));
  EXPECT_TRUE(ops_involving(g, "b", 3u).empty());
  EXPECT_THROW(ops_involving(g, "nope"), NotFound);
}

TEST(GraphIndex, UnknownOpThrows) {
  auto g = chain();
  GraphIndex idx(g);
  EXPECT_THROW(idx.inputs_of("op-x"), NotFound);
}
