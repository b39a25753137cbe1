#include <gtest/gtest.h>

#include "tracegraph/errors.hpp"
#include "tracegraph/explorer.hpp"
#include "tracegraph/faultsim.hpp"
#include "tracegraph/recorder.hpp"

using namespace tracegraph;

namespace {

VarConfig cfg(std::string category, std::string identity, std::string comment = {}) {
  VarConfig c;
  c.category = std::move(category);
  c.identity = std::move(identity);
  c.comment = std::move(comment);
  return c;
}

struct Fixture {
  ExecutionGraph graph;
  VarRef msg, unit, answer;
  std::string extract_op, answer_op;
};

// message -> extract -> unit -> answer -> answer text
Fixture make_fixture() {
  Fixture f;
  TraceContext ctx("fixture");
  ctx.begin_session("ingest");
  f.msg = ctx.comment_variable("Dave: my car is a red Ferrari, a red one!",
                               cfg("raw_message", "unique", "turn 1"));
  f.extract_op = ctx.begin_operation("extract_facts", "extraction", "llm extraction",
                                     {{"model", "small"}});
  f.unit = ctx.comment_link(f.msg, Snapshot{"id=m1\nmemory=Dave drives a red Ferrari",
                                            cfg("memory_unit", "mem0-dict")},
                            "extracted")
               .dst;
  ctx.end_operation();
  ctx.end_session();
  ctx.begin_session("answer");
  f.answer_op = ctx.begin_operation("generate", "response");
  f.answer = ctx.comment_link(f.unit, Snapshot{"a blue Volvo", cfg("answer", "unique")}).dst;
  ctx.end_operation();
  ctx.end_session();
  f.graph = ctx.finish();
  return f;
}

ToolCall call(std::string tool, std::map<std::string, std::string> args = {}) {
  return ToolCall{std::move(tool), std::move(args)};
}

}  // namespace

TEST(ToExploreList, EarliestFirstAndStatuses) {
  ToExploreList list(2);
  EXPECT_EQ(list.add({"b", 0}, 5), ToExploreList::AddStatus::kAccepted);
  EXPECT_EQ(list.add({"a", 0}, 9), ToExploreList::AddStatus::kAccepted);
  EXPECT_EQ(list.add({"b", 0}, 5), ToExploreList::AddStatus::kQueued);
  EXPECT_EQ(list.add({"c", 0}, 1), ToExploreList::AddStatus::kFull);
  auto first = list.pop();
  ASSERT_TRUE(first);
  EXPECT_EQ(first->first, (VarRef{"b", 0}));
  EXPECT_EQ(first->second, 5u);
  EXPECT_TRUE(list.explored({"b", 0}));
  EXPECT_EQ(list.add({"b", 0}, 5), ToExploreList::AddStatus::kExplored);
  EXPECT_EQ(list.add({"c", 0}, 1), ToExploreList::AddStatus::kAccepted);
  ASSERT_EQ(list.entries().size(), 2u);
  EXPECT_EQ(list.entries()[0].first, (VarRef{"c", 0}));
  list.pop();
  list.pop();
  EXPECT_FALSE(list.pop().has_value());
  EXPECT_EQ(to_string(ToExploreList::AddStatus::kFull), "list full");
}

TEST(Render, PreviewOmitsValuesFullShowsThem) {
  auto f = make_fixture();
  GraphIndex idx(f.graph);
  auto preview = render_operation_subgraph(idx, f.extract_op, RenderMode::kPreview);
  EXPECT_EQ(preview.rfind("OPERATION " + f.extract_op + "\n", 0), 0u);
  EXPECT_NE(preview.find("name: extract_facts"), std::string::npos);
  EXPECT_NE(preview.find("metadata: model=small"), std::string::npos);
  EXPECT_NE(preview.find("INPUTS (1):\n- " + to_string(f.msg) + " [raw_message] ts="),
            std::string::npos);
  EXPECT_NE(preview.find("turn 1"), std::string::npos);
  EXPECT_NE(preview.find("DEPENDENCIES (1):\n- " + to_string(f.msg) + " -> " + to_string(f.unit) +
                         " extracted"),
            std::string::npos);
  EXPECT_EQ(preview.find("value:"), std::string::npos);
  EXPECT_EQ(preview.find("Ferrari"), std::string::npos);

  auto full = render_operation_subgraph(idx, f.extract_op, RenderMode::kFull);
  EXPECT_NE(full.find("    value:\n      id=m1\n      memory=Dave drives a red Ferrari\n"),
            std::string::npos);
}

TEST(Render, PaginationAndErrors) {
  auto f = make_fixture();
  GraphIndex idx(f.graph);
  const auto whole = render_operation_subgraph(idx, f.extract_op, RenderMode::kFull, 0, 1000000);
  const std::size_t pages = operation_page_count(idx, f.extract_op, RenderMode::kFull, 50);
  EXPECT_GT(pages, 1u);
  std::string joined;
  for (std::size_t p = 0; p < pages; ++p) {
    joined += render_operation_subgraph(idx, f.extract_op, RenderMode::kFull, p, 50);
  }
  EXPECT_EQ(joined, whole);
  EXPECT_THROW(render_operation_subgraph(idx, f.extract_op, RenderMode::kFull, pages, 50),
               RangeError);
  EXPECT_THROW(render_operation_subgraph(idx, "op-99999", RenderMode::kFull), NotFound);
}

TEST(ReadVariable, Pages) {
  auto f = make_fixture();
  EXPECT_EQ(read_variable(f.graph, f.answer), "a blue Volvo");
  EXPECT_EQ(variable_page_count(f.graph, f.answer, 5), 3u);
  EXPECT_EQ(read_variable(f.graph, f.answer, 2, 5), "vo");
  EXPECT_THROW(read_variable(f.graph, f.answer, 3, 5), RangeError);
}

TEST(SearchVariable, HitsAndExcerpts) {
  auto f = make_fixture();
  auto hits = search_variable(f.graph, f.msg, "red", 10);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].offset, 18u);
  EXPECT_EQ(hits[0].excerpt, "Dave: my car is a red Ferrari, a red one!");
  EXPECT_EQ(search_variable(f.graph, f.msg, "red", 1).size(), 1u);
  EXPECT_TRUE(search_variable(f.graph, f.msg, "x*", 10).empty());
  EXPECT_THROW(search_variable(f.graph, f.msg, "(unclosed", 10), ToolError);
}

TEST(ParseVarRef, LatestAndExplicit) {
  auto f = make_fixture();
  EXPECT_EQ(parse_var_ref(f.graph, f.unit.var_id), f.unit);
  EXPECT_EQ(parse_var_ref(f.graph, to_string(f.msg)), f.msg);
  EXPECT_THROW(parse_var_ref(f.graph, "var-00000#x"), ToolError);
  EXPECT_THROW(parse_var_ref(f.graph, "var-00000#7"), NotFound);
  EXPECT_THROW(parse_var_ref(f.graph, "nope"), NotFound);
  EXPECT_THROW(parse_var_ref(f.graph, " "), ToolError);
}

TEST(ExploreConfig, Checks) {
  ExploreConfig c;
  EXPECT_NO_THROW(c.check());
  c.capacity = 1;
  EXPECT_THROW(c.check(), ConfigError);
  c = {};
  c.max_iters = 0;
  EXPECT_THROW(c.check(), ConfigError);
  c = {};
  c.page_size_chars = 0;
  EXPECT_THROW(c.check(), ConfigError);
}

TEST(ExplorerEnv, ToolsWalkTheGraph) {
  auto f = make_fixture();
  ExplorerEnvironment env(f.graph, ExploreConfig{});
  EXPECT_EQ(env.step(call("pop_next")).observation, "to-explore list is empty");
  EXPECT_EQ(env.step(call("list_ops")).observation.rfind("ERROR: ", 0), 0u);
  EXPECT_EQ(env.seed({f.msg, f.answer}), 2u);

  auto popped = env.step(call("pop_next")).observation;
  EXPECT_EQ(popped.rfind("POPPED " + to_string(f.msg) + " ts=", 0), 0u);
  EXPECT_NE(popped.find("category=raw_message"), std::string::npos);

  auto ops = env.step(call("list_ops")).observation;
  EXPECT_EQ(ops.rfind("OPS INVOLVING " + f.msg.var_id + " (1):\n- " + f.extract_op +
                          " extract_facts [extraction] ts=",
                      0),
            0u);
  auto unit_ops = env.step(call("list_ops", {{"var", to_string(f.unit)}, {"scope", "version"}}));
  EXPECT_NE(unit_ops.observation.find("(2):"), std::string::npos);
  EXPECT_EQ(env.step(call("list_ops", {{"scope", "all"}})).observation.rfind("ERROR: ", 0), 0u);

  auto view = env.step(call("view_op", {{"op_id", f.extract_op}, {"mode", "full"}}));
  EXPECT_NE(view.observation.find("Ferrari"), std::string::npos);
  EXPECT_EQ(env.step(call("view_op", {{"op_id", f.extract_op}, {"page", "9"}}))
                .observation.rfind("ERROR: ", 0),
            0u);
  EXPECT_EQ(env.step(call("view_op", {})).observation.rfind("ERROR: ", 0), 0u);

  auto read = env.step(call("read_var", {{"var", f.answer.var_id}})).observation;
  EXPECT_NE(read.find("a blue Volvo"), std::string::npos);
  auto search = env.step(call("search_var", {{"var", f.msg.var_id}, {"regex", "Ferr?ari"}}));
  EXPECT_EQ(search.observation.rfind("MATCHES IN " + to_string(f.msg) + " (1):", 0), 0u);

  auto add = env.step(call("add_to_explore",
                           {{"vars", to_string(f.unit) + ", " + to_string(f.msg) + ",bogus"}}))
                 .observation;
  EXPECT_NE(add.find("ACCEPTED (1): " + to_string(f.unit)), std::string::npos);
  EXPECT_NE(add.find("REJECTED (2): " + to_string(f.msg) + " (already explored), bogus (unknown)"),
            std::string::npos);
  EXPECT_TRUE(env.list().queued(f.unit));

  auto bad = env.step(call("report_fault", {{"op_id", f.extract_op}, {"error_type", "oops"}}));
  EXPECT_FALSE(bad.report.has_value());
  EXPECT_EQ(bad.observation.rfind("ERROR: ", 0), 0u);
  auto missing = env.step(call("report_fault", {{"op_id", "op-777"}, {"error_type", "update"}}));
  EXPECT_FALSE(missing.report.has_value());
  auto good = env.step(call("report_fault", {{"op_id", f.extract_op},
                                             {"error_type", "extraction"},
                                             {"explanation", "kept the wrong car"}}));
  ASSERT_TRUE(good.report.has_value());
  EXPECT_EQ(good.observation, "REPORTED " + f.extract_op + " extraction");
  EXPECT_EQ(good.report->explanation, "kept the wrong car");
}

TEST(ExplorerEnv, FullListRejects) {
  auto f = make_fixture();
  ExploreConfig c;
  c.capacity = 2;
  ExplorerEnvironment env(f.graph, c);
  env.seed({f.msg, f.unit});
  auto add = env.step(call("add_to_explore", {{"vars", f.answer.var_id}})).observation;
  EXPECT_NE(add.find("(list full)"), std::string::npos);
}

TEST(ExplorerText, InstructionAndCase) {
  auto f = make_fixture();
  ExploreConfig c;
  c.prior_knowledge = "The store keeps one unit per fact.";
  auto instr = explorer_instruction(c);
  EXPECT_NE(instr.find("ERROR TYPES"), std::string::npos);
  EXPECT_NE(instr.find("report_fault"), std::string::npos);
  EXPECT_NE(instr.find("one unit per fact"), std::string::npos);
  for (auto t : kAllErrorTypes) EXPECT_NE(error_type_guide().find(to_string(t)), std::string::npos);

  CaseSpec spec{"c", f.answer, "a red Ferrari", "a blue Volvo", {f.msg.var_id}, {}, {}};
  ToExploreList list(4);
  list.add(f.msg, 1);
  auto text = explorer_case_text(f.graph, spec, list);
  EXPECT_NE(text.find("a red Ferrari"), std::string::npos);
  EXPECT_NE(text.find("a blue Volvo"), std::string::npos);
  EXPECT_NE(text.find(to_string(f.msg)), std::string::npos);
  EXPECT_EQ(source_evidence_seeds(f.graph, spec), (std::vector<VarRef>{f.msg, f.answer}));
}

TEST(RunAttribution, ScriptedReport) {
  auto f = make_fixture();
  CaseSpec spec{"c", f.answer, "a red Ferrari", "a blue Volvo", {f.msg.var_id}, {}, {}};
  ScriptedBackend b(std::vector<std::string>{
      R"({"tool": "pop_next", "args": {}})",
      R"({"tool": "report_fault", "args": {"op_id": ")" + f.answer_op +
          R"(", "error_type": "response", "explanation": "ignored memory"}})"});
  ExploreConfig c;
  c.seeds = source_evidence_seeds(f.graph, spec);
  auto r = run_attribution(f.graph, spec, b, c);
  EXPECT_EQ(r.method, "graph");
  EXPECT_EQ(r.predicted_op_id, f.answer_op);
  EXPECT_EQ(r.error_type, ErrorType::kResponse);
  EXPECT_EQ(r.iterations, 2u);
  EXPECT_NE(r.transcript[1].content.find(to_string(f.msg)), std::string::npos);
}

TEST(RunAttribution, OmniscientJudgeFindsEachFaultType) {
  for (auto type : kSystemErrorTypes) {
    faultsim::SimConfig sc;
    sc.seed = 40 + static_cast<std::uint64_t>(type);
    sc.n_messages = 12;
    sc.fault = type;
    auto fc = faultsim::generate(sc, "omni");
    auto judge = faultsim::omniscient_judge(fc.graph, fc.spec());
    ExploreConfig c;
    c.seeds = source_evidence_seeds(fc.graph, fc.spec());
    auto r = run_attribution(fc.graph, fc.spec(), *judge, c);
    EXPECT_EQ(r.predicted_op_id, *fc.truth_op_id) << to_string(type);
    EXPECT_EQ(r.error_type, type);
    EXPECT_EQ(r.terminated_by, Termination::kReport);
  }
}

TEST(RunAttribution, RetrievalSeedingWithoutExplicitSeeds) {
  faultsim::SimConfig sc;
  sc.seed = 5;
  sc.fault = ErrorType::kExtraction;
  auto fc = faultsim::generate(sc, "seeded");
  auto judge = faultsim::omniscient_judge(fc.graph, fc.spec());
  auto r = run_attribution(fc.graph, fc.spec(), *judge, ExploreConfig{});
  EXPECT_EQ(r.predicted_op_id, *fc.truth_op_id);
}
