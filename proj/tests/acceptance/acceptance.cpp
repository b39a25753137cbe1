// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 when
// any check fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "test_support.hpp"
#include "tracegraph/attribution.hpp"
#include "tracegraph/errors.hpp"
#include "tracegraph/explorer.hpp"
#include "tracegraph/faultsim.hpp"
#include "tracegraph/obs_explorer.hpp"
#include "tracegraph/reporter.hpp"
#include "tracegraph/retrieval.hpp"
#include "tracegraph/trace_io.hpp"

namespace fs = std::filesystem;
using namespace tracegraph;
using testsupport::slurp;
using testsupport::spit;
using testsupport::TempDir;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects failures; the first few are kept for the report line.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  void note(const std::string& s) { info_ += (info_.empty() ? "" : ", ") + s; }
  Outcome done() const {
    if (failures_ == 0) return {true, info_};
    return {false, std::to_string(failures_) + " failure(s): " + notes_ +
                       (info_.empty() ? "" : " [" + info_ + "]")};
  }

 private:
  std::size_t failures_ = 0;
  std::string notes_;
  std::string info_;
};

int cli(std::vector<std::string> args, std::string* out_text = nullptr) {
  std::ostringstream out;
  std::ostringstream err;
  const int rc = cli::run(args, out, err);
  if (out_text) *out_text = out.str();
  if (rc != 0 && rc != cli::kExitBudget) std::cerr << err.str();
  return rc;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool near(double a, double b) { return std::fabs(a - b) <= 1e-9; }

// ---------------------------------------------------------------------------

Outcome formalism_oracle() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t accepted = 0;
  std::size_t skipped = 0;
  for (std::uint64_t seed = 1; accepted < 1000; ++seed) {
    faultsim::SimConfig cfg;
    cfg.seed = seed;
    cfg.n_messages = 1 + seed % 5;
    cfg.fault = kSystemErrorTypes[seed % kSystemErrorTypes.size()];
    const auto fc = faultsim::generate(cfg, "formal-" + std::to_string(seed));
    if (fc.graph.operations().size() > 12) {
      ++skipped;
      continue;
    }
    ++accepted;
    const faultsim::TruthFaultOracle faults(fc);
    const faultsim::PropagationOracle outcome(fc);
    const auto sets = brute_force_decisive_sets(fc.graph, faults, outcome);
    const std::vector<OpSet> expected = {OpSet{*fc.truth_op_id}};
    c.expect(sets == expected, "seed " + std::to_string(seed) + ": brute force disagrees");
    c.expect(is_strictly_sequential(fc.graph), "seed " + std::to_string(seed) + ": overlap");
    try {
      c.expect(singleton_decisive(fc.graph, faults, outcome) == *fc.truth_op_id,
               "seed " + std::to_string(seed) + ": singleton disagrees");
    } catch (const Error& e) {
      c.expect(false, "seed " + std::to_string(seed) + ": " + e.what());
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(secs < 60.0, "took " + fmt("%.1f", secs) + " s");
  c.note(std::to_string(accepted) + " graphs exact (" + std::to_string(skipped) +
         " over 12 ops skipped), " + fmt("%.2f", secs) + " s");
  return c.done();
}

struct SuiteRun {
  TempDir dir{"accept-suite"};
  std::vector<AttributionResult> graph_results;
  std::vector<AttributionResult> obs_results;
  bool ok = false;
};

void fill_suite_run(SuiteRun& r) {
  const std::string suite = r.dir.str("suite");
  if (cli({"bench", "generate", "--out", suite, "-n", "200", "--seed", "1000"}) != 0) return;
  for (const char* out : {"graph1", "graph2"}) {
    if (cli({"bench", "run", "--suite", suite, "--out", r.dir.str(out), "--backend",
             "omniscient", "--seed-evidence", "--jobs", "4"}) != 0) {
      return;
    }
  }
  if (cli({"bench", "run", "--suite", suite, "--out", r.dir.str("obs"), "--method", "obs",
           "--backend", "omniscient", "--jobs", "4"}) != 0) {
    return;
  }
  auto load = [&](const std::string& sub) {
    std::vector<AttributionResult> v;
    for (const auto& j : nlohmann::json::parse(slurp(r.dir.path() / sub / "results.json"))) {
      v.push_back(result_from_json(j));
    }
    return v;
  };
  r.graph_results = load("graph1");
  r.obs_results = load("obs");
  r.ok = true;
}

SuiteRun& suite_run() {
  static SuiteRun run;
  static const bool filled = (fill_suite_run(run), true);
  (void)filled;
  return run;
}

Outcome closed_loop() {
  Check c;
  auto& run = suite_run();
  c.expect(run.ok, "suite commands failed");
  if (!run.ok) return c.done();
  const std::string suite = run.dir.str("suite");

  const auto rows = faultsim::read_manifest(suite + "/manifest.tsv");
  std::map<std::string, int> per_type;
  for (const auto& r : rows) ++per_type[r.truth_error_type];
  c.expect(rows.size() == 200, "suite size " + std::to_string(rows.size()));
  for (auto t : kSystemErrorTypes) {
    c.expect(per_type[std::string(to_string(t))] == 40,
             std::string(to_string(t)) + " count " +
                 std::to_string(per_type[std::string(to_string(t))]));
  }

  std::size_t max_iters = 0;
  for (const auto& r : run.graph_results) max_iters = std::max(max_iters, r.iterations);
  c.expect(max_iters <= 200, "iterations up to " + std::to_string(max_iters));

  for (const char* sub : {"graph1", "obs"}) {
    std::string printed;
    c.expect(cli({"bench", "score", "--suite", suite, "--results", run.dir.str(sub)}, &printed) ==
                 0,
             std::string("score ") + sub);
    const auto scores = nlohmann::json::parse(slurp(run.dir.path() / sub / "scores.json"));
    c.expect(scores["eta"].get<double>() == 1.0 && scores["oia"].get<double>() == 1.0,
             std::string(sub) + " ETA/OIA " + scores["eta_percent"].get<std::string>() + "/" +
                 scores["oia_percent"].get<std::string>());
    c.note(std::string(sub == std::string("obs") ? "obs" : "graph") + " ETA " +
           scores["eta_percent"].get<std::string>() + " OIA " +
           scores["oia_percent"].get<std::string>());
  }

  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(run.dir.path() / "graph1")) {
    const auto name = entry.path().filename();
    if (name == "scores.json") continue;
    ++compared;
    c.expect(slurp(entry.path()) == slurp(run.dir.path() / "graph2" / name),
             name.string() + " differs between runs");
  }
  c.note("max iterations " + std::to_string(max_iters));
  c.note(std::to_string(compared) + " result files byte-equal across runs");
  return c.done();
}

Outcome retrieval_seeding() {
  Check c;
  const auto cases =
      faultsim::make_suite(200, 1000, faultsim::uniform_system_mix(), faultsim::SimConfig{});
  const retrieval::HashingEmbedder embedder;
  std::size_t hits = 0;
  for (const auto& fc : cases) {
    const auto seeds =
        retrieval::seed_exploration(fc.graph, fc.question_var, fc.golden_answer, 16, embedder);
    const std::size_t top = std::min<std::size_t>(8, seeds.size());
    for (std::size_t i = 0; i < top; ++i) {
      if (seeds[i].var_id == fc.evidence_var_ids.front() && !(seeds[i] == fc.question_var)) {
        ++hits;
        break;
      }
    }
  }
  const double rate = static_cast<double>(hits) / static_cast<double>(cases.size());
  c.expect(rate >= 0.95, "evidence in top-8 on " + fmt("%.2f", rate * 100) + "%");
  c.note("evidence in top-8 on " + std::to_string(hits) + "/200 = " + fmt("%.2f", rate * 100) +
         "%");

  // recall@k fixture: seeds m1 m2 m3 q; golden {m2, m9}.
  const std::vector<VarRef> seeds = {{"m1", 0}, {"m2", 0}, {"m3", 0}, {"q", 0}};
  const std::vector<std::string> golden = {"m2", "m9"};
  c.expect(retrieval::recall_at_k(seeds, golden, 1) == 0.0, "recall@1");
  c.expect(retrieval::recall_at_k(seeds, golden, 2) == 0.5, "recall@2");
  c.expect(retrieval::recall_at_k(seeds, golden, 8) == 0.5, "recall@8");
  const std::vector<std::string> both = {"m3", "m1"};
  c.expect(retrieval::recall_at_k(seeds, both, 3) == 1.0, "recall@3 full");
  c.expect(retrieval::recall_at_k(seeds, std::vector<std::string>{}, 8) == 0.0, "recall empty");
  return c.done();
}

Outcome numeric_kernels() {
  Check c;
  using retrieval::Document;
  const retrieval::Corpus corpus(
      {Document{{"d1", 0}, "red car"}, Document{{"d2", 0}, "blue boat"},
       Document{{"d3", 0}, "red boat"}});
  // N = 3, every document has 2 terms so the length norm is 1 and each
  // matching term contributes exactly its idf.
  const double idf_red = std::log((3.0 - 2.0 + 0.5) / (2.0 + 0.5) + 1.0);
  const double idf_car = std::log((3.0 - 1.0 + 0.5) / (1.0 + 0.5) + 1.0);
  const auto ranked = retrieval::bm25_rank(corpus, "red car", 10);
  c.expect(ranked.size() == 2, "bm25 returned " + std::to_string(ranked.size()) + " docs");
  if (ranked.size() == 2) {
    c.expect(ranked[0].id.var_id == "d1" && near(ranked[0].score, idf_red + idf_car),
             "d1 score " + fmt("%.12f", ranked[0].score));
    c.expect(ranked[1].id.var_id == "d3" && near(ranked[1].score, idf_red),
             "d3 score " + fmt("%.12f", ranked[1].score));
  }

  const retrieval::RankedList a = {{{"a", 0}, 9.0}, {{"b", 0}, 5.0}, {{"c", 0}, 1.0}};
  const retrieval::RankedList b = {{{"a", 0}, 0.7}, {{"c", 0}, 0.2}};
  const std::vector<retrieval::RankedList> single = {a};
  const auto s = retrieval::rrf_fuse(single);
  c.expect(s.size() == 3 && near(s[0].score, 1.0 / 61) && near(s[1].score, 1.0 / 62) &&
               near(s[2].score, 1.0 / 63),
           "single-list rrf");
  const std::vector<retrieval::RankedList> two = {a, b};
  const auto f = retrieval::rrf_fuse(two);
  c.expect(!f.empty() && f[0].id.var_id == "a" && near(f[0].score, 2.0 / 61), "double rank-1");
  c.expect(f.size() == 3 && f[1].id.var_id == "c" && near(f[1].score, 1.0 / 63 + 1.0 / 62),
           "c fused score");

  auto scaled = [](retrieval::RankedList l, double k) {
    for (auto& x : l) x.score *= k;
    return l;
  };
  for (double k : {1e-6, 0.5, 3.0, 1e6}) {
    const std::vector<retrieval::RankedList> rescaled = {scaled(a, k), scaled(b, k)};
    c.expect(retrieval::rrf_fuse(rescaled) == f, "rescaling by " + fmt("%g", k));
  }
  c.note("bm25 d1=" + fmt("%.9f", idf_red + idf_car) + " d3=" + fmt("%.9f", idf_red));
  return c.done();
}

Outcome budget_safety() {
  Check c;
  auto& run = suite_run();
  c.expect(run.ok, "suite commands failed");
  std::uint64_t peak = 0;
  for (const auto* results : {&run.graph_results, &run.obs_results}) {
    for (const auto& r : *results) {
      peak = std::max(peak, r.peak_context_tokens);
      c.expect(r.peak_context_tokens <= 272000, r.case_id + " peak above T");
    }
  }

  // Tight threshold: management runs often; the loop itself throws if a pass
  // ever leaves the estimate above T.
  const std::uint64_t tight = 6000;
  const auto cases =
      faultsim::make_suite(50, 1000, faultsim::uniform_system_mix(), faultsim::SimConfig{});
  std::size_t reported = 0;
  std::uint64_t tight_peak = 0;
  for (const auto& fc : cases) {
    const CaseSpec spec = fc.spec();
    ExploreConfig cfg;
    cfg.context_threshold = tight;
    cfg.page_size_chars = 2000;
    cfg.seeds = source_evidence_seeds(fc.graph, spec);
    try {
      auto judge = faultsim::omniscient_judge(fc.graph, spec);
      const auto r = run_attribution(fc.graph, spec, *judge, cfg);
      tight_peak = std::max(tight_peak, r.peak_context_tokens);
      c.expect(r.peak_context_tokens <= tight, fc.case_id + " peak above tight T");
      if (r.predicted_op_id == *fc.truth_op_id) ++reported;
    } catch (const std::exception& e) {
      c.expect(false, fc.case_id + ": " + e.what());
    }
  }

  // One pass over an oversized context.
  WorkingContext ctx;
  ctx.turns.push_back({Role::kSystem, "instruction", {}});
  ctx.turns.push_back({Role::kUser, "case statement", {}});
  ctx.pinned = 2;
  for (int i = 0; i < 300; ++i) {
    ctx.turns.push_back({Role::kAssistant, std::string(2000, 'a'), {}});
    ctx.turns.push_back({Role::kTool, std::string(2000, 't'), std::string("view_op")});
  }
  const std::uint64_t before = ctx.estimate();
  ScriptedBackend summarizer(std::vector<std::string>{"SUMMARY: explored ops 1 to 300"});
  CostMeter meter;
  const auto after = manage_context(ctx, summarizer, 272000, meter);
  c.expect(before > 272000, "fixture not oversized");
  c.expect(after.estimate() < 272000, "one pass left " + std::to_string(after.estimate()));
  c.expect(summarizer.calls() == 1, "summarizer called " + std::to_string(summarizer.calls()));

  c.note("suite peak " + std::to_string(peak) + " tokens");
  c.note("T=" + std::to_string(tight) + " peak " + std::to_string(tight_peak) + ", " +
         std::to_string(reported) + "/50 still exact");
  c.note("oversized " + std::to_string(before) + " -> " + std::to_string(after.estimate()));
  return c.done();
}

Outcome format_fidelity() {
  Check c;
  for (std::uint64_t i = 0; i < 500; ++i) {
    ExecutionGraph g;
    if (i % 2 == 0) {
      g = testsupport::random_graph(i);
    } else {
      faultsim::SimConfig cfg;
      cfg.seed = i;
      cfg.n_messages = 1 + i % 7;
      if (i % 3) cfg.fault = kSystemErrorTypes[i % 5];
      g = faultsim::generate(cfg, "fmt").graph;
    }
    try {
      const std::string first = export_trace(g);
      const ExecutionGraph back = import_trace(first);
      const std::string second = export_trace(back);
      c.expect(first == second, "graph " + std::to_string(i) + " not a fixed point");
      c.expect(back == g, "graph " + std::to_string(i) + " changed on round trip");
      c.expect(export_dot(back) == export_dot(g), "graph " + std::to_string(i) + " dot differs");
    } catch (const std::exception& e) {
      c.expect(false, "graph " + std::to_string(i) + ": " + e.what());
    }
  }

  faultsim::SimConfig golden_cfg;
  golden_cfg.seed = 7;
  golden_cfg.fault = ErrorType::kRetrieval;
  const auto golden = faultsim::generate(golden_cfg, "case-0000");
  c.expect(export_trace(golden.graph) == slurp(testsupport::data_path("seed7.trace.json")),
           "seed7.trace.json drifted");
  c.expect(export_dot(golden.graph) == slurp(testsupport::data_path("seed7.dot")),
           "seed7.dot drifted");
  try {
    const auto loaded = load_trace_file(testsupport::data_path("seed7.trace.json"));
    c.expect(validate(loaded).empty(), "golden file has violations");
  } catch (const std::exception& e) {
    c.expect(false, std::string("golden load: ") + e.what());
  }
  c.note("500 graphs round-tripped, goldens stable");
  return c.done();
}

Outcome obs_search() {
  Check c;
  std::mt19937_64 rng(99);
  std::size_t truncated = 0;
  std::size_t total_hits = 0;
  const auto& patterns = testsupport::search_patterns();
  for (std::uint64_t i = 0; i < 100; ++i) {
    const OperationLog log = i % 2 ? testsupport::random_log(i, 1 + rng() % 30)
                                   : build_log(faultsim::generate(
                                                   [&] {
                                                     faultsim::SimConfig cfg;
                                                     cfg.seed = i;
                                                     cfg.n_messages = 2 + i % 10;
                                                     cfg.fault = kSystemErrorTypes[i % 5];
                                                     return cfg;
                                                   }(),
                                                   "obs")
                                                   .graph);
    const std::string& pattern = patterns[rng() % patterns.size()];
    const std::size_t limit = rng() % 10;
    const auto got = search_operations(log, pattern, limit);
    const auto want = testsupport::naive_search(log, pattern, limit);
    c.expect(got == want, "log " + std::to_string(i) + " pattern '" + pattern + "'");
    if (testsupport::naive_search(log, pattern, static_cast<std::size_t>(-1)).size() > limit) {
      ++truncated;
    }
    total_hits += got.size();
  }
  c.note("100 logs, " + std::to_string(total_hits) + " hits, " + std::to_string(truncated) +
         " truncated by limit");
  c.expect(truncated > 0, "no case exercised truncation");
  return c.done();
}

AttributionResult fixture_result(std::string id, std::string op, std::optional<ErrorType> type,
                                 std::uint64_t in, std::uint64_t out, double secs) {
  AttributionResult r;
  r.case_id = std::move(id);
  r.method = "graph";
  r.predicted_op_id = std::move(op);
  r.error_type = type;
  r.terminated_by = r.predicted_op_id.empty() ? Termination::kBudget : Termination::kReport;
  r.meter = CostMeter{in, out, secs};
  return r;
}

Outcome metrics() {
  Check c;
  const std::vector<Truth> truths = {{"c1", "op-00001", ErrorType::kExtraction},
                                     {"c2", "op-00002", ErrorType::kUpdate},
                                     {"c3", "op-00003", ErrorType::kRetrieval},
                                     {"c4", "op-00004", ErrorType::kResponse}};
  const std::vector<AttributionResult> results = {
      fixture_result("c1", "op-00001", ErrorType::kExtraction, 1000, 500, 30),
      fixture_result("c2", "op-00009", ErrorType::kUpdate, 2000, 0, 90),
      fixture_result("c3", "op-00003", ErrorType::kResponse, 500, 500, 0),
      fixture_result("c4", "", std::nullopt, 4000, 1500, 120)};
  // Types right: c1, c2. Ops right: c1, c3. Tokens (1500+2000+1000+5500)/4
  // = 2500. Seconds 240/4 = 60 -> 1 minute.
  const Scores s = score(results, truths);
  c.expect(s.eta == 0.5 && s.oia == 0.5, "eta/oia");
  c.expect(s.mean_tokens_k == 2.5 && s.mean_minutes == 1.0, "costs");
  c.expect(s.n == 4, "n");

  // Through the CLI: percentages with two decimals.
  TempDir dir("accept-metrics");
  fs::create_directories(dir.path() / "suite");
  fs::create_directories(dir.path() / "results");
  std::string manifest = "case_id\tseed\ttruth_op_id\ttruth_error_type\n";
  for (const auto& t : truths) {
    manifest += t.case_id + "\t0\t" + t.op_id + "\t" + std::string(to_string(t.error_type)) + "\n";
  }
  spit(dir.path() / "suite" / "manifest.tsv", manifest);
  for (const auto& r : results) {
    spit(dir.path() / "results" / (r.case_id + ".result.json"), to_json(r).dump(2));
  }
  std::string printed;
  c.expect(cli({"bench", "score", "--suite", dir.str("suite"), "--results", dir.str("results")},
               &printed) == 0,
           "cli score failed");
  c.expect(printed.find("graph  4  50.00  50.00  2.50  1.00") != std::string::npos,
           "printed table: " + printed);

  // Thirds need rounding.
  const std::vector<AttributionResult> three = {
      fixture_result("c1", "op-00001", ErrorType::kExtraction, 1, 0, 0),
      fixture_result("c2", "x", ErrorType::kJudge, 1, 0, 0),
      fixture_result("c3", "x", ErrorType::kJudge, 1, 0, 0)};
  fs::remove_all(dir.path() / "results");
  fs::create_directories(dir.path() / "results");
  std::string thirds_manifest = "case_id\tseed\ttruth_op_id\ttruth_error_type\n";
  for (std::size_t i = 0; i < 3; ++i) {
    thirds_manifest += truths[i].case_id + "\t0\t" + truths[i].op_id + "\t" +
                       std::string(to_string(truths[i].error_type)) + "\n";
    spit(dir.path() / "results" / (three[i].case_id + ".result.json"), to_json(three[i]).dump());
  }
  spit(dir.path() / "suite" / "manifest.tsv", thirds_manifest);
  c.expect(cli({"bench", "score", "--suite", dir.str("suite"), "--results", dir.str("results")},
               &printed) == 0,
           "cli score (thirds) failed");
  c.expect(printed.find("33.33  33.33") != std::string::npos, "thirds table: " + printed);
  c.note("ETA 50.00 OIA 50.00 tokens 2.50k 1.00 min; 1/3 -> 33.33");
  return c.done();
}

Outcome reporter_optimizer() {
  Check c;
  for (std::size_t n = 0; n <= 9; ++n) {
    std::vector<AttributionResult> results;
    for (std::size_t i = 0; i < n; ++i) {
      results.push_back(fixture_result("c" + std::to_string(i), "op-00001",
                                       ErrorType::kRetrieval, 0, 0, 0));
    }
    ScriptedBackend writer(std::vector<std::string>{"# Report"}, true);
    const auto report = build_report(results, writer);
    c.expect(report.revision == (n + 3) / 4,
             "n=" + std::to_string(n) + " revisions " + std::to_string(report.revision));
    c.expect(writer.calls() == (n + 3) / 4, "n=" + std::to_string(n) + " calls");
  }

  // Two rounds against a generated case whose decisive op is "search".
  faultsim::SimConfig cfg;
  cfg.seed = 11;
  cfg.n_messages = 6;
  cfg.fault = ErrorType::kRetrieval;
  const auto fc = faultsim::generate(cfg, "opt");
  const std::string op_name = fc.graph.operation(*fc.truth_op_id).name;
  PromptRegistry registry({PromptEntry{"search_prompt", "v0", {}, {op_name}},
                           PromptEntry{"answer_prompt", "answer briefly", {}, {"generate"}}});
  AttributionResult r = fixture_result("opt", *fc.truth_op_id, ErrorType::kRetrieval, 0, 0, 0);
  const std::vector<FailedCase> failed = {FailedCase{r, &fc.graph}};
  ScriptedBackend round1(std::vector<std::string>{"suggestion", "directive", "v1"});
  const auto first = optimize_round(failed, registry, round1);
  ScriptedBackend round2(std::vector<std::string>{"suggestion", "directive", "v2"});
  const auto second = optimize_round(failed, first.registry, round2);
  const auto* e1 = first.registry.find("search_prompt");
  const auto* e2 = second.registry.find("search_prompt");
  c.expect(e1 && e1->text == "v1" && e1->history == std::vector<std::string>{"v0"},
           "round one history");
  c.expect(e2 && e2->text == "v2" && e2->history == std::vector<std::string>{"v1"},
           "round two history");
  c.expect(second.registry.find("answer_prompt")->history.empty(), "untouched prompt changed");

  // Zero failures through the CLI: the registry file is copied byte for byte.
  TempDir dir("accept-opt");
  fs::create_directories(dir.path() / "results");
  spit(dir.path() / "results" / "c0.result.json",
       to_json(fixture_result("c0", "", std::nullopt, 10, 0, 0)).dump());
  const std::string original =
      "{\"search_prompt\": {\"text\": \"v0\",   \"history\": [], \"bound_ops\": [\"search\"]}}";
  spit(dir.path() / "registry.json", original);
  c.expect(cli({"optimize", "--results", dir.str("results"), "--suite", dir.str(), "--registry",
                dir.str("registry.json"), "--out", dir.str("out.json"), "--backend",
                "scripted:" + dir.str("missing.json")}) == 0,
           "cli optimize failed");
  c.expect(slurp(dir.path() / "out.json") == original, "zero-failure round changed bytes");
  c.note("revisions ceil(n/4) for n=0..9, history holds one entry, no-op round byte-identical");
  return c.done();
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"formalism-oracle", formalism_oracle},
      {"closed-loop-attribution", closed_loop},
      {"retrieval-seeding", retrieval_seeding},
      {"numeric-kernels", numeric_kernels},
      {"budget-safety", budget_safety},
      {"format-fidelity", format_fidelity},
      {"obs-search", obs_search},
      {"metrics", metrics},
      {"reporter-optimizer", reporter_optimizer},
  };
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << (o.detail.empty() ? "" : ": ")
              << o.detail << std::endl;
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
