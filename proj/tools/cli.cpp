#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tracegraph/attribution.hpp"
#include "tracegraph/errors.hpp"
#include "tracegraph/explorer.hpp"
#include "tracegraph/faultsim.hpp"
#include "tracegraph/obs_explorer.hpp"
#include "tracegraph/reporter.hpp"
#include "tracegraph/trace_io.hpp"

namespace tracegraph::cli {

namespace fs = std::filesystem;

namespace {

/// Input problems the user can fix; mapped to kExitInput.
struct InputError : Error {
  using Error::Error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
}

std::string pct(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", ratio * 100.0);
  return buf;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

CaseSpec load_case(const std::string& path) {
  try {
    return case_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("case file '" + path + "': " + e.what());
  }
}

AttributionResult load_result(const std::string& path) {
  try {
    return result_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("result file '" + path + "': " + e.what());
  }
}

/// *.result.json files in `dir`, by file name.
std::vector<AttributionResult> load_results(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("'" + dir + "' is not a directory");
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.ends_with(".result.json")) paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<AttributionResult> results;
  for (const auto& p : paths) results.push_back(load_result(p));
  return results;
}

std::string result_text(const AttributionResult& r) { return to_json(r).dump(2) + "\n"; }

struct AgentOptions {
  std::string method = "graph";
  std::string backend;
  bool seed_evidence = false;
  std::string prior_knowledge_path;
  std::size_t capacity = 16;
  std::uint64_t threshold = 272000;
  std::size_t max_iters = 200;
  double temperature = 1.0;
  std::size_t page_size = 4000;
  std::size_t search_limit = 8;
};

void add_agent_options(CLI::App* cmd, AgentOptions& o) {
  cmd->add_option("--method", o.method, "graph or obs")
      ->check(CLI::IsMember({"graph", "obs"}))
      ->capture_default_str();
  cmd->add_option("--backend", o.backend,
                  "omniscient | scripted:<script.json> | http (TRACEGRAPH_LLM_* env vars)")
      ->required();
  cmd->add_flag("--seed-evidence", o.seed_evidence,
                "start from the case's source evidence instead of retrieval");
  cmd->add_option("--prior-knowledge", o.prior_knowledge_path,
                  "file with a pipeline description appended to the instruction");
  cmd->add_option("-N,--capacity", o.capacity, "to-explore list capacity")->capture_default_str();
  cmd->add_option("-T,--threshold", o.threshold, "context token threshold")
      ->capture_default_str();
  cmd->add_option("--max-iters", o.max_iters, "assistant turn budget")->capture_default_str();
  cmd->add_option("--temperature", o.temperature)->capture_default_str();
  cmd->add_option("--page-size", o.page_size, "characters per page")->capture_default_str();
  cmd->add_option("--search-limit", o.search_limit, "default search result cap")
      ->capture_default_str();
}

std::unique_ptr<Backend> make_backend(const std::string& spec, const std::string& method,
                                      const ExecutionGraph* graph, const CaseSpec* case_spec) {
  if (spec == "omniscient") {
    if (!graph || !case_spec) throw ConfigError("the omniscient backend needs a case");
    if (!case_spec->truth_op_id) {
      // Still a valid judge: it explores and never reports.
    }
    if (method == "obs") return faultsim::obs_twin_judge(*case_spec);
    return faultsim::omniscient_judge(*graph, *case_spec);
  }
  if (spec.starts_with("scripted:")) {
    try {
      return ScriptedBackend::from_file(spec.substr(9));
    } catch (const NotFound& e) {
      throw InputError(e.what());
    }
  }
  if (spec == "http") return std::make_unique<HttpBackend>(HttpBackendConfig::from_env());
  throw ConfigError("unknown backend '" + spec + "'");
}

AttributionResult attribute_case(const ExecutionGraph& graph, const CaseSpec& spec,
                                 const AgentOptions& o, std::vector<ChatTurn>* transcript) {
  ExploreConfig config;
  config.capacity = o.capacity;
  config.context_threshold = o.threshold;
  config.max_iters = o.max_iters;
  config.temperature = o.temperature;
  config.page_size_chars = o.page_size;
  config.search_limit = o.search_limit;
  if (!o.prior_knowledge_path.empty()) config.prior_knowledge = read_file(o.prior_knowledge_path);
  if (o.seed_evidence) config.seeds = source_evidence_seeds(graph, spec);

  auto backend = make_backend(o.backend, o.method, &graph, &spec);
  AttributionResult r = o.method == "obs" ? run_attribution_obs(graph, spec, *backend, config)
                                          : run_attribution(graph, spec, *backend, config);
  if (transcript) *transcript = r.transcript;
  return r;
}

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& path, std::ostream& out) {
  ExecutionGraph graph = load_trace_file(path, ImportOptions{false});
  const auto report = validate(graph);
  for (const auto& v : report.violations) {
    out << (v.severity == Severity::kError ? "ERROR " : "WARNING ") << v.code << " " << v.id
        << ": " << v.detail << "\n";
  }
  if (report.ok()) {
    out << "OK " << path << " (" << graph.operations().size() << " operations, "
        << graph.variables().size() << " variables, " << graph.edges().size() << " edges)\n";
    return kExitOk;
  }
  return kExitViolations;
}

int cmd_viz(const std::string& path, const std::string& out_path, std::size_t max_chars,
            std::ostream& out) {
  const ExecutionGraph graph = load_trace_file(path);
  const std::string dot = export_dot(graph, DotOptions{max_chars});
  if (out_path.empty()) {
    out << dot;
  } else {
    write_file(out_path, dot);
  }
  return kExitOk;
}

int cmd_attribute(const std::string& trace, const std::string& case_path, const AgentOptions& o,
                  const std::string& out_path, const std::string& transcript_path,
                  std::ostream& out) {
  const ExecutionGraph graph = load_trace_file(trace);
  const CaseSpec spec = load_case(case_path);
  std::vector<ChatTurn> transcript;
  const AttributionResult r = attribute_case(graph, spec, o, &transcript);
  if (out_path.empty()) {
    out << result_text(r);
  } else {
    write_file(out_path, result_text(r));
  }
  if (!transcript_path.empty()) write_file(transcript_path, transcript_json(transcript).dump(2) + "\n");
  return r.terminated_by == Termination::kReport ? kExitOk : kExitBudget;
}

struct GenerateOptions {
  std::string out_dir;
  std::size_t n = 200;
  std::uint64_t seed = 1;
  std::vector<std::string> types;
  std::size_t messages = 40;
  std::size_t top_k = 10;
};

int cmd_bench_generate(const GenerateOptions& g, std::ostream& out) {
  faultsim::SuiteMix mix;
  if (g.types.empty()) {
    mix = faultsim::uniform_system_mix();
  } else {
    for (const auto& t : g.types) {
      if (t == "none") {
        mix.emplace_back(std::nullopt, 1.0);
        continue;
      }
      auto parsed = parse_error_type(t);
      if (!parsed || !is_system_error(*parsed)) {
        throw InputError("'" + t + "' is not an injectable error type");
      }
      mix.emplace_back(*parsed, 1.0);
    }
  }
  faultsim::SimConfig base;
  base.n_messages = g.messages;
  base.top_k = g.top_k;
  const auto cases = faultsim::make_suite(g.n, g.seed, mix, base);
  faultsim::write_suite(g.out_dir, cases);
  out << "wrote " << cases.size() << " cases to " << g.out_dir << "\n";
  return kExitOk;
}

int cmd_bench_run(const std::string& suite, const std::string& out_dir, const AgentOptions& o,
                  std::size_t jobs, std::ostream& out) {
  const auto rows = faultsim::read_manifest((fs::path(suite) / "manifest.tsv").string());
  fs::create_directories(out_dir);

  std::vector<std::optional<AttributionResult>> results(rows.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      try {
        const auto& row = rows[i];
        const ExecutionGraph graph =
            load_trace_file((fs::path(suite) / (row.case_id + ".trace.json")).string());
        const CaseSpec spec = load_case((fs::path(suite) / (row.case_id + ".case.json")).string());
        results[i] = attribute_case(graph, spec, o, nullptr);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!failure) failure = std::current_exception();
        next = rows.size();
      }
    }
  };
  jobs = std::max<std::size_t>(1, jobs);
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  std::size_t reported = 0;
  for (const auto& r : results) {
    write_file((fs::path(out_dir) / (r->case_id + ".result.json")).string(), result_text(*r));
    all.push_back(to_json(*r));
    if (r->terminated_by == Termination::kReport) ++reported;
  }
  write_file((fs::path(out_dir) / "results.json").string(), all.dump(2) + "\n");
  out << "ran " << results.size() << " cases, " << reported << " reported\n";
  return kExitOk;
}

int cmd_bench_score(const std::string& suite, const std::string& results_dir,
                    const std::string& out_path, std::ostream& out) {
  const auto rows = faultsim::read_manifest((fs::path(suite) / "manifest.tsv").string());
  std::vector<Truth> truths;
  std::vector<AttributionResult> results;
  for (const auto& row : rows) {
    if (row.truth_op_id.empty()) continue;
    auto type = parse_error_type(row.truth_error_type);
    if (!type) throw InputError("manifest has unknown error type '" + row.truth_error_type + "'");
    truths.push_back(Truth{row.case_id, row.truth_op_id, *type});
    results.push_back(
        load_result((fs::path(results_dir) / (row.case_id + ".result.json")).string()));
  }
  const Scores s = score(results, truths);
  const std::string method = results.empty() ? "-" : results.front().method;
  out << "method  cases  ETA(%)  OIA(%)  tokens(k)  minutes\n"
      << method << "  " << s.n << "  " << pct(s.eta) << "  " << pct(s.oia) << "  "
      << fixed2(s.mean_tokens_k) << "  " << fixed2(s.mean_minutes) << "\n";

  nlohmann::ordered_json j;
  j["method"] = method;
  j["cases"] = s.n;
  j["eta"] = s.eta;
  j["oia"] = s.oia;
  j["eta_percent"] = pct(s.eta);
  j["oia_percent"] = pct(s.oia);
  j["mean_tokens_k"] = s.mean_tokens_k;
  j["mean_minutes"] = s.mean_minutes;
  const std::string target =
      out_path.empty() ? (fs::path(results_dir) / "scores.json").string() : out_path;
  write_file(target, j.dump(2) + "\n");
  return kExitOk;
}

int cmd_report(const std::string& results_dir, const std::string& backend_spec,
               const std::string& out_path, const std::string& exemplar_path,
               std::size_t batch_size, std::ostream& out, std::ostream& err) {
  const auto results = load_results(results_dir);
  auto backend = make_backend(backend_spec, "graph", nullptr, nullptr);
  ReportOptions options;
  options.batch_size = batch_size;
  if (!exemplar_path.empty()) options.exemplar = read_file(exemplar_path);
  const DiagnosticReport report = build_report(results, *backend, options);
  write_file(out_path, report.body);
  out << "report revisions: " << report.revision << " (" << report.case_ids.size()
      << " cases)\n";
  if (report.error) {
    err << "report incomplete: " << report.error_message << "\n";
    return kExitRun;
  }
  return kExitOk;
}

int cmd_optimize(const std::string& results_dir, const std::string& suite,
                 const std::string& registry_path, const std::string& out_path,
                 const std::string& backend_spec, std::ostream& out) {
  const auto results = load_results(results_dir);
  std::vector<AttributionResult> failed;
  for (const auto& r : results) {
    if (!r.predicted_op_id.empty()) failed.push_back(r);
  }
  const std::string original = read_file(registry_path);
  if (failed.empty()) {
    write_file(out_path, original);
    out << "no attributed failures; registry unchanged\n";
    return kExitOk;
  }
  PromptRegistry registry = PromptRegistry::load(registry_path);

  std::vector<std::unique_ptr<ExecutionGraph>> graphs;
  std::vector<FailedCase> cases;
  for (const auto& r : failed) {
    graphs.push_back(std::make_unique<ExecutionGraph>(
        load_trace_file((fs::path(suite) / (r.case_id + ".trace.json")).string())));
    cases.push_back(FailedCase{r, graphs.back().get()});
  }
  auto backend = make_backend(backend_spec, "graph", nullptr, nullptr);
  const OptimizeOutcome outcome = optimize_round(cases, registry, *backend);
  outcome.registry.save(out_path);
  out << "feedback items: " << outcome.feedback.size() << "; rewritten:";
  for (const auto& name : outcome.rewritten) out << " " << name;
  out << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Execution-graph tracing and failure attribution toolkit", "tracegraph"};
  app.require_subcommand(1);

  std::string path;
  std::string out_path;

  auto* validate_cmd = app.add_subcommand("validate", "check a trace file for invariant violations");
  validate_cmd->add_option("trace", path, "trace file")->required();

  std::size_t max_chars = 40;
  auto* viz_cmd = app.add_subcommand("viz", "render a trace as Graphviz dot");
  viz_cmd->add_option("trace", path, "trace file")->required();
  viz_cmd->add_option("-o,--out", out_path, "output .dot file (default: stdout)");
  viz_cmd->add_option("--max-value-chars", max_chars)->capture_default_str();

  AgentOptions agent;
  std::string case_path;
  std::string transcript_path;
  auto* attr_cmd = app.add_subcommand("attribute", "find the decisive error of one failed case");
  attr_cmd->add_option("trace", path, "trace file")->required();
  attr_cmd->add_option("--case", case_path, "case description (.case.json)")->required();
  attr_cmd->add_option("-o,--out", out_path, "result file (default: stdout)");
  attr_cmd->add_option("--transcript", transcript_path, "write the full agent transcript here");
  add_agent_options(attr_cmd, agent);

  auto* bench_cmd = app.add_subcommand("bench", "synthetic benchmark suites");
  bench_cmd->require_subcommand(1);

  GenerateOptions gen;
  auto* gen_cmd = bench_cmd->add_subcommand("generate", "write a fault-injected suite");
  gen_cmd->add_option("--out", gen.out_dir, "suite directory")->required();
  gen_cmd->add_option("-n,--cases", gen.n)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "base seed")->capture_default_str();
  gen_cmd->add_option("--types", gen.types, "error types to mix evenly (default: the five pipeline types)")
      ->delimiter(',');
  gen_cmd->add_option("--messages", gen.messages, "dialogue messages per case")
      ->capture_default_str();
  gen_cmd->add_option("--top-k", gen.top_k, "retrieved memories")->capture_default_str();

  std::string suite;
  std::string results_dir;
  std::size_t jobs = 1;
  AgentOptions bench_agent;
  auto* run_cmd = bench_cmd->add_subcommand("run", "attribute every case of a suite");
  run_cmd->add_option("--suite", suite)->required();
  run_cmd->add_option("--out", results_dir, "results directory")->required();
  run_cmd->add_option("--jobs", jobs, "parallel cases")->capture_default_str();
  add_agent_options(run_cmd, bench_agent);

  auto* score_cmd = bench_cmd->add_subcommand("score", "accuracy and cost of a results directory");
  score_cmd->add_option("--suite", suite)->required();
  score_cmd->add_option("--results", results_dir)->required();
  score_cmd->add_option("--out", out_path, "scores JSON (default: <results>/scores.json)");

  std::string backend_spec;
  std::string exemplar;
  std::size_t batch_size = 4;
  auto* report_cmd = app.add_subcommand("report", "synthesize a diagnostic report from results");
  report_cmd->add_option("--results", results_dir)->required();
  report_cmd->add_option("--backend", backend_spec, "scripted:<script.json> | http")->required();
  report_cmd->add_option("-o,--out", out_path, "Markdown output")->required();
  report_cmd->add_option("--exemplar", exemplar, "example report shown to the writer");
  report_cmd->add_option("--batch-size", batch_size)->capture_default_str();

  std::string registry_path;
  auto* opt_cmd = app.add_subcommand("optimize", "rewrite prompts localized by attribution results");
  opt_cmd->add_option("--results", results_dir)->required();
  opt_cmd->add_option("--suite", suite, "directory holding <case>.trace.json files")->required();
  opt_cmd->add_option("--registry", registry_path, "prompt registry JSON")->required();
  opt_cmd->add_option("-o,--out", out_path, "updated registry")->required();
  opt_cmd->add_option("--backend", backend_spec, "scripted:<script.json> | http")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*validate_cmd) return cmd_validate(path, out);
    if (*viz_cmd) return cmd_viz(path, out_path, max_chars, out);
    if (*attr_cmd) return cmd_attribute(path, case_path, agent, out_path, transcript_path, out);
    if (*gen_cmd) return cmd_bench_generate(gen, out);
    if (*run_cmd) return cmd_bench_run(suite, results_dir, bench_agent, jobs, out);
    if (*score_cmd) return cmd_bench_score(suite, results_dir, out_path, out);
    if (*report_cmd) {
      return cmd_report(results_dir, backend_spec, out_path, exemplar, batch_size, out, err);
    }
    if (*opt_cmd) return cmd_optimize(results_dir, suite, registry_path, out_path, backend_spec, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NotFound& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << " (at byte " << e.offset() << ")\n";
    return kExitInput;
  } catch (const ValidationError& e) {
    err << "error: " << e.code() << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const RunError& e) {
    err << "error: " << e.what() << "\n";
    return kExitRun;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitRun;
  }
  return kExitInput;
}

}  // namespace tracegraph::cli
