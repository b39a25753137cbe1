#include "tracegraph/explorer.hpp"

#include <algorithm>
#include <charconv>
#include <regex>
#include <sstream>

#include "tool_args.hpp"
#include "tracegraph/attribution.hpp"
#include "tracegraph/errors.hpp"
#include "tracegraph/taxonomy.hpp"
#include "tracegraph/text_util.hpp"

namespace tracegraph {

void ExploreConfig::check() const {
  if (capacity < 2) throw ConfigError("to-explore capacity must be >= 2");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (page_size_chars < 1) throw ConfigError("page_size_chars must be >= 1");
  if (search_limit < 1) throw ConfigError("search_limit must be >= 1");
}

// ---------------------------------------------------------------------------
// ToExploreList

ToExploreList::AddStatus ToExploreList::add(const VarRef& ref, Tick ts) {
  if (explored_.count(ref)) return AddStatus::kExplored;
  if (queued(ref)) return AddStatus::kQueued;
  if (queue_.size() >= capacity_) return AddStatus::kFull;
  queue_.emplace(ts, ref.var_id, ref.version);
  return AddStatus::kAccepted;
}

std::optional<std::pair<VarRef, Tick>> ToExploreList::pop() {
  if (queue_.empty()) return std::nullopt;
  auto node = queue_.extract(queue_.begin());
  auto& [ts, var_id, version] = node.value();
  VarRef ref{std::move(var_id), version};
  explored_.insert(ref);
  return std::pair{std::move(ref), ts};
}

bool ToExploreList::queued(const VarRef& ref) const {
  return std::any_of(queue_.begin(), queue_.end(), [&](const Key& k) {
    return std::get<1>(k) == ref.var_id && std::get<2>(k) == ref.version;
  });
}

std::vector<std::pair<VarRef, Tick>> ToExploreList::entries() const {
  std::vector<std::pair<VarRef, Tick>> out;
  for (const auto& [ts, var_id, version] : queue_) out.push_back({VarRef{var_id, version}, ts});
  return out;
}

std::string_view to_string(ToExploreList::AddStatus status) {
  switch (status) {
    case ToExploreList::AddStatus::kAccepted: return "accepted";
    case ToExploreList::AddStatus::kFull: return "list full";
    case ToExploreList::AddStatus::kExplored: return "already explored";
    case ToExploreList::AddStatus::kQueued: return "already queued";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string metadata_line(const Metadata& md) {
  std::string out;
  for (const auto& [k, v] : md) {
    if (!out.empty()) out += "; ";
    out += k + "=" + v;
  }
  return out;
}

void write_value(std::ostringstream& out, std::string_view value) {
  out << "    value:";
  if (value.empty()) {
    out << " (empty)\n";
    return;
  }
  out << "\n";
  while (true) {
    auto nl = value.find('\n');
    out << "      " << value.substr(0, nl) << "\n";
    if (nl == std::string_view::npos) break;
    value.remove_prefix(nl + 1);
  }
}

void write_var_section(std::ostringstream& out, const ExecutionGraph& graph, std::string_view title,
                       const std::vector<VarRef>& refs, RenderMode mode) {
  out << title << " (" << refs.size() << "):\n";
  for (const auto& ref : refs) {
    const auto& chain = graph.variable(ref.var_id);
    const auto& v = graph.version(ref);
    out << "- " << to_string(ref) << " [" << chain.category << "] ts=" << v.ts;
    if (!v.comment.empty()) out << " " << v.comment;
    out << "\n";
    if (mode == RenderMode::kFull) write_value(out, v.value);
  }
}

std::string render_all(const GraphIndex& index, std::string_view op_id, RenderMode mode) {
  const auto& graph = index.graph();
  const auto& op = graph.operation(op_id);
  std::ostringstream out;
  out << "OPERATION " << op.op_id << "\n"
      << "name: " << op.name << "\n"
      << "category: " << op.category << "\n"
      << "comment: " << op.comment << "\n"
      << "session: " << op.session_id << "\n"
      << "interval: " << op.ts_start << ".." << op.ts_end << "\n"
      << "metadata: " << metadata_line(op.metadata) << "\n";
  write_var_section(out, graph, "INPUTS", index.inputs_of(op_id), mode);
  write_var_section(out, graph, "OUTPUTS", index.outputs_of(op_id), mode);

  std::vector<const DependencyEdge*> deps;
  for (const auto& e : graph.edges()) {
    if (e.op_id == op_id) deps.push_back(&e);
  }
  std::sort(deps.begin(), deps.end(), [](auto* a, auto* b) {
    return std::tie(a->src, a->dst, a->comment) < std::tie(b->src, b->dst, b->comment);
  });
  out << "DEPENDENCIES (" << deps.size() << "):\n";
  for (const auto* e : deps) {
    out << "- " << to_string(e->src) << " -> " << to_string(e->dst);
    if (!e->comment.empty()) out << " " << e->comment;
    out << "\n";
  }
  return out.str();
}

std::string page_of(std::string_view text, std::size_t page, std::size_t page_size,
                    std::string_view what) {
  auto pages = text::paginate(text, page_size);
  if (page >= pages.size()) {
    throw RangeError("page " + std::to_string(page) + " out of range for " + std::string(what) +
                     " (" + std::to_string(pages.size()) + " pages)");
  }
  return std::string(pages[page]);
}

}  // namespace

std::string render_operation_subgraph(const GraphIndex& index, std::string_view op_id,
                                      RenderMode mode, std::size_t page,
                                      std::size_t page_size_chars) {
  return page_of(render_all(index, op_id, mode), page, page_size_chars, op_id);
}

std::size_t operation_page_count(const GraphIndex& index, std::string_view op_id,
                                 RenderMode mode, std::size_t page_size_chars) {
  return text::paginate(render_all(index, op_id, mode), page_size_chars).size();
}

std::string read_variable(const ExecutionGraph& graph, const VarRef& ref, std::size_t page,
                          std::size_t page_size_chars) {
  return page_of(graph.version(ref).value, page, page_size_chars, to_string(ref));
}

std::size_t variable_page_count(const ExecutionGraph& graph, const VarRef& ref,
                                std::size_t page_size_chars) {
  return text::paginate(graph.version(ref).value, page_size_chars).size();
}

std::vector<SearchHit> search_variable(const ExecutionGraph& graph, const VarRef& ref,
                                       std::string_view pattern, std::size_t max_hits) {
  const std::string& value = graph.version(ref).value;
  std::regex re;
  try {
    re = std::regex(pattern.begin(), pattern.end(), std::regex::extended);
  } catch (const std::regex_error& e) {
    throw ToolError("invalid regex '" + std::string(pattern) + "': " + e.what());
  }
  std::vector<SearchHit> hits;
  for (auto it = std::sregex_iterator(value.begin(), value.end(), re);
       it != std::sregex_iterator() && hits.size() < max_hits; ++it) {
    if (it->length(0) == 0) continue;
    std::size_t offset = static_cast<std::size_t>(it->position(0));
    std::size_t start = offset;
    for (int back = 0; back < 20 && start > 0; ++back) {
      --start;
      while (start > 0 && (static_cast<unsigned char>(value[start]) & 0xC0) == 0x80) --start;
    }
    std::string_view tail = std::string_view(value).substr(start);
    hits.push_back(SearchHit{offset, std::string(tail.substr(0, text::utf8_offset(tail, 80)))});
  }
  return hits;
}

VarRef parse_var_ref(const ExecutionGraph& graph, std::string_view text) {
  text = text::trim(text);
  if (text.empty()) throw ToolError("empty variable reference");
  auto hash = text.find('#');
  std::string var_id(text.substr(0, hash));
  const auto* chain = graph.find_variable(var_id);
  if (!chain) throw NotFound("unknown variable '" + var_id + "'");
  if (hash == std::string_view::npos) return VarRef{var_id, chain->latest().version};
  std::string_view digits = text.substr(hash + 1);
  std::uint32_t version = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), version);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) {
    throw ToolError("malformed variable reference '" + std::string(text) + "'");
  }
  VarRef ref{var_id, version};
  graph.version(ref);  // NotFound for a missing version
  return ref;
}

// ---------------------------------------------------------------------------
// Tool environment

const ToolSchema& ExplorerEnvironment::tool_schema() {
  static const ToolSchema schema = {
      {"pop_next", "Remove the earliest variable from the to-explore list and start on it.", {}},
      {"list_ops",
       "List operations that read or write a variable.",
       {"var: variable id or var#version (default: the last popped variable)",
        "scope: chain (all versions, default) or version (only that version)"}},
      {"view_op",
       "Show one operation with its inputs, outputs and dependency edges.",
       {"op_id: operation id", "mode: preview (no values, default) or full",
        "page: page number, default 0"}},
      {"read_var", "Read a variable value page by page.",
       {"var: variable id or var#version", "page: page number, default 0"}},
      {"search_var", "Regex search inside one variable value (POSIX extended syntax).",
       {"var: variable id or var#version", "regex: pattern", "max_hits: default 8"}},
      {"add_to_explore", "Queue variables to inspect later. Full lists reject new entries.",
       {"vars: comma-separated variable references"}},
      {"report_fault", "Finish with the decisive faulty operation.",
       {"op_id: operation id", "error_type: one of the listed error types",
        "explanation: short justification"}},
  };
  return schema;
}

ExplorerEnvironment::ExplorerEnvironment(const ExecutionGraph& graph, const ExploreConfig& config)
    : graph_(graph),
      index_(graph),
      config_(config),
      schema_(tool_schema()),
      list_(config.capacity) {
  config_.check();
}

std::size_t ExplorerEnvironment::seed(const std::vector<VarRef>& refs) {
  std::size_t accepted = 0;
  for (const auto& ref : refs) {
    if (list_.add(ref, graph_.version(ref).ts) == ToExploreList::AddStatus::kAccepted) ++accepted;
  }
  return accepted;
}

StepResult ExplorerEnvironment::step(const ToolCall& call) {
  try {
    if (call.tool == "pop_next") return {pop_next(), {}};
    if (call.tool == "list_ops") return {list_ops(call), {}};
    if (call.tool == "view_op") return {view_op(call), {}};
    if (call.tool == "read_var") return {read_var(call), {}};
    if (call.tool == "search_var") return {search_var(call), {}};
    if (call.tool == "add_to_explore") return {add_to_explore(call), {}};
    if (call.tool == "report_fault") return report_fault(call);
    throw ToolError("unknown tool '" + call.tool + "'");
  } catch (const ToolError& e) {
    return {std::string("ERROR: ") + e.what(), {}};
  } catch (const NotFound& e) {
    return {std::string("ERROR: ") + e.what(), {}};
  } catch (const RangeError& e) {
    return {std::string("ERROR: ") + e.what(), {}};
  }
}

std::string ExplorerEnvironment::pop_next() {
  auto next = list_.pop();
  if (!next) return "to-explore list is empty";
  popped_.push_back(next->first);
  const auto& chain = graph_.variable(next->first.var_id);
  const auto& v = graph_.version(next->first);
  std::ostringstream out;
  out << "POPPED " << to_string(next->first) << " ts=" << next->second
      << " category=" << chain.category << "\n";
  if (!v.comment.empty()) out << "comment: " << v.comment << "\n";
  out << "versions in chain: " << chain.versions.size() << "\n"
      << "remaining in list: " << list_.size() << "/" << list_.capacity() << "\n";
  return out.str();
}

std::string ExplorerEnvironment::list_ops(const ToolCall& call) {
  VarRef ref;
  if (auto var = tool_args::optional(call, "var")) {
    ref = parse_var_ref(graph_, *var);
  } else if (!popped_.empty()) {
    ref = popped_.back();
  } else {
    throw ToolError("list_ops needs 'var' before anything was popped");
  }
  const std::string scope = tool_args::optional(call, "scope").value_or("chain");
  std::vector<std::string> ops;
  if (scope == "chain") {
    ops = index_.ops_involving(ref.var_id);
  } else if (scope == "version") {
    ops = index_.ops_involving(ref.var_id, ref.version);
  } else {
    throw ToolError("scope must be 'chain' or 'version'");
  }
  std::ostringstream out;
  out << "OPS INVOLVING " << (scope == "chain" ? ref.var_id : to_string(ref)) << " ("
      << ops.size() << "):\n";
  for (const auto& id : ops) {
    const auto& op = graph_.operation(id);
    out << "- " << op.op_id << " " << op.name << " [" << op.category << "] ts=" << op.ts_start
        << ".." << op.ts_end << "\n";
  }
  return out.str();
}

std::string ExplorerEnvironment::view_op(const ToolCall& call) {
  const std::string op_id = tool_args::required(call, "op_id");
  const std::string mode_text = tool_args::optional(call, "mode").value_or("preview");
  RenderMode mode;
  if (mode_text == "preview") {
    mode = RenderMode::kPreview;
  } else if (mode_text == "full") {
    mode = RenderMode::kFull;
  } else {
    throw ToolError("mode must be 'preview' or 'full'");
  }
  const std::size_t page = tool_args::number(call, "page", 0);
  std::string body =
      render_operation_subgraph(index_, op_id, mode, page, config_.page_size_chars);
  const std::size_t pages = operation_page_count(index_, op_id, mode, config_.page_size_chars);
  if (pages > 1) {
    body += "[page " + std::to_string(page) + " of " + std::to_string(pages) + "]\n";
  }
  return body;
}

std::string ExplorerEnvironment::read_var(const ToolCall& call) {
  const VarRef ref = parse_var_ref(graph_, tool_args::required(call, "var"));
  const std::size_t page = tool_args::number(call, "page", 0);
  std::string body = read_variable(graph_, ref, page, config_.page_size_chars);
  const std::size_t pages = variable_page_count(graph_, ref, config_.page_size_chars);
  return "VALUE " + to_string(ref) + " [" + graph_.variable(ref.var_id).category + "] page " +
         std::to_string(page) + " of " + std::to_string(pages) + ":\n" + body + "\n";
}

std::string ExplorerEnvironment::search_var(const ToolCall& call) {
  const VarRef ref = parse_var_ref(graph_, tool_args::required(call, "var"));
  const std::string pattern = tool_args::required(call, "regex");
  const std::size_t max_hits = tool_args::number(call, "max_hits", config_.search_limit);
  const auto hits = search_variable(graph_, ref, pattern, max_hits);
  std::ostringstream out;
  out << "MATCHES IN " << to_string(ref) << " (" << hits.size() << "):\n";
  for (const auto& h : hits) out << "- @" << h.offset << ": " << h.excerpt << "\n";
  return out.str();
}

std::string ExplorerEnvironment::add_to_explore(const ToolCall& call) {
  const std::string vars = tool_args::required(call, "vars");
  std::vector<std::string> accepted;
  std::vector<std::string> rejected;
  std::string_view rest = vars;
  while (!rest.empty()) {
    auto comma = rest.find(',');
    std::string_view item = text::trim(rest.substr(0, comma));
    rest.remove_prefix(comma == std::string_view::npos ? rest.size() : comma + 1);
    if (item.empty()) continue;
    VarRef ref;
    try {
      ref = parse_var_ref(graph_, item);
    } catch (const Error&) {
      rejected.push_back(std::string(item) + " (unknown)");
      continue;
    }
    auto status = list_.add(ref, graph_.version(ref).ts);
    if (status == ToExploreList::AddStatus::kAccepted) {
      accepted.push_back(to_string(ref));
    } else {
      rejected.push_back(to_string(ref) + " (" + std::string(to_string(status)) + ")");
    }
  }
  std::ostringstream out;
  out << "ACCEPTED (" << accepted.size() << "):";
  for (const auto& a : accepted) out << " " << a;
  out << "\nREJECTED (" << rejected.size() << "):";
  for (std::size_t i = 0; i < rejected.size(); ++i) out << (i ? ", " : " ") << rejected[i];
  out << "\nlist size: " << list_.size() << "/" << list_.capacity() << "\n";
  return out.str();
}

FaultReport parse_fault_report(const ExecutionGraph& graph, const ToolCall& call) {
  FaultReport report;
  report.op_id = tool_args::required(call, "op_id");
  if (!graph.find_operation(report.op_id)) {
    throw ToolError("unknown operation '" + report.op_id + "'");
  }
  const std::string type = tool_args::required(call, "error_type");
  auto parsed = parse_error_type(type);
  if (!parsed) throw ToolError("unknown error_type '" + type + "'");
  report.error_type = *parsed;
  report.explanation = tool_args::optional(call, "explanation").value_or("");
  return report;
}

StepResult ExplorerEnvironment::report_fault(const ToolCall& call) {
  FaultReport report = parse_fault_report(graph_, call);
  return {"REPORTED " + report.op_id + " " + std::string(to_string(report.error_type)),
          std::move(report)};
}

// ---------------------------------------------------------------------------
// Run

std::vector<VarRef> source_evidence_seeds(const ExecutionGraph& graph, const CaseSpec& spec) {
  std::vector<VarRef> seeds;
  for (const auto& id : spec.evidence_var_ids) {
    seeds.push_back(VarRef{id, graph.variable(id).latest().version});
  }
  seeds.push_back(spec.question_var);
  return seeds;
}

std::string error_type_guide() {
  std::string out = "ERROR TYPES\n";
  for (ErrorType t : kAllErrorTypes) {
    out += "- " + std::string(to_string(t)) + ": " + std::string(describe(t)) + "\n";
  }
  return out;
}

std::string explorer_instruction(const ExploreConfig& config) {
  std::ostringstream out;
  out << "You are diagnosing why a memory-augmented assistant answered a question wrongly. "
         "Its execution is recorded as a graph of operations that read and write versioned "
         "variables.\n\n"
      << "DECISIVE ERROR\n" << kDecisiveErrorCriterion << "\n\n"
      << error_type_guide() << "\n"
      << "PROCEDURE\n"
         "Work through the to-explore list earliest first. Pop a variable, list the operations "
         "that touch it, and view them (preview first; full or read_var when values matter). "
         "Judge whether each operation behaved correctly. Queue the downstream variables worth "
         "following with add_to_explore. The list holds at most "
      << config.capacity
      << " entries. When you have found the decisive error, call report_fault.\n\n"
      << describe_tools(ExplorerEnvironment::tool_schema());
  if (!config.prior_knowledge.empty()) {
    out << "\nPIPELINE NOTES\n" << config.prior_knowledge << "\n";
  }
  return out.str();
}

std::string explorer_case_text(const ExecutionGraph& graph, const CaseSpec& spec,
                               const ToExploreList& list) {
  std::ostringstream out;
  out << "CASE " << spec.case_id << "\n"
      << "QUESTION (" << to_string(spec.question_var)
      << "): " << graph.version(spec.question_var).value << "\n"
      << "GOLDEN ANSWER: " << spec.golden_answer << "\n"
      << "PREDICTION: " << spec.prediction << "\n"
      << "TO-EXPLORE LIST (" << list.size() << "/" << list.capacity() << "):\n";
  for (const auto& [ref, ts] : list.entries()) {
    out << "- " << to_string(ref) << " [" << graph.variable(ref.var_id).category
        << "] ts=" << ts << "\n";
  }
  return out.str();
}

AttributionResult run_attribution(const ExecutionGraph& graph, const CaseSpec& spec,
                                  Backend& backend, const ExploreConfig& config) {
  ExplorerEnvironment env(graph, config);
  std::vector<VarRef> seeds;
  if (config.seeds) {
    seeds = *config.seeds;
  } else {
    retrieval::HashingEmbedder fallback;
    const retrieval::EmbeddingProvider& provider =
        config.embedder ? *config.embedder : static_cast<const retrieval::EmbeddingProvider&>(fallback);
    seeds = retrieval::seed_exploration(graph, spec.question_var, spec.golden_answer,
                                        config.capacity, provider);
  }
  env.seed(seeds);

  LoopSettings settings{config.max_iters, config.context_threshold, config.temperature,
                        config.retry};
  return run_agent_loop(env, explorer_instruction(config), explorer_case_text(graph, spec, env.list()),
                        backend, settings, spec.case_id, "graph");
}

}  // namespace tracegraph
