#include "tracegraph/obs_explorer.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

#include "tool_args.hpp"
#include "tracegraph/attribution.hpp"
#include "tracegraph/errors.hpp"
#include "tracegraph/text_util.hpp"

namespace tracegraph {

namespace {

void write_entries(std::ostringstream& out, const std::vector<BlockEntry>& entries,
                   bool with_version) {
  for (const auto& e : entries) {
    out << "- [" << e.category << "]";
    if (with_version) out << " (version " << e.version << ")";
    std::string_view value = e.value;
    out << " ";
    while (true) {
      auto nl = value.find('\n');
      out << value.substr(0, nl) << "\n";
      if (nl == std::string_view::npos) break;
      value.remove_prefix(nl + 1);
      out << "  ";
    }
  }
}

std::string block_text(const OperationBlock& b) {
  std::ostringstream out;
  out << kBlockSeparator << "\n"
      << "[HEADER]\n"
      << "block: " << b.index << "\n"
      << "op_id: " << b.op_id << "\n"
      << "name: " << b.name << "\n"
      << "category: " << b.category << "\n"
      << "comment: " << b.comment << "\n"
      << "metadata:";
  for (const auto& [k, v] : b.metadata) out << " " << k << "=" << v << ";";
  out << "\n[INPUTS]\n";
  write_entries(out, b.inputs, false);
  out << "[OUTPUTS]\n";
  write_entries(out, b.outputs, false);
  out << "[INTERMEDIATES]\n";
  write_entries(out, b.intermediates, true);
  return out.str();
}

std::regex compile(std::string_view pattern) {
  try {
    return std::regex(pattern.begin(), pattern.end(), std::regex::extended);
  } catch (const std::regex_error& e) {
    throw ToolError("invalid regex '" + std::string(pattern) + "': " + e.what());
  }
}

std::string excerpt_at(std::string_view text, std::size_t offset) {
  std::size_t start = offset;
  for (int back = 0; back < 40 && start > 0; ++back) {
    --start;
    while (start > 0 && (static_cast<unsigned char>(text[start]) & 0xC0) == 0x80) --start;
  }
  std::string_view tail = text.substr(start);
  return std::string(tail.substr(0, text::utf8_offset(tail, 120)));
}

}  // namespace

std::string OperationLog::text() const {
  std::string out;
  for (const auto& b : blocks) out += b.text;
  return out;
}

OperationLog build_log(const ExecutionGraph& graph) {
  const GraphIndex index(graph);
  OperationLog log;
  for (std::size_t pos : index.ops_by_time()) {
    const auto& op = graph.operations()[pos];
    OperationBlock b;
    b.index = log.blocks.size();
    b.op_id = op.op_id;
    b.name = op.name;
    b.category = op.category;
    b.comment = op.comment;
    b.metadata = op.metadata;

    const auto& in = index.inputs_of(op.op_id);
    const auto& out = index.outputs_of(op.op_id);
    std::set<std::string> in_vars;
    std::set<std::string> out_vars;
    for (const auto& r : in) in_vars.insert(r.var_id);
    for (const auto& r : out) out_vars.insert(r.var_id);

    std::vector<VarRef> mid;
    auto entry = [&](const VarRef& r) {
      return BlockEntry{graph.variable(r.var_id).category, r.version, graph.version(r).value};
    };
    for (const auto& r : in) {
      if (out_vars.count(r.var_id)) {
        mid.push_back(r);
      } else {
        b.inputs.push_back(entry(r));
      }
    }
    for (const auto& r : out) {
      if (in_vars.count(r.var_id)) {
        mid.push_back(r);
      } else {
        b.outputs.push_back(entry(r));
      }
    }
    std::sort(mid.begin(), mid.end());
    mid.erase(std::unique(mid.begin(), mid.end()), mid.end());
    for (const auto& r : mid) b.intermediates.push_back(entry(r));

    b.text = block_text(b);
    log.blocks.push_back(std::move(b));
  }
  return log;
}

std::vector<BlockHit> search_operations(const OperationLog& log, std::string_view pattern,
                                        std::size_t limit) {
  const std::regex re = compile(pattern);
  std::vector<BlockHit> hits;
  for (const auto& b : log.blocks) {
    if (hits.size() >= limit) break;
    BlockHit hit{b.index, b.op_id, {}};
    for (auto it = std::sregex_iterator(b.text.begin(), b.text.end(), re);
         it != std::sregex_iterator() && hit.excerpts.size() < 3; ++it) {
      hit.excerpts.push_back(excerpt_at(b.text, static_cast<std::size_t>(it->position(0))));
    }
    if (!hit.excerpts.empty()) hits.push_back(std::move(hit));
  }
  return hits;
}

// ---------------------------------------------------------------------------

const ToolSchema& ObsEnvironment::tool_schema() {
  static const ToolSchema schema = {
      {"search_operations",
       "Regex search (POSIX extended) over every operation block of the log.",
       {"regex: pattern", "limit: maximum number of blocks returned, default 8"}},
      {"view_block", "Show one operation block.",
       {"index: block number", "page: page number, default 0"}},
      {"report_fault", "Finish with the decisive faulty operation.",
       {"op_id: operation id", "error_type: one of the listed error types",
        "explanation: short justification"}},
  };
  return schema;
}

ObsEnvironment::ObsEnvironment(const ExecutionGraph& graph, const ExploreConfig& config)
    : graph_(graph), config_(config), log_(build_log(graph)) {
  config_.check();
}

StepResult ObsEnvironment::step(const ToolCall& call) {
  try {
    if (call.tool == "search_operations") {
      const auto pattern = tool_args::required(call, "regex");
      const auto limit = tool_args::number(call, "limit", config_.search_limit);
      const auto hits = search_operations(log_, pattern, limit);
      std::ostringstream out;
      out << "MATCHING BLOCKS (" << hits.size() << "):\n";
      for (const auto& h : hits) {
        out << "BLOCK " << h.block_index << " " << h.op_id << " "
            << log_.blocks[h.block_index].name << "\n";
        for (auto ex : h.excerpts) {
          std::replace(ex.begin(), ex.end(), '\n', ' ');
          out << "  ..." << ex << "...\n";
        }
      }
      return {out.str(), {}};
    }
    if (call.tool == "view_block") {
      const std::size_t idx = tool_args::number(call, "index", log_.blocks.size());
      if (idx >= log_.blocks.size()) {
        throw ToolError("block index out of range (log has " +
                        std::to_string(log_.blocks.size()) + " blocks)");
      }
      const std::size_t page = tool_args::number(call, "page", 0);
      auto pages = text::paginate(log_.blocks[idx].text, config_.page_size_chars);
      if (page >= pages.size()) {
        throw RangeError("page " + std::to_string(page) + " out of range (" +
                         std::to_string(pages.size()) + " pages)");
      }
      std::string body(pages[page]);
      if (pages.size() > 1) {
        body += "\n[page " + std::to_string(page) + " of " + std::to_string(pages.size()) + "]\n";
      }
      return {std::move(body), {}};
    }
    if (call.tool == "report_fault") {
      FaultReport report = parse_fault_report(graph_, call);
      return {"REPORTED " + report.op_id + " " + std::string(to_string(report.error_type)),
              std::move(report)};
    }
    throw ToolError("unknown tool '" + call.tool + "'");
  } catch (const ToolError& e) {
    return {std::string("ERROR: ") + e.what(), {}};
  } catch (const RangeError& e) {
    return {std::string("ERROR: ") + e.what(), {}};
  }
}

std::string obs_instruction(const ExploreConfig& config) {
  std::ostringstream out;
  out << "You are diagnosing why a memory-augmented assistant answered a question wrongly. "
         "Its execution is given as an operation log: one block per operation in execution "
         "order, showing the operation attributes and the values it read and wrote.\n\n"
      << "DECISIVE ERROR\n" << kDecisiveErrorCriterion << "\n\n"
      << error_type_guide() << "\n"
      << "PROCEDURE\n"
         "Search the log for terms from the question and golden answer, view the matching "
         "blocks, follow the information through the pipeline, and call report_fault with the "
         "decisive error.\n\n"
      << describe_tools(ObsEnvironment::tool_schema());
  if (!config.prior_knowledge.empty()) {
    out << "\nPIPELINE NOTES\n" << config.prior_knowledge << "\n";
  }
  return out.str();
}

std::string obs_case_text(const ExecutionGraph& graph, const CaseSpec& spec,
                          const OperationLog& log) {
  std::ostringstream out;
  out << "CASE " << spec.case_id << "\n"
      << "QUESTION: " << graph.version(spec.question_var).value << "\n"
      << "GOLDEN ANSWER: " << spec.golden_answer << "\n"
      << "PREDICTION: " << spec.prediction << "\n"
      << "LOG: " << log.blocks.size() << " operation blocks\n";
  return out.str();
}

AttributionResult run_attribution_obs(const ExecutionGraph& graph, const CaseSpec& spec,
                                      Backend& backend, const ExploreConfig& config) {
  ObsEnvironment env(graph, config);
  LoopSettings settings{config.max_iters, config.context_threshold, config.temperature,
                        config.retry};
  return run_agent_loop(env, obs_instruction(config), obs_case_text(graph, spec, env.log()),
                        backend, settings, spec.case_id, "obs");
}

}  // namespace tracegraph
