#include "tracegraph/reporter.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tracegraph/errors.hpp"
#include "tracegraph/explorer.hpp"
#include "tracegraph/text_util.hpp"

namespace tracegraph {

namespace {

constexpr std::string_view kReportInstruction =
    "You maintain a diagnostic report on the failures of a memory-augmented assistant. "
    "Group failures by the operation that caused them, note recurring patterns and finer "
    "sub-types inside each error category, and suggest where to intervene. You receive the "
    "current report and a batch of new attributed failures. Reply with the complete revised "
    "report in Markdown and nothing else.";

constexpr std::string_view kFeedbackInstruction =
    "A prompt used inside a memory pipeline contributed to a failure. Given the failure, the "
    "faulty operation and the prompt, write one concrete suggestion for improving the prompt. "
    "Reply with the suggestion only.";

constexpr std::string_view kAggregateInstruction =
    "Merge the suggestions below, collected from several failures, into one editing "
    "directive for the prompt. Drop duplicates and contradictions. Reply with the directive "
    "only.";

constexpr std::string_view kRewriteInstruction =
    "Rewrite the prompt according to the directive. The previous version, if given, shows the "
    "last change; do not undo it without reason. Reply with the new prompt text only.";

ChatTurn ask(Backend& backend, std::string_view system, std::string user, double temperature,
             CostMeter& meter, const RetryPolicy& retry) {
  const ChatTurn turns[] = {ChatTurn{Role::kSystem, std::string(system), {}},
                            ChatTurn{Role::kUser, std::move(user), {}}};
  return complete_with_meter(backend, turns, temperature, {}, meter, retry);
}

}  // namespace

std::string describe_failures(std::span<const AttributionResult> batch) {
  std::ostringstream out;
  for (const auto& r : batch) {
    out << "- case " << r.case_id << ": op="
        << (r.predicted_op_id.empty() ? "(none)" : r.predicted_op_id) << " type="
        << (r.error_type ? std::string(to_string(*r.error_type)) : "(none)")
        << " explanation=" << r.explanation << "\n";
  }
  return out.str();
}

DiagnosticReport build_report(std::span<const AttributionResult> results, Backend& backend,
                              const ReportOptions& options) {
  if (options.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  std::string system(kReportInstruction);
  if (options.exemplar) system += "\n\nEXAMPLE REPORT\n" + *options.exemplar;

  DiagnosticReport report;
  for (std::size_t start = 0; start < results.size(); start += options.batch_size) {
    auto batch = results.subspan(start, std::min(options.batch_size, results.size() - start));
    std::string user = "CURRENT REPORT:\n" +
                       (report.body.empty() ? std::string("(empty)") : report.body) +
                       "\n\nNEW FAILURES:\n" + describe_failures(batch);
    try {
      report.body = ask(backend, system, std::move(user), options.temperature, report.meter,
                        options.retry)
                        .content;
    } catch (const BackendError& e) {
      report.error = true;
      report.error_message = e.what();
      return report;
    }
    ++report.revision;
    for (const auto& r : batch) report.case_ids.push_back(r.case_id);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Registry

PromptRegistry::PromptRegistry(std::vector<PromptEntry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    for (std::size_t j = i + 1; j < entries_.size(); ++j) {
      if (entries_[i].name == entries_[j].name) {
        throw ConfigError("duplicate prompt '" + entries_[i].name + "'");
      }
    }
    if (entries_[i].history.size() > kHistoryCapacity) {
      throw ConfigError("prompt '" + entries_[i].name + "' has more than one history entry");
    }
  }
}

const PromptEntry* PromptRegistry::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

PromptEntry& PromptRegistry::at(std::string_view name) {
  for (auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw NotFound("unknown prompt '" + std::string(name) + "'");
}

void PromptRegistry::rewrite(std::string_view name, std::string text) {
  PromptEntry& e = at(name);
  e.history = {std::move(e.text)};
  e.text = std::move(text);
}

nlohmann::ordered_json PromptRegistry::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& e : entries_) {
    nlohmann::ordered_json entry;
    entry["text"] = e.text;
    entry["history"] = e.history;
    entry["bound_ops"] = e.bound_ops;
    j[e.name] = std::move(entry);
  }
  return j;
}

PromptRegistry PromptRegistry::from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw ConfigError("prompt registry must be a JSON object");
  std::vector<PromptEntry> entries;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& v = it.value();
      PromptEntry e;
      e.name = it.key();
      e.text = v.at("text").get<std::string>();
      if (v.contains("history")) e.history = v["history"].get<std::vector<std::string>>();
      if (v.contains("bound_ops")) e.bound_ops = v["bound_ops"].get<std::vector<std::string>>();
      entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed prompt registry: ") + e.what());
  }
  return PromptRegistry(std::move(entries));
}

PromptRegistry PromptRegistry::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open registry '" + path + "'");
  try {
    return from_json(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("registry '" + path + "': " + e.what());
  }
}

void PromptRegistry::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write registry '" + path + "'");
  out << to_json().dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Optimization

std::vector<std::string> localize_prompts(const AttributionResult& result,
                                          const ExecutionGraph& graph,
                                          const PromptRegistry& registry) {
  std::vector<std::string> out;
  if (result.predicted_op_id.empty()) return out;
  const auto* op = graph.find_operation(result.predicted_op_id);
  if (!op) return out;
  for (const auto& e : registry.entries()) {
    if (std::find(e.bound_ops.begin(), e.bound_ops.end(), op->name) != e.bound_ops.end()) {
      out.push_back(e.name);
    }
  }
  return out;
}

OptimizeOutcome optimize_round(std::span<const FailedCase> cases, const PromptRegistry& registry,
                               Backend& backend, const OptimizeOptions& options) {
  OptimizeOutcome outcome;
  outcome.registry = registry;

  // Feedback generation.
  for (const auto& fc : cases) {
    if (!fc.graph) throw ConfigError("failed case '" + fc.result.case_id + "' has no graph");
    const auto targets = localize_prompts(fc.result, *fc.graph, registry);
    if (targets.empty()) continue;
    const GraphIndex index(*fc.graph);
    const std::string rendering =
        render_operation_subgraph(index, fc.result.predicted_op_id, RenderMode::kFull, 0,
                                  static_cast<std::size_t>(-1));
    for (const auto& target : targets) {
      std::string user = "FAILURE:\n" + describe_failures(std::span(&fc.result, 1)) +
                         "\nFAULTY OPERATION:\n" + rendering + "\nPROMPT " + target + ":\n" +
                         registry.find(target)->text + "\n";
      auto reply = ask(backend, kFeedbackInstruction, std::move(user), options.temperature,
                       outcome.meter, options.retry);
      outcome.feedback.push_back(
          FeedbackItem{fc.result.case_id, target, std::string(text::trim(reply.content))});
    }
  }

  // Aggregation and rewrite, per prompt in registry order.
  for (const auto& entry : registry.entries()) {
    std::string suggestions;
    for (const auto& item : outcome.feedback) {
      if (item.target == entry.name) suggestions += "- " + item.suggestion + "\n";
    }
    if (suggestions.empty()) continue;
    auto directive = ask(backend, kAggregateInstruction,
                         "PROMPT " + entry.name + "\nSUGGESTIONS:\n" + suggestions,
                         options.temperature, outcome.meter, options.retry);
    std::string user = "DIRECTIVE:\n" + directive.content + "\n\nCURRENT PROMPT:\n" + entry.text +
                       "\n";
    if (!entry.history.empty()) user += "\nPREVIOUS VERSION:\n" + entry.history.front() + "\n";
    auto rewritten = ask(backend, kRewriteInstruction, std::move(user), options.temperature,
                         outcome.meter, options.retry);
    outcome.registry.rewrite(entry.name, rewritten.content);
    outcome.directives[entry.name] = directive.content;
    outcome.rewritten.push_back(entry.name);
  }
  return outcome;
}

}  // namespace tracegraph
