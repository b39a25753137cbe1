#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tracegraph/agent.hpp"
#include "tracegraph/cost.hpp"
#include "tracegraph/graph.hpp"
#include "tracegraph/model_client.hpp"

namespace tracegraph {

struct DiagnosticReport {
  std::string body;  // Markdown
  std::size_t revision = 0;
  std::vector<std::string> case_ids;  // cases folded in so far
  bool error = false;
  std::string error_message;
  CostMeter meter;
};

struct ReportOptions {
  std::size_t batch_size = 4;
  std::optional<std::string> exemplar;
  double temperature = 1.0;
  RetryPolicy retry;
};

/// Folds results into a report batch by batch; each batch sends the full
/// current report and gets the full revision back. A backend failure stops
/// the fold and returns what was built with `error` set.
DiagnosticReport build_report(std::span<const AttributionResult> results, Backend& backend,
                              const ReportOptions& options = {});

/// Text listing one batch of failures, as sent to the report writer.
std::string describe_failures(std::span<const AttributionResult> batch);

struct PromptEntry {
  std::string name;
  std::string text;
  std::vector<std::string> history;  // at most one previous text
  std::vector<std::string> bound_ops;

  bool operator==(const PromptEntry&) const = default;
};

/// Prompts in file order. File form: {"name": {"text", "history", "bound_ops"}}.
class PromptRegistry {
 public:
  static constexpr std::size_t kHistoryCapacity = 1;

  PromptRegistry() = default;
  explicit PromptRegistry(std::vector<PromptEntry> entries);

  const std::vector<PromptEntry>& entries() const { return entries_; }
  const PromptEntry* find(std::string_view name) const;
  PromptEntry& at(std::string_view name);

  /// Replaces the text, keeping the old one as the only history entry.
  void rewrite(std::string_view name, std::string text);

  nlohmann::ordered_json to_json() const;
  static PromptRegistry from_json(const nlohmann::ordered_json& j);
  static PromptRegistry load(const std::string& path);
  void save(const std::string& path) const;

  bool operator==(const PromptRegistry&) const = default;

 private:
  std::vector<PromptEntry> entries_;
};

/// Prompts bound to the name of the reported operation, in registry order.
std::vector<std::string> localize_prompts(const AttributionResult& result,
                                          const ExecutionGraph& graph,
                                          const PromptRegistry& registry);

struct FeedbackItem {
  std::string case_id;
  std::string target;
  std::string suggestion;
};

struct FailedCase {
  AttributionResult result;
  const ExecutionGraph* graph = nullptr;
};

struct OptimizeOutcome {
  PromptRegistry registry;
  std::vector<FeedbackItem> feedback;
  std::map<std::string, std::string> directives;  // per rewritten prompt
  std::vector<std::string> rewritten;              // registry order
  CostMeter meter;
};

struct OptimizeOptions {
  double temperature = 1.0;
  RetryPolicy retry;
};

/// One round: feedback per (case, localized prompt), aggregation per prompt,
/// then one rewrite per prompt. Only localized prompts change. Stage one
/// runs in case order so results stay reproducible.
OptimizeOutcome optimize_round(std::span<const FailedCase> cases, const PromptRegistry& registry,
                               Backend& backend, const OptimizeOptions& options = {});

}  // namespace tracegraph
