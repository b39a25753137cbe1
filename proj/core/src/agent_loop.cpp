#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tracegraph/agent.hpp"
#include "tracegraph/errors.hpp"
#include "tracegraph/taxonomy.hpp"
#include "tracegraph/text_util.hpp"

namespace tracegraph {

// ---------------------------------------------------------------------------
// Taxonomy

std::string_view to_string(ErrorType type) {
  switch (type) {
    case ErrorType::kAnnotation: return "annotation";
    case ErrorType::kJudge: return "judge";
    case ErrorType::kExtraction: return "extraction";
    case ErrorType::kUpdate: return "update";
    case ErrorType::kDeletion: return "deletion";
    case ErrorType::kRetrieval: return "retrieval";
    case ErrorType::kResponse: return "response";
  }
  return "response";
}

std::optional<ErrorType> parse_error_type(std::string_view name) {
  for (ErrorType t : kAllErrorTypes) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

bool is_system_error(ErrorType type) {
  return std::find(kSystemErrorTypes.begin(), kSystemErrorTypes.end(), type) !=
         kSystemErrorTypes.end();
}

std::string_view describe(ErrorType type) {
  switch (type) {
    case ErrorType::kAnnotation:
      return "the cited source messages do not actually support the reference answer";
    case ErrorType::kJudge:
      return "the prediction is acceptable but the evaluator scored it as wrong";
    case ErrorType::kExtraction:
      return "a fact stated in a raw message was not stored in any memory unit";
    case ErrorType::kUpdate:
      return "a memory unit that held the fact was later rewritten incorrectly";
    case ErrorType::kDeletion:
      return "the memory unit holding the fact was removed and the information lost";
    case ErrorType::kRetrieval:
      return "the fact was in memory at question time but missing from the retrieved context";
    case ErrorType::kResponse:
      return "the retrieved context sufficed yet the generated answer is wrong";
  }
  return "";
}

std::string_view to_string(Termination t) {
  return t == Termination::kReport ? "report" : "budget";
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::ordered_json to_json(const CaseSpec& spec) {
  nlohmann::ordered_json j;
  j["case_id"] = spec.case_id;
  j["question_var"] = {{"var_id", spec.question_var.var_id},
                       {"version", spec.question_var.version}};
  j["golden_answer"] = spec.golden_answer;
  j["prediction"] = spec.prediction;
  j["evidence_var_ids"] = spec.evidence_var_ids;
  j["truth_op_id"] = spec.truth_op_id ? nlohmann::ordered_json(*spec.truth_op_id) : nlohmann::ordered_json(nullptr);
  j["truth_error_type"] = spec.truth_error_type
                              ? nlohmann::ordered_json(std::string(to_string(*spec.truth_error_type)))
                              : nlohmann::ordered_json(nullptr);
  return j;
}

CaseSpec case_from_json(const nlohmann::json& j) {
  try {
    CaseSpec spec;
    spec.case_id = j.at("case_id").get<std::string>();
    spec.question_var = VarRef{j.at("question_var").at("var_id").get<std::string>(),
                               j.at("question_var").at("version").get<std::uint32_t>()};
    spec.golden_answer = j.at("golden_answer").get<std::string>();
    spec.prediction = j.value("prediction", "");
    if (j.contains("evidence_var_ids")) {
      spec.evidence_var_ids = j["evidence_var_ids"].get<std::vector<std::string>>();
    }
    if (j.contains("truth_op_id") && j["truth_op_id"].is_string()) {
      spec.truth_op_id = j["truth_op_id"].get<std::string>();
    }
    if (j.contains("truth_error_type") && j["truth_error_type"].is_string()) {
      auto t = parse_error_type(j["truth_error_type"].get<std::string>());
      if (!t) throw ConfigError("unknown truth_error_type");
      spec.truth_error_type = t;
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed case spec: ") + e.what());
  }
}

nlohmann::ordered_json to_json(const AttributionResult& r) {
  nlohmann::ordered_json j;
  j["case_id"] = r.case_id;
  j["method"] = r.method;
  j["predicted_op_id"] = r.predicted_op_id;
  j["error_type"] =
      r.error_type ? nlohmann::ordered_json(std::string(to_string(*r.error_type))) : nlohmann::ordered_json(nullptr);
  j["explanation"] = r.explanation;
  j["terminated_by"] = std::string(to_string(r.terminated_by));
  j["iterations"] = r.iterations;
  j["input_tokens"] = r.meter.input_tokens;
  j["output_tokens"] = r.meter.output_tokens;
  j["wall_seconds"] = r.meter.wall_seconds;
  j["peak_context_tokens"] = r.peak_context_tokens;
  return j;
}

AttributionResult result_from_json(const nlohmann::json& j) {
  try {
    AttributionResult r;
    r.case_id = j.at("case_id").get<std::string>();
    r.method = j.value("method", "");
    r.predicted_op_id = j.at("predicted_op_id").get<std::string>();
    if (j.contains("error_type") && j["error_type"].is_string()) {
      r.error_type = parse_error_type(j["error_type"].get<std::string>());
      if (!r.error_type) throw ConfigError("unknown error_type in result");
    }
    r.explanation = j.value("explanation", "");
    r.terminated_by =
        j.at("terminated_by").get<std::string>() == "report" ? Termination::kReport
                                                             : Termination::kBudget;
    r.iterations = j.value("iterations", std::size_t{0});
    r.meter.input_tokens = j.value("input_tokens", std::uint64_t{0});
    r.meter.output_tokens = j.value("output_tokens", std::uint64_t{0});
    r.meter.wall_seconds = j.value("wall_seconds", 0.0);
    r.peak_context_tokens = j.value("peak_context_tokens", std::uint64_t{0});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed attribution result: ") + e.what());
  }
}

nlohmann::ordered_json transcript_json(const std::vector<ChatTurn>& turns) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& t : turns) {
    nlohmann::ordered_json j;
    j["role"] = std::string(to_string(t.role));
    if (t.tool_name) j["tool_name"] = *t.tool_name;
    j["content"] = t.content;
    out.push_back(std::move(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Working context

std::uint64_t WorkingContext::estimate() const {
  std::uint64_t total = 0;
  for (const auto& t : turns) total += estimate_tokens(t.content);
  return total;
}

namespace {

constexpr std::string_view kSummaryPrefix = "SUMMARY: ";

constexpr std::string_view kSummarizeInstruction =
    "Condense the exploration transcript below into a short progress note for the same agent. "
    "Keep every operation id and variable id that was inspected, which operations were judged "
    "correct, the current hypothesis, and what remains to check. Omit raw variable values.";

// Shrinks `turn` so that the context estimate drops to at most `threshold`,
// given the current total. Returns the new total.
std::uint64_t shrink_turn(ChatTurn& turn, std::uint64_t total, std::uint64_t threshold) {
  if (total <= threshold) return total;
  const std::uint64_t own = estimate_tokens(turn.content);
  const std::uint64_t others = total - own;
  const std::uint64_t allowed = threshold > others ? threshold - others : 0;
  turn.content = std::string(text::clip_bytes(turn.content, allowed * 4));
  return others + estimate_tokens(turn.content);
}

}  // namespace

WorkingContext manage_context(WorkingContext ctx, Backend& backend, std::uint64_t threshold,
                              CostMeter& meter, double temperature, const RetryPolicy& retry) {
  if (ctx.estimate() <= threshold) return ctx;

  std::uint64_t pinned_total = 0;
  for (std::size_t i = 0; i < ctx.pinned && i < ctx.turns.size(); ++i) {
    pinned_total += estimate_tokens(ctx.turns[i].content);
  }
  if (pinned_total > threshold) {
    throw ConfigError("context threshold " + std::to_string(threshold) +
                      " is smaller than the pinned instruction (" +
                      std::to_string(pinned_total) + " tokens)");
  }

  const std::size_t n = ctx.turns.size();
  const std::size_t recent_start = std::max(ctx.pinned, n > kKeepRecentTurns ? n - kKeepRecentTurns : 0);
  std::optional<std::size_t> summary_at;

  if (recent_start > ctx.pinned) {
    std::string transcript;
    for (std::size_t i = ctx.pinned; i < recent_start; ++i) {
      const auto& t = ctx.turns[i];
      transcript += "[" + std::string(to_string(t.role));
      if (t.tool_name) transcript += ":" + *t.tool_name;
      transcript += "]\n" + t.content + "\n";
    }
    const ChatTurn request[] = {ChatTurn{Role::kSystem, std::string(kSummarizeInstruction), {}},
                                ChatTurn{Role::kUser, std::move(transcript), {}}};
    ChatTurn reply = complete_with_meter(backend, request, temperature, {}, meter, retry);
    std::string body = reply.content;
    if (!body.starts_with("SUMMARY:")) body = std::string(kSummaryPrefix) + body;

    std::vector<ChatTurn> turns(ctx.turns.begin(), ctx.turns.begin() + ctx.pinned);
    turns.push_back(ChatTurn{Role::kAssistant, std::move(body), {}});
    summary_at = turns.size() - 1;
    turns.insert(turns.end(), ctx.turns.begin() + recent_start, ctx.turns.end());
    ctx.turns = std::move(turns);
  }

  std::uint64_t total = ctx.estimate();
  if (summary_at) total = shrink_turn(ctx.turns[*summary_at], total, threshold);
  for (std::size_t i = ctx.pinned; i < ctx.turns.size() && total > threshold; ++i) {
    total = shrink_turn(ctx.turns[i], total, threshold);
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Agent loop

AttributionResult run_agent_loop(ToolEnvironment& env, const std::string& system_text,
                                 const std::string& case_text, Backend& backend,
                                 const LoopSettings& settings, std::string case_id,
                                 std::string method) {
  if (settings.max_iters == 0) throw ConfigError("max_iters must be >= 1");

  AttributionResult result;
  result.case_id = std::move(case_id);
  result.method = std::move(method);

  WorkingContext ctx;
  ctx.turns = {ChatTurn{Role::kSystem, system_text, {}}, ChatTurn{Role::kUser, case_text, {}}};
  ctx.pinned = 2;
  result.transcript = ctx.turns;

  auto manage = [&] {
    try {
      ctx = manage_context(std::move(ctx), backend, settings.context_threshold, result.meter,
                           settings.temperature, settings.retry);
    } catch (const BackendError& e) {
      throw RunError(std::string("summarization failed: ") + e.what(), result.meter);
    }
    const std::uint64_t est = ctx.estimate();
    if (est > settings.context_threshold) {
      throw std::logic_error("working context exceeds threshold after management");
    }
    result.peak_context_tokens = std::max(result.peak_context_tokens, est);
  };
  manage();

  const ToolSchema& schema = env.schema();
  while (result.iterations < settings.max_iters) {
    ChatTurn reply;
    try {
      reply = complete_with_meter(backend, ctx.turns, settings.temperature, schema, result.meter,
                                  settings.retry);
    } catch (const BackendError& e) {
      throw RunError(std::string("backend failed: ") + e.what(), result.meter);
    }
    ++result.iterations;
    reply.role = Role::kAssistant;
    ctx.turns.push_back(reply);
    result.transcript.push_back(reply);

    StepResult step;
    std::string tool = "error";
    try {
      auto call = parse_tool_call(reply.content, schema);
      if (!call) {
        step.observation =
            "ERROR: no tool directive found. End the reply with one JSON line "
            "{\"tool\": ..., \"args\": {...}}.";
      } else {
        tool = call->tool;
        step = env.step(*call);
      }
    } catch (const ProtocolError& e) {
      step.observation = std::string("ERROR: ") + e.what();
    }

    ChatTurn observation{Role::kTool, std::move(step.observation), tool};
    ctx.turns.push_back(observation);
    result.transcript.push_back(std::move(observation));

    if (step.report) {
      result.predicted_op_id = step.report->op_id;
      result.error_type = step.report->error_type;
      result.explanation = step.report->explanation;
      result.terminated_by = Termination::kReport;
      return result;
    }
    manage();
  }
  result.terminated_by = Termination::kBudget;
  return result;
}

}  // namespace tracegraph
