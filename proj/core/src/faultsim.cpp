#include "tracegraph/faultsim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tracegraph/errors.hpp"
#include "tracegraph/recorder.hpp"
#include "tracegraph/retrieval.hpp"
#include "tracegraph/text_util.hpp"
#include "tracegraph/trace_io.hpp"

namespace tracegraph::faultsim {

namespace {

// Only raw engine outputs are used so sequences match on every platform
// (the standard distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(next() % n); }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

 private:
  std::mt19937_64 engine_;
};

struct Attribute {
  std::string name;
  std::vector<std::string> values;
};

const std::vector<std::string>& people() {
  static const std::vector<std::string> v = {"Dave",  "Alice", "Priya",  "Marcus",
                                             "Elena", "Tomas", "Yuki",   "Fatima",
                                             "Noah",  "Chloe", "Omar",   "Ingrid"};
  return v;
}

const std::vector<Attribute>& attributes() {
  static const std::vector<Attribute> v = {
      {"car",
       {"a red Ferrari", "a blue Volvo", "a green Jeep Wrangler", "a silver Tesla",
        "a vintage Mini Cooper", "a black Audi", "a white Prius", "an orange Beetle"}},
      {"favorite sport",
       {"skiing", "rock climbing", "table tennis", "rowing", "fencing", "surfing", "curling",
        "badminton"}},
      {"hometown",
       {"Lisbon", "Osaka", "Nairobi", "Quebec City", "Tromso", "Valparaiso", "Tbilisi",
        "Hobart"}},
      {"pet",
       {"a beagle named Biscuit", "a grey cat called Miso", "a parrot named Kiwi",
        "two goldfish", "a tortoise named Atlas", "a husky called Juno", "a rabbit named Pip",
        "a ferret called Ziggy"}},
      {"job",
       {"marine biologist", "tax accountant", "pastry chef", "air traffic controller",
        "violin teacher", "data engineer", "park ranger", "locksmith"}},
      {"favorite book",
       {"Dune", "Middlemarch", "The Hobbit", "Beloved", "Solaris", "Persuasion", "Neuromancer",
        "Moby-Dick"}},
      {"favorite dish",
       {"mushroom risotto", "pad thai", "shakshuka", "pierogi", "ramen", "paella", "moussaka",
        "jollof rice"}},
      {"dream destination",
       {"Patagonia", "Iceland", "Kyoto", "Zanzibar", "the Faroe Islands", "Bhutan", "Sicily",
        "Yukon"}},
  };
  return v;
}

const std::vector<std::string>& fact_openers() {
  static const std::vector<std::string> v = {"By the way,", "Fun fact,",
                                             "Not sure I mentioned it, but", "Oh, and"};
  return v;
}

const std::vector<std::string>& activities() {
  static const std::vector<std::string> v = {
      "repainting the kitchen", "at a jazz festival",       "catching up on sleep",
      "hiking near the lake",   "helping my sister move",   "at a board game night",
      "fixing my bike",         "baking sourdough bread",   "volunteering at the shelter",
      "watching old westerns"};
  return v;
}

constexpr std::string_view kDeletedMarker = "__DELETED__";

struct Unit {
  std::string mem_id;
  std::string owner;
  std::string memory;
  VarRef latest;
  std::size_t message = 0;
  bool alive = true;
  bool evidence = false;
};

std::string unit_text(const Unit& u) {
  return "id=" + u.mem_id + "\nowner=" + u.owner + "\nmemory=" + u.memory;
}

VarConfig config_of(std::string category, std::string identity, std::string comment = {}) {
  VarConfig c;
  c.category = std::move(category);
  c.identity = std::move(identity);
  c.comment = std::move(comment);
  return c;
}

std::string store_text(const std::vector<std::string>& deleted) {
  std::string list;
  for (const auto& d : deleted) list += (list.empty() ? "" : ",") + d;
  return "name=memory_store\ndeleted=" + (list.empty() ? std::string("none") : list);
}

}  // namespace

void SimConfig::check() const {
  if (n_messages < 1) throw ConfigError("n_messages must be >= 1");
  if (memories_per_message < 1) throw ConfigError("memories_per_message must be >= 1");
  if (!(update_prob >= 0.0 && update_prob <= 1.0)) throw ConfigError("update_prob not in [0,1]");
  if (!(delete_prob >= 0.0 && delete_prob <= 1.0)) throw ConfigError("delete_prob not in [0,1]");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (fault && !is_system_error(*fault)) {
    throw ConfigError("only pipeline error types can be injected, not '" +
                      std::string(to_string(*fault)) + "'");
  }
}

CaseSpec FaultCase::spec() const {
  CaseSpec s;
  s.case_id = case_id;
  s.question_var = question_var;
  s.golden_answer = golden_answer;
  s.prediction = prediction;
  s.evidence_var_ids = evidence_var_ids;
  s.truth_op_id = truth_op_id;
  s.truth_error_type = truth_error_type;
  return s;
}

FaultCase generate(const SimConfig& config, std::string case_id) {
  config.check();
  Rng rng(config.seed);
  const auto fault = config.fault;

  // The question and its planted answer.
  const std::string& q_person = rng.pick(people());
  const std::size_t q_attr_idx = rng.below(attributes().size());
  const Attribute& q_attr = attributes()[q_attr_idx];
  const std::size_t golden_idx = rng.below(q_attr.values.size());
  const std::string golden = q_attr.values[golden_idx];
  auto other_value = [&](const Attribute& attr, const std::string& avoid) {
    std::vector<std::string> pool;
    for (const auto& v : attr.values) {
      if (v != avoid) pool.push_back(v);
    }
    return rng.pick(pool);
  };
  const std::string fact_prefix = q_person + "'s " + q_attr.name + " is ";
  const std::string question_text = "What is " + q_person + "'s " + q_attr.name + "?";

  const std::size_t n = config.n_messages;
  const std::size_t evidence_msg = rng.below(n);
  const std::size_t forced_at =
      evidence_msg + 1 < n ? evidence_msg + 1 + rng.below(n - evidence_msg - 1) : evidence_msg;

  FaultCase fc;
  fc.case_id = case_id;
  fc.config = config;
  fc.golden_answer = golden;
  fc.truth_error_type = fault;

  TraceContext ctx(case_id, {{"generator", "faultsim"}, {"seed", std::to_string(config.seed)}});
  std::vector<Unit> units;
  std::vector<std::string> deleted;
  std::size_t mem_count = 0;
  std::size_t evidence_unit = 0;

  ctx.begin_session("memory_construction", "incremental memory updates over the dialogue");
  VarRef store = ctx.comment_variable(
      store_text(deleted), config_of("memory_state", "by-field:name", "live memory store"));

  auto update_unit = [&](Unit& u, const VarRef& message, std::string new_memory,
                         std::string comment) {
    TraceContext::OperationScope op(ctx, "update_memory", "update", std::move(comment),
                                    {{"target", u.mem_id}});
    u.memory = std::move(new_memory);
    auto edge = ctx.comment_link(u.latest, Snapshot{unit_text(u), config_of("memory_unit",
                                                                            "mem0-dict")});
    ctx.comment_link(message, edge.dst);
    u.latest = edge.dst;
    return op.op_id();
  };
  auto delete_unit = [&](Unit& u, std::string comment) {
    TraceContext::OperationScope op(ctx, "delete_memory", "deletion", std::move(comment),
                                    {{"target", u.mem_id}});
    ctx.comment_link(u.latest, Snapshot{std::string(kDeletedMarker),
                                        config_of("deletion_marker", "by-render")});
    deleted.push_back(u.mem_id);
    auto edge = ctx.comment_link(store, Snapshot{store_text(deleted),
                                                 config_of("memory_state", "by-field:name")});
    store = edge.dst;
    u.alive = false;
    return op.op_id();
  };
  auto pick_other_unit = [&](std::size_t current_message) -> Unit* {
    std::vector<Unit*> pool;
    for (auto& u : units) {
      if (u.alive && !u.evidence && u.message != current_message) pool.push_back(&u);
    }
    return pool.empty() ? nullptr : pool[rng.below(pool.size())];
  };

  for (std::size_t i = 0; i < n; ++i) {
    // Message text and the facts it carries.
    std::string person;
    std::string message;
    std::string memory;
    if (i == evidence_msg) {
      person = q_person;
      message = person + ": " + rng.pick(fact_openers()) + " my " + q_attr.name + " is " +
                golden + ".";
      memory = fault == ErrorType::kExtraction
                   ? person + " mentioned their " + q_attr.name
                   : fact_prefix + golden;
    } else if (rng.chance(0.6)) {
      std::size_t a = rng.below(attributes().size());
      person = rng.pick(people());
      if (person == q_person && a == q_attr_idx) a = (a + 1) % attributes().size();
      const Attribute& attr = attributes()[a];
      const std::string value = other_value(attr, golden);
      message = person + ": " + rng.pick(fact_openers()) + " my " + attr.name + " is " + value +
                ".";
      memory = person + "'s " + attr.name + " is " + value;
    } else {
      person = rng.pick(people());
      const std::string& act = rng.pick(activities());
      message = person + ": I spent the weekend " + act + ".";
      memory = person + " spent the weekend " + act;
    }

    const VarRef msg = ctx.comment_variable(
        message, VarConfig{"raw_message", "dialogue turn " + std::to_string(i),
                           {{"turn", std::to_string(i)}}, std::string(identity::kUnique), "text"});
    if (i == evidence_msg) fc.evidence_var_ids.push_back(msg.var_id);

    {
      TraceContext::OperationScope op(ctx, "extract_facts", "extraction",
                                      "turn a dialogue message into memory units",
                                      {{"turn", std::to_string(i)}});
      if (i == evidence_msg && fault == ErrorType::kExtraction) fc.truth_op_id = op.op_id();
      for (std::size_t j = 0; j < config.memories_per_message; ++j) {
        Unit u;
        u.mem_id = text::padded_id("mem-", mem_count++, 4);
        u.owner = person;
        u.memory = j == 0 ? memory : person + " wrote message " + std::to_string(i) +
                                         " (note " + std::to_string(j) + ")";
        u.message = i;
        u.evidence = i == evidence_msg && j == 0;
        auto edge = ctx.comment_link(msg, Snapshot{unit_text(u), config_of("memory_unit",
                                                                           "mem0-dict")});
        u.latest = edge.dst;
        if (u.evidence) evidence_unit = units.size();
        units.push_back(std::move(u));
      }
    }

    if (rng.chance(config.update_prob)) {
      if (Unit* u = pick_other_unit(i)) {
        update_unit(*u, msg, u->memory + " (confirmed again)", "revise an existing memory");
      }
    }
    if (i == forced_at && fault == ErrorType::kUpdate) {
      Unit& ev = units[evidence_unit];
      fc.truth_op_id = update_unit(ev, msg, fact_prefix + other_value(q_attr, golden),
                                   "revise an existing memory");
    }
    if (rng.chance(config.delete_prob)) {
      if (Unit* u = pick_other_unit(i)) delete_unit(*u, "drop an outdated memory");
    }
    if (i == forced_at && fault == ErrorType::kDeletion) {
      fc.truth_op_id = delete_unit(units[evidence_unit], "drop an outdated memory");
    }
  }
  fc.evidence_unit_id = units[evidence_unit].latest.var_id;
  ctx.end_session();

  // Retrieval.
  ctx.begin_session("retrieval", "answer-time memory lookup");
  fc.question_var = ctx.comment_variable(
      question_text, config_of("question", std::string(identity::kUnique), "user question"));
  ctx.comment_variable(golden, config_of("golden_answer", std::string(identity::kUnique),
                                         "reference answer"));
  VarRef query;
  {
    TraceContext::OperationScope op(ctx, "embed_query", "embedding", "encode the question");
    query = ctx.comment_link(fc.question_var,
                             Snapshot{"query embedding (dim 256) of: " + question_text,
                                      config_of("query_embedding",
                                                std::string(identity::kUnique))})
                .dst;
  }

  std::vector<Unit*> retrieved;
  VarRef retrieved_var;
  {
    TraceContext::OperationScope op(ctx, "search", "retrieval", "rank stored memories",
                                    {{"top_k", std::to_string(config.top_k)}});
    if (fault == ErrorType::kRetrieval) fc.truth_op_id = op.op_id();

    std::vector<retrieval::Document> docs;
    std::vector<Unit*> alive;
    for (auto& u : units) {
      if (!u.alive) continue;
      docs.push_back({u.latest, u.memory});
      alive.push_back(&u);
    }
    auto unit_of = [&](const VarRef& ref) {
      return *std::find_if(alive.begin(), alive.end(),
                           [&](Unit* u) { return u->latest == ref; });
    };
    const retrieval::Corpus corpus(std::move(docs));
    std::vector<Unit*> ranked;
    for (const auto& hit : retrieval::bm25_rank(corpus, question_text, alive.size() + 1)) {
      ranked.push_back(unit_of(hit.id));
    }
    for (Unit* u : alive) {  // zero-score units rank last, in storage order
      if (std::find(ranked.begin(), ranked.end(), u) == ranked.end()) ranked.push_back(u);
    }
    Unit* ev = &units[evidence_unit];
    if (fault == ErrorType::kRetrieval) {
      ranked.erase(std::remove(ranked.begin(), ranked.end(), ev), ranked.end());
    }
    for (Unit* u : ranked) {
      if (retrieved.size() < config.top_k) retrieved.push_back(u);
    }
    if (ev->alive && fault != ErrorType::kRetrieval &&
        std::find(retrieved.begin(), retrieved.end(), ev) == retrieved.end()) {
      if (retrieved.size() >= config.top_k) retrieved.pop_back();
      retrieved.push_back(ev);
    }

    std::string listing;
    for (std::size_t r = 0; r < retrieved.size(); ++r) {
      listing += std::to_string(r + 1) + ". " + retrieved[r]->memory + "\n";
    }
    if (listing.empty()) listing = "(no memories)\n";
    const VarRef out = ctx.comment_link(query, Snapshot{listing, config_of("retrieved_memories",
                                                                           std::string(identity::kUnique))})
                           .dst;
    ctx.comment_link(store, out, "store state consulted");
    for (Unit* u : retrieved) ctx.comment_link(u->latest, out, "retrieved");
    retrieved_var = out;
  }

  VarRef context;
  std::string context_text = "Relevant memories:\n";
  for (Unit* u : retrieved) context_text += "- " + u->memory + "\n";
  {
    TraceContext::OperationScope op(ctx, "context_assemble", "context",
                                    "format retrieved memories for the prompt");
    context = ctx.comment_link(retrieved_var, Snapshot{context_text, config_of("context",
                                                                       std::string(identity::kUnique))})
                  .dst;
  }
  ctx.end_session();

  // Response.
  ctx.begin_session("response", "answer generation");
  VarRef prompt;
  {
    TraceContext::OperationScope op(ctx, "build_prompt", "prompt", "assemble the answer prompt");
    const std::string prompt_text = "Answer the question using only the memories below.\n" +
                                    context_text + "Question: " + question_text;
    prompt = ctx.comment_link(fc.question_var,
                              Snapshot{prompt_text, config_of("prompt",
                                                              std::string(identity::kUnique))})
                 .dst;
    ctx.comment_link(context, prompt);
  }

  std::optional<std::string> known;
  for (Unit* u : retrieved) {
    if (u->evidence && u->memory.starts_with(fact_prefix)) {
      known = u->memory.substr(fact_prefix.size());
    }
  }
  {
    TraceContext::OperationScope op(ctx, "generate", "response", "produce the final answer");
    if (fault == ErrorType::kResponse) {
      fc.truth_op_id = op.op_id();
      fc.prediction = fact_prefix + other_value(q_attr, golden) + ".";
    } else if (known) {
      fc.prediction = fact_prefix + *known + ".";
    } else {
      fc.prediction = "I don't know what " + q_person + "'s " + q_attr.name + " is.";
    }
    fc.prediction_var =
        ctx.comment_link(prompt, Snapshot{fc.prediction, config_of("prediction",
                                                                   std::string(identity::kUnique))})
            .dst;
  }
  ctx.end_session();

  fc.graph = ctx.finish();
  fc.outcome = fc.prediction.find(golden) == std::string::npos ? 1 : 0;

  // Internal consistency: the simulated answer and the propagation model agree.
  if (!validate(fc.graph).ok()) throw std::logic_error("faultsim produced an invalid graph");
  if (propagation_outcome(fc, {}) != fc.outcome || fc.outcome != (fault ? 1 : 0)) {
    throw std::logic_error("faultsim outcome disagrees with propagation for seed " +
                           std::to_string(config.seed));
  }
  return fc;
}

// ---------------------------------------------------------------------------
// Propagation

int propagate(const GraphIndex& index, const OpSet& faulty, const VarRef& outcome_var,
              const OpSet& intervention) {
  const auto& ops = index.graph().operations();
  const std::vector<std::string> ivec(intervention.begin(), intervention.end());
  const auto downstream = index.op_descendants(ivec);

  // Kahn order over the precedence DAG.
  const std::size_t n = index.op_count();
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i) indegree[i] = index.predecessors(i).size();
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::vector<bool> corrupt(n, false);
  while (!ready.empty()) {
    const std::size_t i = ready.front();
    ready.pop_front();
    const std::string& id = ops[i].op_id;
    bool bad = faulty.count(id) && !intervention.count(id) && !downstream.count(id);
    for (std::size_t p : index.predecessors(i)) bad = bad || corrupt[p];
    corrupt[i] = bad;
    for (std::size_t s : index.successors(i)) {
      if (--indegree[s] == 0) ready.push_back(s);
    }
  }

  for (const auto& e : index.graph().edges()) {
    if (e.dst == outcome_var) return corrupt[index.op_position(e.op_id)] ? 1 : 0;
  }
  return 0;  // nothing produced the outcome, so nothing could corrupt it
}

int propagation_outcome(const FaultCase& fc, const OpSet& intervention) {
  const GraphIndex index(fc.graph);
  OpSet faulty;
  if (fc.truth_op_id) faulty.insert(*fc.truth_op_id);
  return propagate(index, faulty, fc.prediction_var, intervention);
}

PropagationOracle::PropagationOracle(const FaultCase& fc) : fc_(fc), index_(fc.graph) {
  if (fc.truth_op_id) faulty_.insert(*fc.truth_op_id);
}

int PropagationOracle::outcome(const ExecutionGraph& /*graph*/, const OpSet& intervention) const {
  return propagate(index_, faulty_, fc_.prediction_var, intervention);
}

// ---------------------------------------------------------------------------
// Scripted judges

namespace {

std::string directive(std::string reasoning, std::string tool,
                      std::map<std::string, std::string> args = {}) {
  return reasoning + "\n" + format_tool_call(ToolCall{std::move(tool), std::move(args)});
}

std::string first_token_after(std::string_view text, std::string_view marker) {
  auto at = text.find(marker);
  if (at == std::string_view::npos) return {};
  text.remove_prefix(at + marker.size());
  auto end = text.find_first_of(" \n");
  return std::string(text.substr(0, end));
}

struct JudgeState {
  const ExecutionGraph* graph = nullptr;
  std::unique_ptr<GraphIndex> index;
  CaseSpec spec;
  std::deque<std::string> pending;
  std::set<std::string> viewed;
  std::set<VarRef> queued;
};

std::string judge_turn(JudgeState& s, std::span<const ChatTurn> turns, const ToolSchema& tools) {
  if (tools.empty()) return "SUMMARY: still walking the to-explore list.";
  const ChatTurn& last = turns.back();
  if (last.role == Role::kTool && last.tool_name) {
    const std::string& tool = *last.tool_name;
    const std::string& obs = last.content;
    if (tool == "pop_next" && obs.starts_with("POPPED ")) {
      const std::string ref = first_token_after(obs, "POPPED ");
      s.pending.push_back(directive("List what touched " + ref + ".", "list_ops",
                                    {{"var", ref.substr(0, ref.find('#'))}}));
    } else if (tool == "list_ops") {
      std::istringstream lines(obs);
      std::string line;
      while (std::getline(lines, line)) {
        if (!line.starts_with("- ")) continue;
        const std::string op = first_token_after(line, "- ");
        if (s.viewed.insert(op).second) {
          s.pending.push_back(directive("Preview " + op + ".", "view_op",
                                        {{"op_id", op}, {"mode", "preview"}}));
        }
      }
    } else if (tool == "view_op" && obs.starts_with("OPERATION ")) {
      const std::string op = first_token_after(obs, "OPERATION ");
      if (s.spec.truth_op_id && op == *s.spec.truth_op_id) {
        const auto type = s.spec.truth_error_type.value_or(ErrorType::kResponse);
        s.pending.push_front(directive(
            op + " is where the answer first goes wrong.", "report_fault",
            {{"op_id", op},
             {"error_type", std::string(to_string(type))},
             {"explanation", "output of " + op + " diverges from the golden answer"}}));
      } else {
        std::string vars;
        for (const auto& out : s.index->outputs_of(op)) {
          if (!s.queued.insert(out).second) continue;
          vars += (vars.empty() ? "" : ",") + to_string(out);
        }
        if (!vars.empty()) {
          s.pending.push_front(directive(op + " looks correct; follow its outputs.",
                                         "add_to_explore", {{"vars", vars}}));
        }
      }
    }
  }
  if (s.pending.empty()) return directive("Take the next variable.", "pop_next");
  std::string next = std::move(s.pending.front());
  s.pending.pop_front();
  return next;
}

}  // namespace

std::unique_ptr<ScriptedBackend> omniscient_judge(const ExecutionGraph& graph,
                                                  const CaseSpec& spec) {
  auto state = std::make_shared<JudgeState>();
  state->graph = &graph;
  state->index = std::make_unique<GraphIndex>(graph);
  state->spec = spec;
  return std::make_unique<ScriptedBackend>(
      [state](std::span<const ChatTurn> turns, const ToolSchema& tools) {
        return judge_turn(*state, turns, tools);
      });
}

std::unique_ptr<ScriptedBackend> obs_twin_judge(const CaseSpec& spec) {
  return std::make_unique<ScriptedBackend>(
      [spec](std::span<const ChatTurn> turns, const ToolSchema& tools) -> std::string {
        if (tools.empty()) return "SUMMARY: searching the operation log.";
        const ChatTurn& last = turns.back();
        if (!spec.truth_op_id) {
          return directive("Look for the answer.", "search_operations",
                           {{"regex", spec.golden_answer}, {"limit", "8"}});
        }
        const std::string& truth = *spec.truth_op_id;
        if (last.role == Role::kTool && last.tool_name == "search_operations") {
          const std::string index = first_token_after(last.content, "BLOCK ");
          if (!index.empty()) {
            return directive("Open the matching block.", "view_block", {{"index", index}});
          }
        } else if (last.role == Role::kTool && last.tool_name == "view_block" &&
                   last.content.find("op_id: " + truth) != std::string::npos) {
          return directive(truth + " is where the answer first goes wrong.", "report_fault",
                           {{"op_id", truth},
                            {"error_type",
                             std::string(to_string(
                                 spec.truth_error_type.value_or(ErrorType::kResponse)))},
                            {"explanation", "output of " + truth + " diverges from the golden answer"}});
        }
        return directive("Find the suspect block.", "search_operations",
                         {{"regex", "op_id: " + truth}, {"limit", "1"}});
      });
}

// ---------------------------------------------------------------------------
// Suites

SuiteMix uniform_system_mix() {
  SuiteMix mix;
  for (ErrorType t : kSystemErrorTypes) mix.emplace_back(t, 1.0);
  return mix;
}

std::vector<FaultCase> make_suite(std::size_t n_cases, std::uint64_t base_seed,
                                  const SuiteMix& mix, const SimConfig& base) {
  if (mix.empty()) throw ConfigError("suite mix is empty");
  double total = 0.0;
  for (const auto& [type, w] : mix) {
    if (!(w >= 0.0)) throw ConfigError("suite weights must be non-negative");
    total += w;
  }
  if (total <= 0.0) throw ConfigError("suite weights sum to zero");

  std::vector<std::size_t> counts;
  std::size_t assigned = 0;
  for (const auto& entry : mix) {
    counts.push_back(static_cast<std::size_t>(
        std::floor(static_cast<double>(n_cases) * entry.second / total)));
    assigned += counts.back();
  }
  for (std::size_t i = 0; assigned < n_cases; i = (i + 1) % counts.size()) {
    if (mix[i].second > 0.0) {
      ++counts[i];
      ++assigned;
    }
  }

  std::vector<FaultCase> cases;
  std::size_t k = 0;
  for (std::size_t m = 0; m < mix.size(); ++m) {
    for (std::size_t c = 0; c < counts[m]; ++c, ++k) {
      SimConfig cfg = base;
      cfg.seed = base_seed + k;
      cfg.fault = mix[m].first;
      cases.push_back(generate(cfg, text::padded_id("case-", k, 4)));
    }
  }
  return cases;
}

void write_suite(const std::string& dir, const std::vector<FaultCase>& cases) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.tsv", std::ios::binary);
  if (!manifest) throw ConfigError("cannot write manifest in '" + dir + "'");
  manifest << "case_id\tseed\ttruth_op_id\ttruth_error_type\n";
  for (const auto& fc : cases) {
    manifest << fc.case_id << "\t" << fc.config.seed << "\t" << fc.truth_op_id.value_or("")
             << "\t" << (fc.truth_error_type ? std::string(to_string(*fc.truth_error_type)) : "")
             << "\n";
    save_trace_file(fc.graph, (fs::path(dir) / (fc.case_id + ".trace.json")).string());
    std::ofstream spec(fs::path(dir) / (fc.case_id + ".case.json"), std::ios::binary);
    spec << to_json(fc.spec()).dump(2) << "\n";
  }
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open manifest '" + path + "'");
  std::vector<ManifestRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 4) throw ConfigError("manifest line needs 4 columns: '" + line + "'");
    ManifestRow row{cols[0], 0, cols[2], cols[3]};
    try {
      row.seed = std::stoull(cols[1]);
    } catch (const std::exception&) {
      throw ConfigError("bad seed in manifest line '" + line + "'");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace tracegraph::faultsim
