#include "tracegraph/recorder.hpp"

#include "tracegraph/errors.hpp"
#include "tracegraph/text_util.hpp"

namespace tracegraph {

std::optional<std::string> find_field(std::string_view rendering, std::string_view field) {
  while (!rendering.empty()) {
    std::size_t end = rendering.find_first_of("\n;");
    std::string_view pair = rendering.substr(0, end);
    rendering.remove_prefix(end == std::string_view::npos ? rendering.size() : end + 1);
    std::size_t eq = pair.find('=');
    if (eq == std::string_view::npos) continue;
    if (text::trim(pair.substr(0, eq)) == field) {
      return std::string(text::trim(pair.substr(eq + 1)));
    }
  }
  return std::nullopt;
}

TraceContext::TraceContext(std::string graph_id, Metadata metadata)
    : graph_(std::move(graph_id)) {
  graph_.mutable_metadata() = std::move(metadata);
  strategies_.emplace(identity::kByRender,
                      IdentityStrategy{std::string(identity::kByRender), [](std::string_view s) {
                                         return text::hex64(text::fnv1a64(s));
                                       }});
  renderers_.emplace("text", [](std::string_view s) { return std::string(s); });
}

void TraceContext::require_open() const {
  if (finished_) throw StateError("trace context already finished");
}

std::string TraceContext::begin_session(std::string label, std::string comment,
                                        Metadata metadata) {
  require_open();
  if (operation_) throw StateError("cannot begin a session while an operation is active");
  std::string id = text::padded_id("sess-", session_count_++, 3);
  graph_.add_session(Session{id, std::move(label), std::move(comment), std::move(metadata), {}});
  session_ = id;
  return id;
}

void TraceContext::end_session() {
  require_open();
  if (!session_) throw StateError("end_session without an active session");
  if (operation_) throw StateError("end_session while operation '" + *operation_ + "' is active");
  session_.reset();
}

std::string TraceContext::begin_operation(std::string name, std::string category,
                                          std::string comment, Metadata metadata) {
  require_open();
  if (!session_) throw StateError("begin_operation requires an active session");
  if (operation_) {
    throw StateError("operations do not nest; '" + *operation_ + "' is still active");
  }
  std::string id = text::padded_id("op-", op_count_++, 5);
  OperationRecord op{id,        *session_,          std::move(name), std::move(category),
                     std::move(comment), std::move(metadata), graph_.tick(),   0};
  op.ts_end = op.ts_start;
  graph_.add_operation(std::move(op));
  graph_.mutable_session(*session_).operation_ids.push_back(id);
  operation_ = id;
  return id;
}

void TraceContext::end_operation() {
  require_open();
  if (!operation_) throw StateError("end_operation without an active operation");
  graph_.mutable_operation(*operation_).ts_end = graph_.tick();
  operation_.reset();
}

std::string TraceContext::identity_key(std::string_view strategy,
                                       std::string_view rendered) const {
  std::string_view field;
  if (strategy == identity::kMem0Dict) {
    field = "id";
  } else if (strategy.starts_with(identity::kByFieldPrefix)) {
    field = strategy.substr(identity::kByFieldPrefix.size());
  }
  if (!field.empty()) {
    auto value = find_field(rendered, field);
    if (!value) {
      throw ConfigError("snapshot has no field '" + std::string(field) +
                        "' required by identity strategy '" + std::string(strategy) + "'");
    }
    return std::string(field) + "=" + *value;
  }
  auto it = strategies_.find(strategy);
  if (it == strategies_.end()) {
    throw ConfigError("identity strategy '" + std::string(strategy) + "' is not registered");
  }
  return it->second.key(rendered);
}

VarRef TraceContext::comment_variable(std::string_view snapshot, const VarConfig& config) {
  require_open();
  auto renderer = renderers_.find(config.renderer);
  if (renderer == renderers_.end()) {
    throw ConfigError("renderer '" + config.renderer + "' is not registered");
  }
  std::string rendered = renderer->second(snapshot);

  const bool unique = config.identity == identity::kUnique;
  std::string key = unique ? std::string() : identity_key(config.identity, rendered);
  VariableVersion version{0, 0, std::move(rendered), config.comment, config.metadata};

  if (!unique) {
    auto it = chain_by_key_.find(config.category + '\x1f' + key);
    if (it != chain_by_key_.end()) {
      const auto& chain = graph_.variable(it->second);
      version.version = static_cast<std::uint32_t>(chain.versions.size());
      version.ts = graph_.tick();
      graph_.append_version(it->second, std::move(version));
      return VarRef{it->second, static_cast<std::uint32_t>(chain.versions.size() - 1)};
    }
  }

  std::string id = text::padded_id("var-", var_count_++, 5);
  if (unique) key = id;
  version.ts = graph_.tick();
  chain_by_key_.emplace(config.category + '\x1f' + key, id);
  graph_.add_variable(VariableChain{id, key, config.category, {std::move(version)}});
  return VarRef{id, 0};
}

VarRef TraceContext::materialize(const Endpoint& endpoint) {
  if (const auto* ref = std::get_if<VarRef>(&endpoint)) {
    graph_.version(*ref);  // existence check
    return *ref;
  }
  const auto& snap = std::get<Snapshot>(endpoint);
  return comment_variable(snap.text, snap.config);
}

VarRef TraceContext::reversion(const VarRef& ref) {
  const VariableVersion& base = graph_.version(ref);
  const auto& chain = graph_.variable(ref.var_id);
  VariableVersion copy{static_cast<std::uint32_t>(chain.versions.size()), graph_.tick(),
                       base.value, base.comment, base.metadata};
  graph_.append_version(ref.var_id, std::move(copy));
  return VarRef{ref.var_id, static_cast<std::uint32_t>(chain.versions.size() - 1)};
}

DependencyEdge TraceContext::comment_link(const Endpoint& source, const Endpoint& target,
                                          std::string comment, Metadata metadata) {
  require_open();
  if (!operation_) throw StateError("comment_link requires an active operation");
  VarRef src = materialize(source);
  VarRef dst = materialize(target);

  const Tick src_ts = graph_.version(src).ts;
  const Tick dst_ts = graph_.version(dst).ts;
  const Tick op_start = graph_.operation(*operation_).ts_start;
  if (dst == src || dst_ts <= src_ts || dst_ts < op_start) dst = reversion(dst);

  DependencyEdge edge{std::move(src), std::move(dst), *operation_, std::move(comment),
                      std::move(metadata)};
  graph_.add_edge(edge);
  return edge;
}

void TraceContext::register_identity(IdentityStrategy strategy) {
  require_open();
  const std::string& name = strategy.name;
  if (name.empty() || !strategy.key) throw ConfigError("identity strategy needs a name and key");
  if (strategies_.contains(name) || name == identity::kMem0Dict || name == identity::kUnique ||
      name.starts_with(identity::kByFieldPrefix)) {
    throw ConfigError("identity strategy '" + name + "' is already registered");
  }
  strategies_.emplace(name, std::move(strategy));
}

void TraceContext::register_renderer(std::string name,
                                     std::function<std::string(std::string_view)> render) {
  require_open();
  if (renderers_.contains(name)) {
    throw ConfigError("renderer '" + name + "' is already registered");
  }
  renderers_.emplace(std::move(name), std::move(render));
}

ExecutionGraph TraceContext::finish() {
  require_open();
  if (operation_) throw StateError("finish while operation '" + *operation_ + "' is active");
  session_.reset();
  finished_ = true;
  graph_.seal();
  return std::move(graph_);
}

TraceContext::OperationScope::OperationScope(TraceContext& ctx, std::string name,
                                             std::string category, std::string comment,
                                             Metadata metadata)
    : ctx_(ctx),
      op_id_(ctx.begin_operation(std::move(name), std::move(category), std::move(comment),
                                 std::move(metadata))) {}

TraceContext::OperationScope::~OperationScope() {
  if (ctx_.operation_ == op_id_) {
    try {
      ctx_.end_operation();
    } catch (...) {
    }
  }
}

}  // namespace tracegraph
