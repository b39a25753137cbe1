#include "tracegraph/trace_io.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "tracegraph/errors.hpp"
#include "tracegraph/text_util.hpp"

namespace tracegraph {

namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

constexpr Tick kNoTick = std::numeric_limits<Tick>::max();

// ---------------------------------------------------------------------------
// Canonical ordering

struct Order {
  std::vector<const Session*> sessions;
  std::vector<const OperationRecord*> operations;
  std::vector<const VariableChain*> variables;
  std::vector<const DependencyEdge*> edges;
};

template <typename T>
std::vector<const T*> pointers(const std::vector<T>& items) {
  std::vector<const T*> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(&item);
  return out;
}

Tick version_ts(const ExecutionGraph& g, const VarRef& ref) {
  const auto* v = g.find_version(ref);
  return v ? v->ts : kNoTick;
}

Order order_of(const ExecutionGraph& g, bool canonical) {
  Order order{pointers(g.sessions()), pointers(g.operations()), pointers(g.variables()),
              pointers(g.edges())};
  if (!canonical) return order;

  auto session_key = [&](const Session* s) {
    Tick first = kNoTick;
    for (const auto& id : s->operation_ids) {
      if (const auto* op = g.find_operation(id)) first = std::min(first, op->ts_start);
    }
    return std::make_tuple(first, std::cref(s->session_id));
  };
  std::stable_sort(order.sessions.begin(), order.sessions.end(),
                   [&](auto* a, auto* b) { return session_key(a) < session_key(b); });

  std::stable_sort(order.operations.begin(), order.operations.end(), [](auto* a, auto* b) {
    return std::tie(a->ts_start, a->op_id) < std::tie(b->ts_start, b->op_id);
  });

  auto var_key = [](const VariableChain* v) {
    Tick first = v->versions.empty() ? kNoTick : v->versions.front().ts;
    return std::make_tuple(first, std::cref(v->var_id));
  };
  std::stable_sort(order.variables.begin(), order.variables.end(),
                   [&](auto* a, auto* b) { return var_key(a) < var_key(b); });

  auto edge_key = [&](const DependencyEdge* e) {
    return std::make_tuple(version_ts(g, e->dst), version_ts(g, e->src), std::cref(e->dst),
                           std::cref(e->src), std::cref(e->op_id), std::cref(e->comment));
  };
  std::stable_sort(order.edges.begin(), order.edges.end(),
                   [&](auto* a, auto* b) { return edge_key(a) < edge_key(b); });
  return order;
}

// ---------------------------------------------------------------------------
// Writing

ojson metadata_json(const Metadata& m) {
  ojson out = ojson::object();
  for (const auto& [k, v] : m) out[k] = v;
  return out;
}

ojson ref_json(const VarRef& ref) {
  ojson out;
  out["var_id"] = ref.var_id;
  out["version"] = ref.version;
  return out;
}

// ---------------------------------------------------------------------------
// Reading

[[noreturn]] void schema_error(const std::string& what) {
  throw ParseError("trace document: " + what, 0);
}

const json& member(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) schema_error(where + " is not an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where + " lacks '" + key + "'");
  return *it;
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
  const json& v = member(obj, key, where);
  if (!v.is_string()) schema_error(where + "." + key + " must be a string");
  return v.get<std::string>();
}

std::uint64_t get_uint(const json& obj, const char* key, const std::string& where) {
  const json& v = member(obj, key, where);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    schema_error(where + "." + key + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

const json& get_array(const json& obj, const char* key, const std::string& where) {
  const json& v = member(obj, key, where);
  if (!v.is_array()) schema_error(where + "." + key + " must be an array");
  return v;
}

Metadata get_metadata(const json& obj, const std::string& where) {
  const json& v = member(obj, "metadata", where);
  if (!v.is_object()) schema_error(where + ".metadata must be an object");
  Metadata out;
  for (auto it = v.begin(); it != v.end(); ++it) {
    if (!it.value().is_string()) schema_error(where + ".metadata values must be strings");
    out.emplace(it.key(), it.value().get<std::string>());
  }
  return out;
}

VarRef get_ref(const json& obj, const char* key, const std::string& where) {
  const json& v = member(obj, key, where);
  const std::string at = where + "." + key;
  auto version = get_uint(v, "version", at);
  if (version > std::numeric_limits<std::uint32_t>::max()) schema_error(at + " version too large");
  return VarRef{get_string(v, "var_id", at), static_cast<std::uint32_t>(version)};
}

std::string escape_dot(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string export_trace(const ExecutionGraph& graph, bool canonical) {
  if (!graph.sealed()) throw StateError("export requires a sealed graph");
  Order order = order_of(graph, canonical);

  ojson doc;
  doc["format_version"] = kTraceFormatVersion;
  doc["graph_id"] = graph.graph_id();
  doc["metadata"] = metadata_json(graph.metadata());

  ojson sessions = ojson::array();
  for (const auto* s : order.sessions) {
    ojson j;
    j["session_id"] = s->session_id;
    j["label"] = s->label;
    j["comment"] = s->comment;
    j["metadata"] = metadata_json(s->metadata);
    j["operation_ids"] = s->operation_ids;
    sessions.push_back(std::move(j));
  }
  doc["sessions"] = std::move(sessions);

  ojson operations = ojson::array();
  for (const auto* op : order.operations) {
    ojson j;
    j["op_id"] = op->op_id;
    j["session_id"] = op->session_id;
    j["name"] = op->name;
    j["category"] = op->category;
    j["comment"] = op->comment;
    j["metadata"] = metadata_json(op->metadata);
    j["ts_start"] = op->ts_start;
    j["ts_end"] = op->ts_end;
    operations.push_back(std::move(j));
  }
  doc["operations"] = std::move(operations);

  ojson variables = ojson::array();
  for (const auto* chain : order.variables) {
    ojson j;
    j["var_id"] = chain->var_id;
    j["identity_key"] = chain->identity_key;
    j["category"] = chain->category;
    ojson versions = ojson::array();
    for (const auto& v : chain->versions) {
      ojson vj;
      vj["version"] = v.version;
      vj["ts"] = v.ts;
      vj["value"] = v.value;
      vj["comment"] = v.comment;
      vj["metadata"] = metadata_json(v.metadata);
      versions.push_back(std::move(vj));
    }
    j["versions"] = std::move(versions);
    variables.push_back(std::move(j));
  }
  doc["variables"] = std::move(variables);

  ojson edges = ojson::array();
  for (const auto* e : order.edges) {
    ojson j;
    j["src"] = ref_json(e->src);
    j["dst"] = ref_json(e->dst);
    j["op_id"] = e->op_id;
    j["comment"] = e->comment;
    j["metadata"] = metadata_json(e->metadata);
    edges.push_back(std::move(j));
  }
  doc["edges"] = std::move(edges);

  return doc.dump(2, ' ', false, ojson::error_handler_t::replace) + "\n";
}

ExecutionGraph import_trace(std::string_view document, ImportOptions options) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }

  const std::string root = "document";
  const std::string format = get_string(doc, "format_version", root);
  if (format != kTraceFormatVersion) schema_error("unsupported format_version '" + format + "'");

  ExecutionGraph graph(get_string(doc, "graph_id", root));
  graph.mutable_metadata() = get_metadata(doc, root);
  Tick max_ts = 0;
  bool any_ts = false;
  auto see = [&](Tick ts) {
    max_ts = any_ts ? std::max(max_ts, ts) : ts;
    any_ts = true;
  };

  const json& sessions = get_array(doc, "sessions", root);
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const std::string at = "sessions[" + std::to_string(i) + "]";
    const json& s = sessions[i];
    Session session{get_string(s, "session_id", at), get_string(s, "label", at),
                    get_string(s, "comment", at), get_metadata(s, at), {}};
    for (const auto& id : get_array(s, "operation_ids", at)) {
      if (!id.is_string()) schema_error(at + ".operation_ids must hold strings");
      session.operation_ids.push_back(id.get<std::string>());
    }
    graph.add_session(std::move(session));
  }

  const json& operations = get_array(doc, "operations", root);
  for (std::size_t i = 0; i < operations.size(); ++i) {
    const std::string at = "operations[" + std::to_string(i) + "]";
    const json& o = operations[i];
    OperationRecord op{get_string(o, "op_id", at),    get_string(o, "session_id", at),
                       get_string(o, "name", at),     get_string(o, "category", at),
                       get_string(o, "comment", at),  get_metadata(o, at),
                       get_uint(o, "ts_start", at),   get_uint(o, "ts_end", at)};
    see(op.ts_start);
    see(op.ts_end);
    graph.add_operation(std::move(op));
  }

  const json& variables = get_array(doc, "variables", root);
  for (std::size_t i = 0; i < variables.size(); ++i) {
    const std::string at = "variables[" + std::to_string(i) + "]";
    const json& v = variables[i];
    VariableChain chain{get_string(v, "var_id", at), get_string(v, "identity_key", at),
                        get_string(v, "category", at), {}};
    const json& versions = get_array(v, "versions", at);
    for (std::size_t k = 0; k < versions.size(); ++k) {
      const std::string vat = at + ".versions[" + std::to_string(k) + "]";
      const json& vj = versions[k];
      auto number = get_uint(vj, "version", vat);
      if (number > std::numeric_limits<std::uint32_t>::max()) schema_error(vat + " too large");
      VariableVersion version{static_cast<std::uint32_t>(number), get_uint(vj, "ts", vat),
                              get_string(vj, "value", vat), get_string(vj, "comment", vat),
                              get_metadata(vj, vat)};
      see(version.ts);
      chain.versions.push_back(std::move(version));
    }
    graph.add_variable(std::move(chain));
  }

  const json& edges = get_array(doc, "edges", root);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string at = "edges[" + std::to_string(i) + "]";
    const json& e = edges[i];
    graph.add_edge(DependencyEdge{get_ref(e, "src", at), get_ref(e, "dst", at),
                                  get_string(e, "op_id", at), get_string(e, "comment", at),
                                  get_metadata(e, at)});
  }

  graph.set_clock(any_ts ? max_ts + 1 : 0);

  if (options.validate) {
    ValidationReport report = validate(graph);
    if (const Violation* v = report.first_error()) {
      throw ValidationError(v->code, v->code + " at " + v->id + ": " + v->detail);
    }
  }
  graph.seal();
  return graph;
}

ExecutionGraph load_trace_file(const std::string& path, ImportOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open trace file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return import_trace(buf.str(), options);
}

void save_trace_file(const ExecutionGraph& graph, const std::string& path, bool canonical) {
  std::string doc = export_trace(graph, canonical);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write trace file '" + path + "'");
  out << doc;
}

std::string export_dot(const ExecutionGraph& graph, DotOptions options) {
  Order order = order_of(graph, true);
  std::ostringstream out;
  out << "digraph \"" << escape_dot(graph.graph_id()) << "\" {\n";
  out << "  rankdir=LR;\n";

  for (const auto* chain : order.variables) {
    for (const auto& v : chain->versions) {
      const std::string ref = chain->var_id + "#" + std::to_string(v.version);
      out << "  \"v:" << escape_dot(ref) << "\" [shape=ellipse, label=\"" << escape_dot(ref)
          << " [" << escape_dot(chain->category) << "]\\n"
          << escape_dot(text::truncate_chars(v.value, options.max_value_chars)) << "\"];\n";
    }
  }
  for (const auto* op : order.operations) {
    out << "  \"o:" << escape_dot(op->op_id) << "\" [shape=box, label=\""
        << escape_dot(op->op_id) << "\\n" << escape_dot(op->name) << "\"];\n";
  }

  std::set<std::pair<std::string, std::string>> emitted;
  auto emit = [&](const std::string& from, const std::string& to) {
    if (emitted.emplace(from, to).second) {
      out << "  \"" << escape_dot(from) << "\" -> \"" << escape_dot(to) << "\";\n";
    }
  };
  for (const auto* e : order.edges) {
    emit("v:" + to_string(e->src), "o:" + e->op_id);
    emit("o:" + e->op_id, "v:" + to_string(e->dst));
  }
  out << "}\n";
  return out.str();
}

}  // namespace tracegraph
