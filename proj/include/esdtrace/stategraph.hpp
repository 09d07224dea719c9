#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "esdtrace/logmodel.hpp"
#include "esdtrace/rng.hpp"
#include "esdtrace/schema.hpp"

namespace esdtrace {

// How reload-dependent address registers enter state identity. Raw values
// never do; what survives is whether / how often the value has changed.
//   ignore  - drop the register from the tuple entirely
//   delta   - Same until the first observed change in the trace, Changed after
//   counter - number of changes observed so far in the trace
//   unique  - like counter, but changed entries are tagged with the run id,
//             so only never-changed entries can coincide across runs
enum class AddressMode { ignore, delta, counter, unique };

inline const char* address_mode_name(AddressMode m) {
  switch (m) {
    case AddressMode::ignore: return "ignore";
    case AddressMode::delta: return "delta";
    case AddressMode::counter: return "counter";
    case AddressMode::unique: return "unique";
  }
  return "?";
}

inline std::optional<AddressMode> address_mode_from(std::string_view name) {
  if (name == "ignore") return AddressMode::ignore;
  if (name == "delta") return AddressMode::delta;
  if (name == "counter") return AddressMode::counter;
  if (name == "unique") return AddressMode::unique;
  return std::nullopt;
}

struct DeltaTok {
  bool changed = false;
  bool operator==(const DeltaTok&) const = default;
};
struct CounterTok {
  std::uint64_t index = 0;
  bool operator==(const CounterTok&) const = default;
};
// index == 0 means the shared never-changed token; run_id is empty then.
struct UniqueTok {
  std::uint64_t index = 0;
  std::string run_id;
  bool operator==(const UniqueTok&) const = default;
};

using KeyEntry = std::variant<std::uint32_t, DeltaTok, CounterTok, UniqueTok>;

// Abstracted register tuple; the unit of state identity.
struct StateKey {
  std::optional<std::string> function;  // set only in include-function mode
  std::vector<KeyEntry> entries;        // schema order, minus ignored registers

  bool operator==(const StateKey&) const = default;
};

namespace detail {
inline void escape_into(std::string& out, const std::string& s) {
  for (char c : s) {
    if (c == ';' || c == '%' || c == '@') {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02x", static_cast<unsigned char>(c));
      out += buf;
    } else {
      out += c;
    }
  }
}
}  // namespace detail

// Unambiguous one-line form; interning, file exports and hashing all key off
// this text.
inline std::string canonical_text(const StateKey& key) {
  std::string out;
  if (key.function) {
    out += "fn=";
    detail::escape_into(out, *key.function);
    out += ';';
  }
  char buf[32];
  for (const auto& entry : key.entries) {
    if (const auto* v = std::get_if<std::uint32_t>(&entry)) {
      std::snprintf(buf, sizeof buf, "x%x", *v);
      out += buf;
    } else if (const auto* d = std::get_if<DeltaTok>(&entry)) {
      out += d->changed ? "dC" : "dS";
    } else if (const auto* c = std::get_if<CounterTok>(&entry)) {
      std::snprintf(buf, sizeof buf, "c%llu", static_cast<unsigned long long>(c->index));
      out += buf;
    } else {
      const auto& u = std::get<UniqueTok>(entry);
      if (u.index == 0) {
        out += "u*";
      } else {
        std::snprintf(buf, sizeof buf, "u%llu@", static_cast<unsigned long long>(u.index));
        out += buf;
        detail::escape_into(out, u.run_id);
      }
    }
    out += ';';
  }
  return out;
}

// Content-derived state identifier: a key's id is a pure function of the key,
// so interning order can never matter.
enum class StateId : std::uint64_t {};

inline std::uint64_t raw(StateId id) { return static_cast<std::uint64_t>(id); }

inline StateId state_id_of(const std::string& canonical) {
  return StateId{fnv1a64(canonical.data(), canonical.size())};
}
inline StateId state_id_of(const StateKey& key) {
  return state_id_of(canonical_text(key));
}

// Bijection StateId <-> StateKey. Inserting the same key from any number of
// traces is idempotent; a hash collision between distinct keys aborts loudly
// rather than silently merging states.
class StateTable {
 public:
  StateId intern(StateKey key) {
    std::string canon = canonical_text(key);
    StateId id = state_id_of(canon);
    auto it = entries_.find(id);
    if (it == entries_.end()) {
      entries_.emplace(id, Entry{std::move(key), std::move(canon)});
    } else if (it->second.canon != canon) {
      throw Error(Errc::state_id_collision,
                  "state id collision between `" + it->second.canon + "` and `" +
                      canon + "`");
    }
    return id;
  }

  bool contains(StateId id) const { return entries_.count(id) != 0; }
  std::size_t size() const { return entries_.size(); }

  const StateKey& key(StateId id) const { return at(id).key; }
  const std::string& canonical(StateId id) const { return at(id).canon; }

  void merge(const StateTable& other) {
    for (const auto& [id, e] : other.entries_) {
      auto it = entries_.find(id);
      if (it == entries_.end()) entries_.emplace(id, e);
      else if (it->second.canon != e.canon)
        throw Error(Errc::state_id_collision, "state id collision while merging tables");
    }
  }

  // Dense renumbering by canonical form, for human-readable exports: the
  // state with the lexicographically smallest canonical text becomes 0.
  std::map<StateId, std::size_t> dense_ids() const {
    std::vector<std::pair<const std::string*, StateId>> order;
    order.reserve(entries_.size());
    for (const auto& [id, e] : entries_) order.emplace_back(&e.canon, id);
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return *a.first < *b.first; });
    std::map<StateId, std::size_t> dense;
    for (std::size_t i = 0; i < order.size(); ++i) dense.emplace(order[i].second, i);
    return dense;
  }

  std::vector<StateId> ids_by_canonical() const {
    std::vector<StateId> ids;
    ids.reserve(entries_.size());
    for (const auto& [id, e] : entries_) ids.push_back(id);
    std::sort(ids.begin(), ids.end(), [this](StateId a, StateId b) {
      return at(a).canon < at(b).canon;
    });
    return ids;
  }

 private:
  struct Entry {
    StateKey key;
    std::string canon;
  };
  const Entry& at(StateId id) const {
    auto it = entries_.find(id);
    if (it == entries_.end())
      throw Error(Errc::node_not_in_graph, "state id is not in the table");
    return it->second;
  }
  std::map<StateId, Entry> entries_;
};

// One run's abstracted state sequence with per-position function annotations.
struct ExecutionTrace {
  RunMetadata meta;
  AddressMode mode = AddressMode::delta;
  bool include_function = false;
  std::string schema_fingerprint;
  std::vector<StateId> states;
  std::vector<std::string> functions;

  std::size_t length() const { return states.size(); }
};

// Replaces address-register values with abstraction tokens, leaving plain
// registers untouched. Function names join the key only when requested.
inline std::vector<StateKey> abstract_trace(const RawLog& log,
                                            const RegisterSchema& schema,
                                            AddressMode mode,
                                            bool include_function = false) {
  std::vector<std::size_t> addr_index;
  for (std::size_t i = 0; i < schema.names.size(); ++i)
    if (schema.is_address(schema.names[i])) addr_index.push_back(i);

  std::vector<std::uint32_t> prev_value(schema.names.size(), 0);
  std::vector<std::uint64_t> change_count(schema.names.size(), 0);

  std::vector<StateKey> keys;
  keys.reserve(log.snapshots.size());
  for (std::size_t t = 0; t < log.snapshots.size(); ++t) {
    const Snapshot& snap = log.snapshots[t];
    StateKey key;
    if (include_function) key.function = snap.function_name;
    key.entries.reserve(schema.names.size());
    for (std::size_t i = 0; i < schema.names.size(); ++i) {
      const std::string& name = schema.names[i];
      auto it = snap.values.find(name);
      if (it == snap.values.end())
        throw Error(Errc::missing_register,
                    "snapshot " + std::to_string(t) + " lacks register " + name);
      std::uint32_t value = it->second;
      if (!schema.is_address(name)) {
        key.entries.emplace_back(value);
        continue;
      }
      if (t > 0 && value != prev_value[i]) ++change_count[i];
      prev_value[i] = value;
      switch (mode) {
        case AddressMode::ignore:
          break;
        case AddressMode::delta:
          key.entries.emplace_back(DeltaTok{change_count[i] > 0});
          break;
        case AddressMode::counter:
          key.entries.emplace_back(CounterTok{change_count[i]});
          break;
        case AddressMode::unique:
          key.entries.emplace_back(UniqueTok{
              change_count[i],
              change_count[i] == 0 ? std::string{} : log.metadata.run_id});
          break;
      }
    }
    keys.push_back(std::move(key));
  }
  return keys;
}

inline ExecutionTrace intern_trace(const RawLog& log, const RegisterSchema& schema,
                                   AddressMode mode, bool include_function,
                                   StateTable& table) {
  ExecutionTrace trace;
  trace.meta = log.metadata;
  trace.mode = mode;
  trace.include_function = include_function;
  trace.schema_fingerprint = schema.fingerprint();
  auto keys = abstract_trace(log, schema, mode, include_function);
  trace.states.reserve(keys.size());
  for (auto& key : keys) trace.states.push_back(table.intern(std::move(key)));
  trace.functions.reserve(log.snapshots.size());
  for (const auto& snap : log.snapshots) trace.functions.push_back(snap.function_name);
  return trace;
}

using Edge = std::pair<StateId, StateId>;

// Deduplicated states with transition counts; per-run or unified.
struct ExecutionGraph {
  std::set<StateId> nodes;
  std::map<Edge, std::uint64_t> edges;
  std::set<std::string> run_ids;

  std::uint64_t edge_count_sum() const {
    std::uint64_t sum = 0;
    for (const auto& [edge, count] : edges) sum += count;
    return sum;
  }
};

inline ExecutionGraph build_graph(const ExecutionTrace& trace) {
  ExecutionGraph g;
  g.run_ids.insert(trace.meta.run_id);
  for (StateId s : trace.states) g.nodes.insert(s);
  for (std::size_t i = 0; i + 1 < trace.states.size(); ++i)
    ++g.edges[{trace.states[i], trace.states[i + 1]}];
  return g;
}

struct UnifiedGraph {
  ExecutionGraph graph;
  std::vector<std::vector<StateId>> paths;  // one per input trace, same order
};

// Order-independent merge of per-run graphs. All traces must have been
// abstracted the same way; each run's path replays inside the result.
inline UnifiedGraph unify(std::span<const ExecutionTrace> traces) {
  UnifiedGraph out;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const ExecutionTrace& t = traces[i];
    if (i > 0) {
      const ExecutionTrace& first = traces.front();
      if (t.mode != first.mode || t.include_function != first.include_function)
        throw Error(Errc::mode_mismatch,
                    "trace " + t.meta.run_id + " was abstracted under a different mode");
      if (t.schema_fingerprint != first.schema_fingerprint)
        throw Error(Errc::schema_mismatch,
                    "trace " + t.meta.run_id + " was built against a different schema");
    }
    ExecutionGraph g = build_graph(t);
    out.graph.nodes.insert(g.nodes.begin(), g.nodes.end());
    for (const auto& [edge, count] : g.edges) out.graph.edges[edge] += count;
    out.graph.run_ids.insert(g.run_ids.begin(), g.run_ids.end());
    out.paths.push_back(t.states);
  }
  return out;
}

// De-interns a path, checking that it actually replays inside the graph.
inline std::vector<StateKey> reconstruct(const ExecutionGraph& graph,
                                         const StateTable& table,
                                         std::span<const StateId> path) {
  std::vector<StateKey> keys;
  keys.reserve(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!graph.nodes.count(path[i]))
      throw Error(Errc::node_not_in_graph,
                  "path state #" + std::to_string(i) + " is not a graph node");
    if (i + 1 < path.size() && !graph.edges.count({path[i], path[i + 1]}))
      throw Error(Errc::edge_not_in_graph,
                  "path step #" + std::to_string(i) + " is not a graph edge");
    keys.push_back(table.key(path[i]));
  }
  return keys;
}

struct DotHighlight {
  std::set<StateId> states;
  std::set<Edge> edges;
};

// Deterministic DOT text: nodes in dense-id order, edges sorted, counts as
// edge labels. Highlighted elements are drawn bold red.
inline std::string export_dot(const ExecutionGraph& graph, const StateTable& table,
                              const DotHighlight* highlight = nullptr,
                              const std::string& name = "execution") {
  auto dense = table.dense_ids();
  std::vector<std::pair<std::size_t, StateId>> nodes;
  for (StateId s : graph.nodes) {
    auto it = dense.find(s);
    if (it == dense.end())
      throw Error(Errc::node_not_in_graph, "graph node missing from state table");
    nodes.emplace_back(it->second, s);
  }
  std::sort(nodes.begin(), nodes.end());

  std::string out = "digraph " + name + " {\n  rankdir=LR;\n  node [shape=ellipse, fontsize=10];\n";
  char buf[64];
  for (const auto& [d, s] : nodes) {
    std::snprintf(buf, sizeof buf, "  s%zu [label=\"s%zu\"", d, d);
    out += buf;
    out += ", tooltip=\"" + table.canonical(s) + "\"";
    if (highlight && highlight->states.count(s)) out += ", color=red, penwidth=2.0";
    out += "];\n";
  }
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, Edge>> edges;
  for (const auto& [edge, count] : graph.edges)
    edges.push_back({{dense.at(edge.first), dense.at(edge.second)}, edge});
  std::sort(edges.begin(), edges.end());
  for (const auto& [d, edge] : edges) {
    std::snprintf(buf, sizeof buf, "  s%zu -> s%zu [label=\"%llu\"", d.first, d.second,
                  static_cast<unsigned long long>(graph.edges.at(edge)));
    out += buf;
    if (highlight && highlight->edges.count(edge)) out += ", color=red, penwidth=2.0";
    out += "];\n";
  }
  out += "}\n";
  return out;
}

}  // namespace esdtrace
