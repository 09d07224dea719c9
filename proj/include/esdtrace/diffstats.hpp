#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "esdtrace/logmodel.hpp"
#include "esdtrace/stategraph.hpp"

namespace esdtrace {

// Traces split by recording condition. Groups are disjoint by run id.
struct CorpusPartition {
  std::vector<ExecutionTrace> baseline;
  std::vector<ExecutionTrace> esd;
};

inline CorpusPartition partition_runs(std::span<const ExecutionTrace> traces) {
  CorpusPartition p;
  std::set<std::string> seen;
  for (const ExecutionTrace& t : traces) {
    if (!seen.insert(t.meta.run_id).second)
      throw Error(Errc::duplicate_run_id, "run_id used twice: " + t.meta.run_id);
    (t.meta.condition == Condition::baseline ? p.baseline : p.esd).push_back(t);
  }
  return p;
}

// The four ways an exposure-only transition can relate to the baseline state
// set (endpoint membership is what distinguishes them).
enum class EdgeCategory {
  to_non_baseline,                           // baseline state -> new state
  between_non_baseline,                      // new state -> new state
  non_baseline_edge_between_baseline_states, // both endpoints known, edge new
  from_non_baseline_to_baseline,             // new state -> baseline state
};

inline const char* edge_category_name(EdgeCategory c) {
  switch (c) {
    case EdgeCategory::to_non_baseline: return "to_non_baseline";
    case EdgeCategory::between_non_baseline: return "between_non_baseline";
    case EdgeCategory::non_baseline_edge_between_baseline_states:
      return "non_baseline_edge_between_baseline_states";
    case EdgeCategory::from_non_baseline_to_baseline:
      return "from_non_baseline_to_baseline";
  }
  return "?";
}

struct DiffReport {
  std::set<StateId> esd_only_states;
  std::set<StateId> baseline_only_states;
  std::set<StateId> shared_states;
  std::map<Edge, EdgeCategory> esd_only_edges;
};

namespace detail {
inline void reached(std::span<const ExecutionTrace> group, std::set<StateId>& states,
                    std::set<Edge>& edges) {
  for (const ExecutionTrace& t : group) {
    for (StateId s : t.states) states.insert(s);
    for (std::size_t i = 0; i + 1 < t.states.size(); ++i)
      edges.insert({t.states[i], t.states[i + 1]});
  }
}
}  // namespace detail

// Set differences over reached states and transitions. A transition counts as
// exposure-only when no baseline run ever took it; its category follows from
// whether its endpoints belong to the baseline state set.
inline DiffReport diff_states(const CorpusPartition& partition) {
  if (partition.baseline.empty() || partition.esd.empty())
    throw Error(Errc::empty_group, "differential analysis needs both groups");

  std::set<StateId> base_states, esd_states;
  std::set<Edge> base_edges, esd_edges;
  detail::reached(partition.baseline, base_states, base_edges);
  detail::reached(partition.esd, esd_states, esd_edges);

  DiffReport report;
  for (StateId s : esd_states)
    (base_states.count(s) ? report.shared_states : report.esd_only_states).insert(s);
  for (StateId s : base_states)
    if (!esd_states.count(s)) report.baseline_only_states.insert(s);

  for (const Edge& e : esd_edges) {
    if (base_edges.count(e)) continue;
    bool src_known = base_states.count(e.first) != 0;
    bool dst_known = base_states.count(e.second) != 0;
    EdgeCategory cat =
        src_known ? (dst_known ? EdgeCategory::non_baseline_edge_between_baseline_states
                               : EdgeCategory::to_non_baseline)
                  : (dst_known ? EdgeCategory::from_non_baseline_to_baseline
                               : EdgeCategory::between_non_baseline);
    report.esd_only_edges.emplace(e, cat);
  }
  return report;
}

struct DistributionRow {
  std::uint32_t value = 0;
  double p_baseline = 0;
  double p_esd = 0;
  double difference = 0;  // p_esd - p_baseline
};

// Pooled per-group probabilities of the raw values one register takes.
struct Distribution {
  std::string register_name;
  std::vector<DistributionRow> rows;
};

inline Distribution value_distribution(std::span<const RawLog> baseline,
                                       std::span<const RawLog> esd,
                                       const std::string& register_name) {
  if (baseline.empty() || esd.empty())
    throw Error(Errc::empty_group, "value distribution needs both groups");
  if (!baseline.front().schema.contains(register_name))
    throw Error(Errc::unknown_register,
                register_name + " is not in the corpus schema");

  auto tally = [&](std::span<const RawLog> group, std::map<std::uint32_t, double>& probs) {
    std::map<std::uint32_t, std::uint64_t> counts;
    std::uint64_t total = 0;
    for (const RawLog& log : group)
      for (const Snapshot& snap : log.snapshots) {
        ++counts[snap.values.at(register_name)];
        ++total;
      }
    if (total == 0)
      throw Error(Errc::empty_group, "group has no snapshots for " + register_name);
    for (const auto& [value, count] : counts)
      probs[value] = static_cast<double>(count) / static_cast<double>(total);
  };

  std::map<std::uint32_t, double> p_base, p_esd;
  tally(baseline, p_base);
  tally(esd, p_esd);

  Distribution dist;
  dist.register_name = register_name;
  std::set<std::uint32_t> values;
  for (const auto& [v, p] : p_base) values.insert(v);
  for (const auto& [v, p] : p_esd) values.insert(v);
  for (std::uint32_t v : values) {
    DistributionRow row;
    row.value = v;
    if (auto it = p_base.find(v); it != p_base.end()) row.p_baseline = it->second;
    if (auto it = p_esd.find(v); it != p_esd.end()) row.p_esd = it->second;
    row.difference = row.p_esd - row.p_baseline;
    dist.rows.push_back(row);
  }
  std::sort(dist.rows.begin(), dist.rows.end(),
            [](const DistributionRow& a, const DistributionRow& b) {
              if (a.p_baseline != b.p_baseline) return a.p_baseline > b.p_baseline;
              return a.value < b.value;
            });
  return dist;
}

using ProbColumn = std::map<std::uint32_t, double>;

struct ComparisonRow {
  std::uint32_t value = 0;
  double a = 0;
  double b = 0;
  double difference = 0;  // a - b, values absent from a column count as 0
  bool differs = false;
};

inline std::vector<ComparisonRow> compare_distributions(const ProbColumn& a,
                                                        const ProbColumn& b) {
  std::set<std::uint32_t> values;
  for (const auto& [v, p] : a) values.insert(v);
  for (const auto& [v, p] : b) values.insert(v);
  std::vector<ComparisonRow> rows;
  rows.reserve(values.size());
  for (std::uint32_t v : values) {
    ComparisonRow row;
    row.value = v;
    if (auto it = a.find(v); it != a.end()) row.a = it->second;
    if (auto it = b.find(v); it != b.end()) row.b = it->second;
    row.difference = row.a - row.b;
    row.differs = row.difference != 0.0;
    rows.push_back(row);
  }
  return rows;
}

struct OccurrenceRow {
  StateId state{};
  double mean = 0;  // total occurrences across the group / number of logs
};

struct OccurrenceHistogram {
  std::vector<OccurrenceRow> rows;
  std::size_t truncated = 0;  // rows cut from the tail for plotting
};

// Average occurrences per log, divided by the group size whether or not a
// given log reaches the state. The state table supplies the deterministic
// tie-break order.
inline OccurrenceHistogram occurrence_histogram(
    std::span<const ExecutionTrace> group, const StateTable& table,
    std::optional<std::size_t> limit = std::nullopt) {
  if (group.empty())
    throw Error(Errc::empty_group, "occurrence histogram needs a non-empty group");
  std::map<StateId, std::uint64_t> totals;
  for (const ExecutionTrace& t : group)
    for (StateId s : t.states) ++totals[s];

  OccurrenceHistogram hist;
  hist.rows.reserve(totals.size());
  for (const auto& [state, total] : totals)
    hist.rows.push_back(
        {state, static_cast<double>(total) / static_cast<double>(group.size())});
  std::sort(hist.rows.begin(), hist.rows.end(),
            [&](const OccurrenceRow& a, const OccurrenceRow& b) {
              if (a.mean != b.mean) return a.mean > b.mean;
              return table.canonical(a.state) < table.canonical(b.state);
            });
  if (limit && hist.rows.size() > *limit) {
    hist.truncated = hist.rows.size() - *limit;
    hist.rows.resize(*limit);
  }
  return hist;
}

// Percentage of transitions touching a state outside the baseline set.
inline double nonbaseline_transition_fraction(const ExecutionTrace& trace,
                                              const std::set<StateId>& baseline_states) {
  if (trace.states.size() < 2)
    throw Error(Errc::no_transitions,
                "trace " + trace.meta.run_id + " has fewer than two snapshots");
  std::size_t total = trace.states.size() - 1;
  std::size_t hits = 0;
  for (std::size_t i = 0; i + 1 < trace.states.size(); ++i)
    if (!baseline_states.count(trace.states[i]) ||
        !baseline_states.count(trace.states[i + 1]))
      ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

enum class MetadataField { voltage, pulse_width };

inline const char* metadata_field_name(MetadataField f) {
  return f == MetadataField::voltage ? "voltage" : "pulse_width";
}

inline std::optional<MetadataField> metadata_field_from(std::string_view name) {
  if (name == "voltage") return MetadataField::voltage;
  if (name == "pulse_width") return MetadataField::pulse_width;
  return std::nullopt;
}

struct CorrelationRow {
  double field_value = 0;
  std::string run_id;
  double pct_nonbaseline = 0;
};

struct CorrelationResult {
  std::vector<CorrelationRow> rows;
  std::vector<std::pair<std::string, std::string>> excluded;  // run_id, reason
};

// One row per exposed run: its injection parameter against the fraction of
// transitions leaving the baseline state set. Runs that cannot contribute
// (missing field, too short) are reported, not silently dropped.
inline CorrelationResult correlate_metadata(const CorpusPartition& partition,
                                            MetadataField field) {
  std::set<StateId> base_states;
  std::set<Edge> base_edges;
  detail::reached(partition.baseline, base_states, base_edges);

  CorrelationResult result;
  for (const ExecutionTrace& t : partition.esd) {
    const auto& value = field == MetadataField::voltage ? t.meta.voltage
                                                        : t.meta.pulse_width;
    if (!value) {
      result.excluded.emplace_back(t.meta.run_id,
                                   std::string("missing ") + metadata_field_name(field));
      continue;
    }
    if (t.states.size() < 2) {
      result.excluded.emplace_back(t.meta.run_id, "fewer than two snapshots");
      continue;
    }
    result.rows.push_back(
        {*value, t.meta.run_id, nonbaseline_transition_fraction(t, base_states)});
  }
  std::sort(result.rows.begin(), result.rows.end(),
            [](const CorrelationRow& a, const CorrelationRow& b) {
              if (a.field_value != b.field_value) return a.field_value < b.field_value;
              return a.run_id < b.run_id;
            });
  return result;
}

}  // namespace esdtrace
