#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esdtrace/diffstats.hpp"
#include "esdtrace/rng.hpp"
#include "esdtrace/stategraph.hpp"

namespace esdtrace {

struct StateCounts {
  std::uint64_t b = 0;  // occurrences in baseline logs
  std::uint64_t e = 0;  // occurrences in exposed logs
};

// Per-state occurrence tallies over a training partition, with multiplicity.
struct TrainingCounts {
  std::map<StateId, StateCounts> counts;
  std::uint64_t total_b = 0;
  std::uint64_t total_e = 0;
};

inline TrainingCounts build_counts(const CorpusPartition& partition) {
  if (partition.baseline.empty() || partition.esd.empty())
    throw Error(Errc::empty_group, "training needs at least one log per group");
  TrainingCounts tc;
  for (const ExecutionTrace& t : partition.baseline)
    for (StateId s : t.states) {
      ++tc.counts[s].b;
      ++tc.total_b;
    }
  for (const ExecutionTrace& t : partition.esd)
    for (StateId s : t.states) {
      ++tc.counts[s].e;
      ++tc.total_e;
    }
  if (tc.total_b == 0 || tc.total_e == 0)
    throw Error(Errc::empty_group, "a training group has no state occurrences");
  return tc;
}

// The four weighting schemes. All produce a per-state score whose sign says
// which group the state leans toward; they differ in how the delta parameter
// enters, if at all.
enum class WeightVariant { plain, add_delta, scale_before, scale_after };

inline const char* weight_variant_name(WeightVariant v) {
  switch (v) {
    case WeightVariant::plain: return "plain";
    case WeightVariant::add_delta: return "add-delta";
    case WeightVariant::scale_before: return "scale-before";
    case WeightVariant::scale_after: return "scale-after";
  }
  return "?";
}

inline std::optional<WeightVariant> weight_variant_from(std::string_view name) {
  if (name == "plain") return WeightVariant::plain;
  if (name == "add-delta" || name == "add_delta") return WeightVariant::add_delta;
  if (name == "scale-before" || name == "scale_before") return WeightVariant::scale_before;
  if (name == "scale-after" || name == "scale_after") return WeightVariant::scale_after;
  return std::nullopt;
}

struct WeightRow {
  std::uint64_t b = 0;
  std::uint64_t e = 0;
  double w = 0;
};

struct WeightTable {
  WeightVariant variant = WeightVariant::plain;
  double delta = 0;
  std::uint64_t total_b = 0;
  std::uint64_t total_e = 0;
  std::map<StateId, WeightRow> rows;
};

inline void validate_delta(WeightVariant variant, double delta) {
  switch (variant) {
    case WeightVariant::plain:
      return;  // not used
    case WeightVariant::add_delta:
      if (!(delta >= 0))
        throw Error(Errc::invalid_delta, "add-delta needs delta >= 0");
      return;
    case WeightVariant::scale_before:
    case WeightVariant::scale_after:
      if (!(delta > 0))
        throw Error(Errc::invalid_delta,
                    std::string(weight_variant_name(variant)) + " needs delta > 0");
      return;
  }
}

// Normalized per-state weight: w = (wb*b + we*e) / (|wb*b| + |we*e|) with the
// group weights wb, we set by the variant. The totals compensate for group
// size imbalance; states absent from one group land exactly on -1 or +1.
inline WeightTable build_weights(const TrainingCounts& counts, WeightVariant variant,
                                 double delta = 0) {
  validate_delta(variant, delta);
  const double b_total = static_cast<double>(counts.total_b);
  const double e_total = static_cast<double>(counts.total_e);

  double wb = -e_total;
  double we = b_total;
  double post_scale = 1.0;
  switch (variant) {
    case WeightVariant::plain:
      break;
    case WeightVariant::add_delta:
      wb = -(e_total + delta);
      we = b_total + delta;
      break;
    case WeightVariant::scale_before:
      wb = -e_total * delta;
      we = b_total * delta;
      break;
    case WeightVariant::scale_after:
      post_scale = delta;
      break;
  }

  WeightTable table;
  table.variant = variant;
  table.delta = variant == WeightVariant::plain ? 0.0 : delta;
  table.total_b = counts.total_b;
  table.total_e = counts.total_e;
  for (const auto& [state, c] : counts.counts) {
    const double b = static_cast<double>(c.b);
    const double e = static_cast<double>(c.e);
    const double num = wb * b + we * e;
    const double den = std::abs(wb * b) + std::abs(we * e);
    table.rows.emplace(state, WeightRow{c.b, c.e, (num / den) * post_scale});
  }
  return table;
}

enum class Label { esd, baseline, indeterminate };

inline const char* label_name(Label l) {
  switch (l) {
    case Label::esd: return "esd";
    case Label::baseline: return "baseline";
    case Label::indeterminate: return "indeterminate";
  }
  return "?";
}

struct ClassificationResult {
  std::string run_id;
  double score = 0;  // C_L
  Label label = Label::indeterminate;
  double unseen_state_mass = 0;  // fraction of the log in states the table never saw
};

// Scores a log as sum(w_i * s_i) / |L| over the states it visits. States the
// training never saw contribute weight zero but are accounted as unseen mass
// so callers can gate on it. A positive score reads as exposed, negative as
// baseline; an exact zero stays indeterminate.
inline ClassificationResult classify(const WeightTable& table,
                                     const ExecutionTrace& trace) {
  if (trace.states.empty())
    throw Error(Errc::empty_trace, "cannot classify an empty trace: " + trace.meta.run_id);

  std::map<StateId, std::uint64_t> occurrences;
  for (StateId s : trace.states) ++occurrences[s];

  const double length = static_cast<double>(trace.states.size());
  double acc = 0;
  std::uint64_t unseen = 0;
  for (const auto& [state, count] : occurrences) {
    auto it = table.rows.find(state);
    if (it == table.rows.end()) {
      unseen += count;
      continue;
    }
    acc += it->second.w * static_cast<double>(count);
  }

  ClassificationResult result;
  result.run_id = trace.meta.run_id;
  result.score = acc / length;
  result.unseen_state_mass = static_cast<double>(unseen) / length;
  result.label = result.score > 0   ? Label::esd
                 : result.score < 0 ? Label::baseline
                                    : Label::indeterminate;
  return result;
}

// Deviation of the sorted unique weights from the straight line through -1
// and 1, as root mean square. A single unique weight is measured against 0.
inline double straightline_deviation(std::span<const double> sorted_unique) {
  const std::size_t m = sorted_unique.size();
  if (m == 0) return 0;
  if (m == 1) return std::abs(sorted_unique[0]);
  double sq = 0;
  for (std::size_t j = 0; j < m; ++j) {
    double ref = -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(m - 1);
    double d = sorted_unique[j] - ref;
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(m));
}

// Lower median of the sorted unique weights, in absolute value.
inline double middle_weight_abs(std::span<const double> sorted_unique) {
  if (sorted_unique.empty()) return 0;
  return std::abs(sorted_unique[(sorted_unique.size() - 1) / 2]);
}

inline std::vector<double> sorted_unique_weights(const WeightTable& table) {
  std::vector<double> ws;
  ws.reserve(table.rows.size());
  for (const auto& [state, row] : table.rows) ws.push_back(row.w);
  std::sort(ws.begin(), ws.end());
  ws.erase(std::unique(ws.begin(), ws.end()), ws.end());
  return ws;
}

struct EvalProtocol {
  enum class Kind { leave_one_out, split };
  Kind kind = Kind::leave_one_out;
  double fraction = 0.5;    // training share per group (split only)
  std::uint64_t seed = 0;   // split shuffle seed

  // Accepts "loo" or "split:<fraction>:<seed>".
  static EvalProtocol parse(std::string_view text) {
    EvalProtocol p;
    if (text == "loo") return p;
    if (text.rfind("split:", 0) == 0) {
      std::string rest(text.substr(6));
      std::size_t colon = rest.find(':');
      if (colon != std::string::npos) {
        try {
          p.kind = Kind::split;
          p.fraction = std::stod(rest.substr(0, colon));
          p.seed = std::stoull(rest.substr(colon + 1));
        } catch (const std::exception&) {
          throw Error(Errc::invalid_protocol, "cannot parse protocol: " + std::string(text));
        }
        if (!(p.fraction > 0 && p.fraction < 1))
          throw Error(Errc::invalid_protocol, "split fraction must be in (0, 1)");
        return p;
      }
    }
    throw Error(Errc::invalid_protocol,
                "protocol must be `loo` or `split:<fraction>:<seed>`: " +
                    std::string(text));
  }
};

struct EvalMetrics {
  double accuracy = 0;
  double straightline_deviation = 0;
  double middle_weight_abs = 0;
  std::vector<double> weight_list;  // sorted unique weights of the full table
  std::size_t evaluated_logs = 0;
};

namespace detail {

struct Fold {
  CorpusPartition train;
  std::vector<const ExecutionTrace*> held_out;
};

inline std::vector<Fold> make_folds(const CorpusPartition& partition,
                                    const EvalProtocol& protocol) {
  if (partition.baseline.size() < 2 || partition.esd.size() < 2)
    throw Error(Errc::insufficient_logs,
                "evaluation needs at least two logs per group");
  std::vector<Fold> folds;
  if (protocol.kind == EvalProtocol::Kind::leave_one_out) {
    auto add_folds = [&](bool from_baseline) {
      const auto& group = from_baseline ? partition.baseline : partition.esd;
      for (std::size_t i = 0; i < group.size(); ++i) {
        Fold fold;
        fold.train = partition;
        auto& train_group = from_baseline ? fold.train.baseline : fold.train.esd;
        train_group.erase(train_group.begin() + static_cast<std::ptrdiff_t>(i));
        fold.held_out.push_back(&group[i]);
        folds.push_back(std::move(fold));
      }
    };
    add_folds(true);
    add_folds(false);
    return folds;
  }

  // Seeded stratified split: shuffle each group, put the first fraction into
  // training, classify the rest. Both sides keep at least one log per group.
  Fold fold;
  auto split_group = [&](const std::vector<ExecutionTrace>& group,
                         std::vector<ExecutionTrace>& train, std::uint64_t salt) {
    std::vector<std::size_t> order(group.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    SplitMix64 rng(protocol.seed ^ salt);
    rng.shuffle(order);
    auto n_train = static_cast<std::size_t>(
        std::llround(protocol.fraction * static_cast<double>(group.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, group.size() - 1);
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (i < n_train) train.push_back(group[order[i]]);
      else fold.held_out.push_back(&group[order[i]]);
    }
  };
  split_group(partition.baseline, fold.train.baseline, 0x62617365ULL);
  split_group(partition.esd, fold.train.esd, 0x65736400ULL);
  std::vector<Fold> folds;
  folds.push_back(std::move(fold));
  return folds;
}

}  // namespace detail

// Held-out accuracy under the chosen protocol plus shape metrics of the
// weight distribution trained on the full partition. Indeterminate labels
// count against accuracy.
inline EvalMetrics evaluate(const CorpusPartition& partition, WeightVariant variant,
                            double delta, const EvalProtocol& protocol) {
  validate_delta(variant, delta);

  EvalMetrics metrics;
  WeightTable full = build_weights(build_counts(partition), variant, delta);
  metrics.weight_list = sorted_unique_weights(full);
  metrics.straightline_deviation = straightline_deviation(metrics.weight_list);
  metrics.middle_weight_abs = middle_weight_abs(metrics.weight_list);

  std::size_t correct = 0, total = 0;
  for (const auto& fold : detail::make_folds(partition, protocol)) {
    WeightTable table = build_weights(build_counts(fold.train), variant, delta);
    for (const ExecutionTrace* held : fold.held_out) {
      Label truth = held->meta.condition == Condition::esd ? Label::esd : Label::baseline;
      if (classify(table, *held).label == truth) ++correct;
      ++total;
    }
  }
  metrics.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0;
  metrics.evaluated_logs = total;
  return metrics;
}

struct SweepRow {
  double delta = 0;
  double accuracy = 0;
  double straightline_deviation = 0;
  double middle_weight_abs = 0;
};

inline std::vector<SweepRow> sweep_delta(const CorpusPartition& partition,
                                         WeightVariant variant,
                                         std::span<const double> deltas,
                                         const EvalProtocol& protocol) {
  std::vector<SweepRow> rows;
  rows.reserve(deltas.size());
  for (double delta : deltas) {
    EvalMetrics m = evaluate(partition, variant, delta, protocol);
    rows.push_back({delta, m.accuracy, m.straightline_deviation, m.middle_weight_abs});
  }
  return rows;
}

}  // namespace esdtrace
