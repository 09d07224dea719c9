#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "esdtrace/logmodel.hpp"
#include "esdtrace/rng.hpp"
#include "esdtrace/schema.hpp"

namespace esdtrace {

// A small Markov register machine standing in for a driver under normal
// operation: a handful of recurring register states, a strongly connected
// transition structure, and a driver function name on every transition.
struct BaselineMachine {
  RegisterSchema schema;
  std::vector<std::vector<std::uint32_t>> states;  // [state][register index]
  std::vector<std::vector<double>> transition;     // row-stochastic
  std::vector<std::vector<std::string>> labels;    // function per edge, "" when P=0
  std::size_t initial = 0;
  std::string initial_function;

  std::size_t n_states() const { return states.size(); }
};

namespace detail {

inline const std::vector<std::string>& driver_function_pool() {
  static const std::vector<std::string> pool = {
      "ohci_irq",          "ohci_urb_enqueue", "ohci_urb_dequeue",
      "ohci_hub_control",  "ohci_hub_status_data", "ohci_endpoint_disable",
      "ohci_work",         "ohci_mem_flush",
  };
  return pool;
}

}  // namespace detail

// Deterministic machine from a seed. Every register column takes a distinct
// value in every state, so any transition between distinct states rewrites
// the whole tuple; the transition structure is a ring (strong connectivity)
// plus self-loops and a couple of extra edges per state, with probabilities
// bounded well away from zero.
inline BaselineMachine make_machine(std::uint64_t seed, std::size_t n_states,
                                    const RegisterSchema& schema) {
  if (n_states < 1)
    throw Error(Errc::bad_document, "machine needs at least one state");
  schema.validate();

  SplitMix64 rng(seed);
  BaselineMachine m;
  m.schema = schema;
  m.states.assign(n_states, std::vector<std::uint32_t>(schema.names.size(), 0));

  for (std::size_t r = 0; r < schema.names.size(); ++r) {
    if (schema.is_address(schema.names[r])) {
      // Pointer-like: one base per register, one page per state.
      auto base = static_cast<std::uint32_t>((rng.next() & 0x0ffffff0ULL) | 0x30000000ULL);
      for (std::size_t i = 0; i < n_states; ++i)
        m.states[i][r] = base + static_cast<std::uint32_t>(i) * 0x1000u;
    } else {
      std::set<std::uint32_t> used;
      for (std::size_t i = 0; i < n_states; ++i) {
        std::uint32_t v;
        do {
          v = static_cast<std::uint32_t>(rng.next());
        } while (!used.insert(v).second);
        m.states[i][r] = v;
      }
    }
  }

  m.transition.assign(n_states, std::vector<double>(n_states, 0.0));
  m.labels.assign(n_states, std::vector<std::string>(n_states));
  const auto& pool = detail::driver_function_pool();
  for (std::size_t i = 0; i < n_states; ++i) {
    auto& row = m.transition[i];
    row[i] += 1.5;                    // states recur under normal operation
    row[(i + 1) % n_states] += 1.0;   // ring keeps the machine strongly connected
    for (int extra = 0; extra < 2; ++extra) {
      auto j = static_cast<std::size_t>(rng.index(n_states));
      row[j] += 0.5 + 0.5 * rng.unit();
    }
    double sum = 0;
    for (double p : row) sum += p;
    for (double& p : row) p /= sum;
    for (std::size_t j = 0; j < n_states; ++j)
      if (row[j] > 0) m.labels[i][j] = pool[rng.index(pool.size())];
  }
  m.initial_function = pool[rng.index(pool.size())];
  return m;
}

// Transient register corruption model. Each emitted snapshot is perturbed
// with probability p by flipping k distinct bits. Flip targets come from the
// fault pool when one is set (modeling a fixed set of susceptible lines, so
// corrupted states recur across runs); otherwise any bit of any eligible
// register can flip. An empty eligible list means all non-address registers.
struct PerturbationModel {
  double p = 0;
  unsigned k = 1;
  std::vector<std::string> eligible;
  std::vector<std::pair<std::size_t, unsigned>> fault_pool;  // (register index, bit)
  bool sticky = false;  // corruption persists until the chain rewrites the register

  void validate(const RegisterSchema& schema) const {
    if (!(p >= 0 && p <= 1))
      throw Error(Errc::bad_document, "perturbation probability must be in [0, 1]");
    if (k < 1) throw Error(Errc::bad_document, "flips per event must be >= 1");
    for (const auto& name : eligible)
      if (!schema.contains(name))
        throw Error(Errc::unknown_register, "eligible register not in schema: " + name);
    for (const auto& [reg, bit] : fault_pool) {
      if (reg >= schema.names.size())
        throw Error(Errc::bad_document, "fault pool register index out of range");
      if (bit >= 32) throw Error(Errc::bad_document, "fault pool bit out of range");
    }
    if (!fault_pool.empty() && k > fault_pool.size())
      throw Error(Errc::bad_document, "flips per event exceed the fault pool size");
  }
};

namespace detail {

inline std::vector<std::size_t> eligible_indices(const PerturbationModel& model,
                                                 const RegisterSchema& schema) {
  std::vector<std::size_t> out;
  if (model.eligible.empty()) {
    for (std::size_t i = 0; i < schema.names.size(); ++i)
      if (!schema.is_address(schema.names[i])) out.push_back(i);
  } else {
    for (const auto& name : model.eligible) out.push_back(schema.index_of(name));
  }
  if (out.empty())
    throw Error(Errc::bad_document, "no eligible registers to perturb");
  return out;
}

}  // namespace detail

// Draws pool_size distinct (register, bit) fault lines from the eligible set.
inline std::vector<std::pair<std::size_t, unsigned>> make_fault_pool(
    const RegisterSchema& schema, const PerturbationModel& model,
    std::size_t pool_size, std::uint64_t seed) {
  auto eligible = detail::eligible_indices(model, schema);
  if (pool_size > eligible.size() * 32)
    throw Error(Errc::bad_document, "fault pool larger than the eligible bit space");
  SplitMix64 rng(seed);
  std::set<std::pair<std::size_t, unsigned>> pool;
  while (pool.size() < pool_size) {
    std::size_t reg = eligible[rng.index(eligible.size())];
    auto bit = static_cast<unsigned>(rng.index(32));
    pool.emplace(reg, bit);
  }
  return {pool.begin(), pool.end()};
}

struct GeneratedLog {
  RunMetadata meta;
  std::string text;                  // exact parser line format
  std::vector<bool> perturbed;       // per snapshot: emitted != machine state
  std::uint64_t seed = 0;
};

// Walks the chain for `length` snapshots, corrupting emitted values per the
// model while the chain itself keeps running undisturbed. Output is a pure
// function of the arguments.
inline GeneratedLog generate_log(const BaselineMachine& machine, std::size_t length,
                                 const PerturbationModel& model, std::uint64_t seed,
                                 RunMetadata meta) {
  model.validate(machine.schema);
  const auto eligible = detail::eligible_indices(model, machine.schema);

  GeneratedLog out;
  out.meta = std::move(meta);
  out.seed = seed;
  out.perturbed.reserve(length);

  SplitMix64 rng(seed);
  std::size_t current = machine.initial;
  std::size_t previous = current;
  std::string function = machine.initial_function;
  std::map<std::size_t, std::uint32_t> overlay;  // sticky corruption per register

  char buf[32];
  for (std::size_t step = 0; step < length; ++step) {
    if (step > 0) {
      double u = rng.unit();
      double cum = 0;
      std::size_t next = machine.n_states() - 1;
      for (std::size_t j = 0; j < machine.n_states(); ++j) {
        cum += machine.transition[current][j];
        if (u < cum) {
          next = j;
          break;
        }
      }
      previous = current;
      function = machine.labels[current][next];
      current = next;
    }

    std::vector<std::uint32_t> emitted = machine.states[current];
    if (model.sticky) {
      for (auto it = overlay.begin(); it != overlay.end();) {
        bool rewritten = step > 0 &&
                         machine.states[previous][it->first] != machine.states[current][it->first];
        if (rewritten) {
          it = overlay.erase(it);
        } else {
          emitted[it->first] = it->second;
          ++it;
        }
      }
    }

    if (model.p > 0 && rng.unit() < model.p) {
      std::set<std::pair<std::size_t, unsigned>> targets;
      while (targets.size() < model.k) {
        if (!model.fault_pool.empty()) {
          targets.insert(model.fault_pool[rng.index(model.fault_pool.size())]);
        } else {
          std::size_t reg = eligible[rng.index(eligible.size())];
          targets.emplace(reg, static_cast<unsigned>(rng.index(32)));
        }
      }
      for (const auto& [reg, bit] : targets) {
        emitted[reg] ^= (1u << bit);
        if (model.sticky) overlay[reg] = emitted[reg];
      }
    }

    out.perturbed.push_back(emitted != machine.states[current]);

    out.text += "function: ";
    out.text += function;
    out.text += '\n';
    for (std::size_t r = 0; r < machine.schema.names.size(); ++r) {
      std::snprintf(buf, sizeof buf, "0x%x", emitted[r]);
      out.text += machine.schema.names[r];
      out.text += ": ";
      out.text += buf;
      out.text += '\n';
    }
    out.text += "Done.\n";
  }
  return out;
}

struct CorpusParams {
  std::size_t n_baseline = 20;
  std::size_t n_esd = 20;
  std::size_t length = 200;
  PerturbationModel model;      // applied to the exposed group only
  std::size_t pool_size = 4;    // fault lines drawn when the model has no pool; 0 = unrestricted
  std::uint64_t seed = 0;
};

struct GeneratedCorpus {
  std::vector<GeneratedLog> runs;
  PerturbationModel resolved_model;  // pool materialized, as used for exposed runs
  CorpusParams params;
};

namespace detail {

inline std::string run_name(const char* prefix, std::size_t index, std::size_t total) {
  int width = total >= 100 ? 3 : 2;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, index + 1);
  return buf;
}

// Injection settings mirroring the bench setup the corpus stands in for:
// an E-field probe capped at lower voltage and shorter pulses, H-field
// probes that go higher and carry an orientation.
inline void synth_injection_metadata(RunMetadata& meta, SplitMix64& rng) {
  switch (rng.index(3)) {
    case 0:
      meta.probe = "EZ-3";
      meta.field_type = FieldType::electric;
      meta.voltage = 500.0 + 250.0 * static_cast<double>(rng.index(21));   // <= 5500
      meta.pulse_width = static_cast<double>(10 + 5 * rng.index(4)) / 100.0;  // <= 0.25
      break;
    case 1:
      meta.probe = "HX-5";
      [[fallthrough]];
    default:
      if (!meta.probe) meta.probe = "HX-1T2";
      meta.field_type = FieldType::magnetic;
      meta.orientation = rng.index(2) == 0 ? "parallel" : "perpendicular";
      meta.voltage = 500.0 + 250.0 * static_cast<double>(rng.index(31));   // <= 8000
      meta.pulse_width = static_cast<double>(10 + 5 * rng.index(11)) / 100.0;  // <= 0.60
      break;
  }
}

}  // namespace detail

// Seeded corpus: n_baseline clean walks plus n_esd perturbed ones, with
// populated metadata sidecars. Everything derives from params.seed; the
// fault pool (when used) is drawn once so exposed runs share fault lines.
inline GeneratedCorpus generate_corpus(const BaselineMachine& machine,
                                       const CorpusParams& params) {
  if (params.n_baseline < 1 || params.n_esd < 1)
    throw Error(Errc::bad_document, "corpus needs at least one log per group");
  params.model.validate(machine.schema);

  GeneratedCorpus corpus;
  corpus.params = params;
  corpus.resolved_model = params.model;

  SplitMix64 rng(params.seed);
  if (params.model.p > 0 && params.model.fault_pool.empty() && params.pool_size > 0)
    corpus.resolved_model.fault_pool =
        make_fault_pool(machine.schema, params.model, params.pool_size, rng.next());

  PerturbationModel clean;  // p = 0
  for (std::size_t i = 0; i < params.n_baseline; ++i) {
    RunMetadata meta;
    meta.run_id = detail::run_name("b", i, params.n_baseline);
    meta.condition = Condition::baseline;
    corpus.runs.push_back(
        generate_log(machine, params.length, clean, rng.next(), std::move(meta)));
  }
  for (std::size_t i = 0; i < params.n_esd; ++i) {
    RunMetadata meta;
    meta.run_id = detail::run_name("e", i, params.n_esd);
    meta.condition = Condition::esd;
    detail::synth_injection_metadata(meta, rng);
    corpus.runs.push_back(generate_log(machine, params.length, corpus.resolved_model,
                                       rng.next(), std::move(meta)));
  }
  return corpus;
}

}  // namespace esdtrace
