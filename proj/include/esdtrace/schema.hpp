#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "esdtrace/errors.hpp"
#include "esdtrace/rng.hpp"

namespace esdtrace {

// Ordered list of monitored registers. The order defines the layout of the
// state tuple; address_set marks registers whose values are reload-dependent
// memory addresses and are abstracted before states are compared.
struct RegisterSchema {
  std::vector<std::string> names;
  std::set<std::string> address_set;

  std::size_t size() const { return names.size(); }

  bool contains(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
  }

  // Index of a register in the tuple layout; npos when absent.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t index_of(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? npos : static_cast<std::size_t>(it - names.begin());
  }

  bool is_address(const std::string& name) const {
    return address_set.count(name) != 0;
  }

  void validate() const {
    std::set<std::string> seen;
    for (const auto& n : names) {
      if (n.empty())
        throw Error(Errc::bad_document, "schema contains an empty register name");
      if (!seen.insert(n).second)
        throw Error(Errc::bad_document, "duplicate register name in schema: " + n);
    }
    for (const auto& a : address_set) {
      if (!seen.count(a))
        throw Error(Errc::bad_document,
                    "address register not in schema name list: " + a);
    }
  }

  // Stable identity used to detect mixing artifacts built on different schemas.
  std::string fingerprint() const {
    std::string joined;
    for (const auto& n : names) {
      joined += n;
      joined += is_address(n) ? "*;" : ";";
    }
    std::uint64_t h = fnv1a64(joined.data(), joined.size());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
  }

  bool operator==(const RegisterSchema&) const = default;
};

// Default schema: the OHCI operational registers as dumped by the
// instrumented host controller driver, in dump order.
inline RegisterSchema ohci_schema() {
  RegisterSchema s;
  s.names = {
      "HcControl",
      "HcCommandStatus",
      "HcInterruptStatus",
      "HcInterruptEnable",
      "HcInterruptDisable",
      "HcHCCA",
      "HcPeriodCurrentED",
      "HcControlHeadED",
      "HcControlCurrentED",
      "HcBulkHeadED",
      "HcBulkCurrentED",
      "HcDoneHead",
      "HcFmInterval",
      "HcFmRemaining",
      "HcFmNumber",
      "HcPeriodicStart",
      "HcLSThreshold",
      "HcRhDescriptorA",
      "HcRhDescriptorB",
      "HcRhStatus",
      "HcRhPortStatus[0]",
      "HcRhPortStatus[1]",
  };
  // Registers holding ED/HCCA pointers and free-running frame counters; their
  // raw values change with every driver reload.
  s.address_set = {
      "HcPeriodCurrentED", "HcBulkCurrentED",    "HcFmRemaining",
      "HcHCCA",            "HcControlHeadED",    "HcControlCurrentED",
      "HcBulkHeadED",      "HcFmNumber",         "HcDoneHead",
  };
  return s;
}

}  // namespace esdtrace
