#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esdtrace/errors.hpp"
#include "esdtrace/schema.hpp"

namespace esdtrace {

enum class Condition { baseline, esd };
enum class FieldType { electric, magnetic };  // E / H probes
enum class ParseMode { strict, lenient };

inline const char* condition_name(Condition c) {
  return c == Condition::baseline ? "baseline" : "esd";
}
inline const char* field_type_name(FieldType f) {
  return f == FieldType::electric ? "E" : "H";
}

// Per-run description from the metadata sidecar. Only run_id and condition
// are mandatory; the injection parameters exist only for exposed runs.
struct RunMetadata {
  std::string run_id;
  Condition condition = Condition::baseline;
  std::optional<std::string> probe;
  std::optional<FieldType> field_type;
  std::optional<std::string> orientation;
  std::optional<double> voltage;      // volts, > 0
  std::optional<double> pulse_width;  // seconds, > 0

  bool operator==(const RunMetadata&) const = default;
};

// One register dump taken at a driver function call.
struct Snapshot {
  std::string function_name;
  std::map<std::string, std::uint32_t> values;  // register name -> value
  std::size_t ordinal = 0;

  bool operator==(const Snapshot&) const = default;
};

struct ParseWarning {
  int line = 0;  // 1-based source line, 0 when not line-bound
  std::string code;
  std::string message;
};

namespace warn {
inline constexpr const char* duplicate_register = "duplicate_register";
inline constexpr const char* unknown_register = "unknown_register";
inline constexpr const char* carried_forward = "carried_forward";
inline constexpr const char* truncated_snapshot = "truncated_snapshot";
inline constexpr const char* malformed_line = "malformed_line";
inline constexpr const char* unknown_key = "unknown_key";
inline constexpr const char* duplicate_key = "duplicate_key";
inline constexpr const char* empty_log = "empty_log";
}  // namespace warn

// A parsed log: the snapshot sequence plus whatever the parser had to note
// along the way. Immutable once built; safe to share across threads.
struct RawLog {
  RegisterSchema schema;
  std::vector<Snapshot> snapshots;
  RunMetadata metadata;
  std::vector<ParseWarning> warnings;

  // Content identity for round-trip checks: snapshots only, warnings and
  // metadata are carriers, not content.
  bool same_content(const RawLog& other) const {
    return snapshots == other.snapshots;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Strips dmesg-style decoration: an optional "<N>" loglevel token and an
// optional "[seconds.fraction]" timestamp. Timestamps are not state identity.
inline std::string_view strip_kernel_prefix(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '<') {
    std::size_t close = s.find('>');
    if (close != std::string_view::npos && close >= 2) {
      bool digits = true;
      for (std::size_t i = 1; i < close; ++i)
        digits = digits && std::isdigit(static_cast<unsigned char>(s[i]));
      if (digits) s = trim(s.substr(close + 1));
    }
  }
  if (!s.empty() && s.front() == '[') {
    std::size_t close = s.find(']');
    if (close != std::string_view::npos) {
      std::string_view inner = trim(s.substr(1, close - 1));
      bool stamp = !inner.empty();
      bool dot_seen = false;
      for (char c : inner) {
        if (c == '.' && !dot_seen) { dot_seen = true; continue; }
        if (!std::isdigit(static_cast<unsigned char>(c))) { stamp = false; break; }
      }
      if (stamp) s = trim(s.substr(close + 1));
    }
  }
  return s;
}

inline bool parse_hex_value(std::string_view text, std::uint64_t& out) {
  if (text.size() < 3) return false;
  if (text[0] != '0' || (text[1] != 'x' && text[1] != 'X')) return false;
  std::string_view digits = text.substr(2);
  if (digits.empty() || digits.size() > 16) return false;
  auto res = std::from_chars(digits.data(), digits.data() + digits.size(), out, 16);
  return res.ec == std::errc{} && res.ptr == digits.data() + digits.size();
}

}  // namespace detail

// Parses instrumented-driver log text. A snapshot block is
//   function: <name>
//   <Register>: 0x<hex>   (one line per register)
//   Done.
// Strict mode rejects anything off-contract; lenient mode drops partial
// blocks and carries missing registers forward from the previous snapshot,
// recording a warning for every repair. The first materialized snapshot must
// always be complete.
inline RawLog parse_log(std::string_view text, const RegisterSchema& schema,
                        ParseMode mode, const std::string& source_name = {}) {
  schema.validate();
  if (schema.names.empty())
    throw Error(Errc::bad_document, "empty register schema", source_name);

  RawLog log;
  log.schema = schema;

  bool in_block = false;
  int block_line = 0;
  std::string function_name;
  std::map<std::string, std::uint32_t> values;
  std::vector<ParseWarning> block_warnings;

  auto warn_or_throw = [&](Errc code, int line, const std::string& msg,
                           const char* warn_code, bool block_local) {
    if (mode == ParseMode::strict) throw Error(code, msg, source_name, line);
    auto& sink = block_local ? block_warnings : log.warnings;
    sink.push_back({line, warn_code, msg});
  };

  auto drop_block = [&](int line, const std::string& why) {
    block_warnings.clear();
    log.warnings.push_back({line, warn::truncated_snapshot, why});
    in_block = false;
    values.clear();
  };

  auto close_block = [&](int line) {
    // Completeness against the schema; lenient mode repairs via carry-forward.
    for (const auto& name : schema.names) {
      if (values.count(name)) continue;
      if (mode == ParseMode::strict)
        throw Error(Errc::missing_register,
                    "snapshot is missing register " + name, source_name, line);
      if (log.snapshots.empty())
        throw Error(Errc::incomplete_first_snapshot,
                    "first snapshot is missing register " + name +
                        " and has no predecessor to carry forward from",
                    source_name, line);
      values[name] = log.snapshots.back().values.at(name);
      block_warnings.push_back(
          {line, warn::carried_forward,
           "carried " + name + " forward from previous snapshot"});
    }
    Snapshot snap;
    snap.function_name = function_name;
    snap.values = std::move(values);
    snap.ordinal = log.snapshots.size();
    log.snapshots.push_back(std::move(snap));
    for (auto& w : block_warnings) log.warnings.push_back(std::move(w));
    block_warnings.clear();
    values.clear();
    in_block = false;
  };

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view raw_line =
        text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    if (eol == std::string_view::npos && raw_line.empty()) break;
    ++line_no;
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;

    std::string_view line = detail::strip_kernel_prefix(raw_line);
    if (line.empty()) continue;

    if (line == "Done.") {
      if (!in_block) {
        warn_or_throw(Errc::malformed_line, line_no,
                      "Done. outside of a snapshot block", warn::malformed_line,
                      false);
        continue;
      }
      close_block(line_no);
      continue;
    }

    if (line.rfind("function:", 0) == 0) {
      if (in_block) {
        if (mode == ParseMode::strict)
          throw Error(Errc::truncated_snapshot,
                      "new block starts before Done. of the block at line " +
                          std::to_string(block_line),
                      source_name, line_no);
        drop_block(line_no, "block truncated by a new function line; dropped");
      }
      std::string name(detail::trim(line.substr(9)));
      if (name.empty()) {
        warn_or_throw(Errc::malformed_line, line_no, "function line without a name",
                      warn::malformed_line, false);
        continue;
      }
      in_block = true;
      block_line = line_no;
      function_name = std::move(name);
      continue;
    }

    std::size_t colon = line.find(':');
    std::uint64_t value = 0;
    if (colon != std::string_view::npos && colon > 0 &&
        detail::parse_hex_value(detail::trim(line.substr(colon + 1)), value)) {
      std::string name(detail::trim(line.substr(0, colon)));
      if (value > 0xffffffffULL)
        throw Error(Errc::value_overflow,
                    name + " value does not fit in 32 bits", source_name, line_no);
      if (!in_block) {
        warn_or_throw(Errc::malformed_line, line_no,
                      "register line outside of a snapshot block",
                      warn::malformed_line, false);
        continue;
      }
      if (!schema.contains(name)) {
        block_warnings.push_back({line_no, warn::unknown_register,
                                  "register " + name + " is not in the schema; ignored"});
        continue;
      }
      auto [it, inserted] = values.emplace(name, static_cast<std::uint32_t>(value));
      if (!inserted) {
        block_warnings.push_back({line_no, warn::duplicate_register,
                                  "duplicate line for " + name + "; last value kept"});
        it->second = static_cast<std::uint32_t>(value);
      }
      continue;
    }

    warn_or_throw(Errc::malformed_line, line_no,
                  "unparseable line: " + std::string(line), warn::malformed_line,
                  in_block);
  }

  if (in_block) {
    if (mode == ParseMode::strict)
      throw Error(Errc::truncated_snapshot,
                  "log ends before Done. of the block at line " +
                      std::to_string(block_line),
                  source_name, line_no);
    drop_block(line_no, "log truncated mid-block; partial snapshot dropped");
  }
  return log;
}

// Canonical text: registers in schema order, lowercase unpadded hex, no
// timestamps, no duplicates. parse(serialize(x)) reproduces x's snapshots and
// serialize is a fixed point from the second application on.
inline std::string serialize_log(const RawLog& log) {
  std::string out;
  char buf[32];
  for (const auto& snap : log.snapshots) {
    out += "function: ";
    out += snap.function_name;
    out += '\n';
    for (const auto& name : log.schema.names) {
      auto it = snap.values.find(name);
      if (it == snap.values.end())
        throw Error(Errc::missing_register,
                    "snapshot lacks register " + name + "; cannot serialize");
      std::snprintf(buf, sizeof buf, "0x%x", it->second);
      out += name;
      out += ": ";
      out += buf;
      out += '\n';
    }
    out += "Done.\n";
  }
  return out;
}

struct MetadataResult {
  RunMetadata meta;
  std::vector<ParseWarning> warnings;
};

// Sidecar format: one `key: value` per line, `#` comments allowed.
// Recognized keys: run_id, condition, probe, field_type, orientation,
// voltage, pulse_width. Unknown keys warn, duplicates keep the last value.
inline MetadataResult parse_metadata(std::string_view text,
                                     const std::string& source_name = {}) {
  MetadataResult result;
  std::map<std::string, std::pair<std::string, int>> kv;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view raw =
        text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    ++line_no;
    pos = eol == std::string_view::npos ? text.size() : eol + 1;

    std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::size_t colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0)
      throw Error(Errc::bad_document, "metadata line is not `key: value`",
                  source_name, line_no);
    std::string key(detail::trim(line.substr(0, colon)));
    std::string value(detail::trim(line.substr(colon + 1)));
    auto [it, inserted] = kv.emplace(key, std::make_pair(value, line_no));
    if (!inserted) {
      result.warnings.push_back({line_no, warn::duplicate_key,
                                 "duplicate key " + key + "; last value kept"});
      it->second = {value, line_no};
    }
  }

  auto take = [&](const char* key) -> std::optional<std::pair<std::string, int>> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    auto v = it->second;
    kv.erase(it);
    return v;
  };
  auto parse_positive = [&](const std::pair<std::string, int>& v, Errc errc,
                            const char* what) {
    double d = 0;
    auto res = std::from_chars(v.first.data(), v.first.data() + v.first.size(), d);
    if (res.ec != std::errc{} || res.ptr != v.first.data() + v.first.size() || !(d > 0))
      throw Error(errc, std::string(what) + " must be a positive number, got `" +
                            v.first + "`",
                  source_name, v.second);
    return d;
  };

  if (auto v = take("run_id")) result.meta.run_id = v->first;
  if (result.meta.run_id.empty())
    throw Error(Errc::missing_run_id, "metadata document lacks run_id", source_name);

  if (auto v = take("condition")) {
    if (v->first == "baseline") result.meta.condition = Condition::baseline;
    else if (v->first == "esd") result.meta.condition = Condition::esd;
    else
      throw Error(Errc::missing_condition,
                  "condition must be `baseline` or `esd`, got `" + v->first + "`",
                  source_name, v->second);
  } else {
    throw Error(Errc::missing_condition, "metadata document lacks condition",
                source_name);
  }

  if (auto v = take("probe")) result.meta.probe = v->first;
  if (auto v = take("orientation")) result.meta.orientation = v->first;
  if (auto v = take("field_type")) {
    if (v->first == "E") result.meta.field_type = FieldType::electric;
    else if (v->first == "H") result.meta.field_type = FieldType::magnetic;
    else
      throw Error(Errc::bad_document, "field_type must be E or H, got `" + v->first + "`",
                  source_name, v->second);
  }
  if (auto v = take("voltage"))
    result.meta.voltage = parse_positive(*v, Errc::invalid_voltage, "voltage");
  if (auto v = take("pulse_width"))
    result.meta.pulse_width =
        parse_positive(*v, Errc::invalid_pulse_width, "pulse_width");

  for (const auto& [key, v] : kv)
    result.warnings.push_back({v.second, warn::unknown_key, "unknown key " + key});
  return result;
}

inline std::string serialize_metadata(const RunMetadata& meta) {
  std::string out;
  auto line = [&](const char* key, const std::string& value) {
    out += key;
    out += ": ";
    out += value;
    out += '\n';
  };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  line("run_id", meta.run_id);
  line("condition", condition_name(meta.condition));
  if (meta.probe) line("probe", *meta.probe);
  if (meta.field_type) line("field_type", field_type_name(*meta.field_type));
  if (meta.orientation) line("orientation", *meta.orientation);
  if (meta.voltage) line("voltage", num(*meta.voltage));
  if (meta.pulse_width) line("pulse_width", num(*meta.pulse_width));
  return out;
}

struct Finding {
  bool is_error = false;
  std::string code;
  std::string run_id;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool ok() const {
    for (const auto& f : findings)
      if (f.is_error) return false;
    return true;
  }
};

// Cross-log sanity checks before any analysis: one schema per corpus, unique
// run ids, and a note for logs that carry no snapshots at all.
inline ValidationReport validate_corpus(std::span<const RawLog> logs) {
  ValidationReport report;
  std::map<std::string, std::size_t> run_ids;
  std::string fingerprint;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const RawLog& log = logs[i];
    const std::string& id = log.metadata.run_id;
    if (i == 0) {
      fingerprint = log.schema.fingerprint();
    } else if (log.schema.fingerprint() != fingerprint) {
      report.findings.push_back({true, errc_name(Errc::schema_mismatch), id,
                                 "log was parsed against a different schema"});
    }
    auto [it, inserted] = run_ids.emplace(id, i);
    if (!inserted)
      report.findings.push_back({true, errc_name(Errc::duplicate_run_id), id,
                                 "run_id also used by log #" + std::to_string(it->second)});
    if (log.snapshots.empty())
      report.findings.push_back({false, warn::empty_log, id, "log has no snapshots"});
  }
  return report;
}

}  // namespace esdtrace
