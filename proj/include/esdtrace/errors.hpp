#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace esdtrace {

// Every failure the toolkit can report. Warnings are not errors; they are
// collected as records on the artifact that produced them.
enum class Errc {
  malformed_line,
  truncated_snapshot,
  value_overflow,
  incomplete_first_snapshot,
  missing_register,
  duplicate_run_id,
  schema_mismatch,
  missing_run_id,
  missing_condition,
  invalid_voltage,
  invalid_pulse_width,
  mode_mismatch,
  node_not_in_graph,
  edge_not_in_graph,
  empty_group,
  unknown_register,
  no_transitions,
  missing_field,
  invalid_delta,
  empty_trace,
  insufficient_logs,
  invalid_protocol,
  state_id_collision,
  bad_document,
  io_error,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::malformed_line: return "malformed_line";
    case Errc::truncated_snapshot: return "truncated_snapshot";
    case Errc::value_overflow: return "value_overflow";
    case Errc::incomplete_first_snapshot: return "incomplete_first_snapshot";
    case Errc::missing_register: return "missing_register";
    case Errc::duplicate_run_id: return "duplicate_run_id";
    case Errc::schema_mismatch: return "schema_mismatch";
    case Errc::missing_run_id: return "missing_run_id";
    case Errc::missing_condition: return "missing_condition";
    case Errc::invalid_voltage: return "invalid_voltage";
    case Errc::invalid_pulse_width: return "invalid_pulse_width";
    case Errc::mode_mismatch: return "mode_mismatch";
    case Errc::node_not_in_graph: return "node_not_in_graph";
    case Errc::edge_not_in_graph: return "edge_not_in_graph";
    case Errc::empty_group: return "empty_group";
    case Errc::unknown_register: return "unknown_register";
    case Errc::no_transitions: return "no_transitions";
    case Errc::missing_field: return "missing_field";
    case Errc::invalid_delta: return "invalid_delta";
    case Errc::empty_trace: return "empty_trace";
    case Errc::insufficient_logs: return "insufficient_logs";
    case Errc::invalid_protocol: return "invalid_protocol";
    case Errc::state_id_collision: return "state_id_collision";
    case Errc::bad_document: return "bad_document";
    case Errc::io_error: return "io_error";
  }
  return "unknown";
}

// Data errors carry optional source context (file, 1-based line).
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message, std::string file = {}, int line = 0)
      : std::runtime_error(format(code, message, file, line)),
        code_(code),
        file_(std::move(file)),
        line_(line) {}

  Errc code() const noexcept { return code_; }
  const std::string& file() const noexcept { return file_; }
  int line() const noexcept { return line_; }

 private:
  static std::string format(Errc code, const std::string& message,
                            const std::string& file, int line) {
    std::string out;
    if (!file.empty()) {
      out += file;
      if (line > 0) out += ":" + std::to_string(line);
      out += ": ";
    } else if (line > 0) {
      out += "line " + std::to_string(line) + ": ";
    }
    out += message;
    out += " [";
    out += errc_name(code);
    out += "]";
    return out;
  }

  Errc code_;
  std::string file_;
  int line_;
};

}  // namespace esdtrace
