#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "recloop/dataset.hpp"
#include "recloop/errors.hpp"
#include "recloop/text.hpp"

namespace recloop {

/// One user-aggregated line of a simulation trace. All metric columns are
/// arithmetic means over users; `avg_*` columns are running means over
/// iterations within the run.
struct TraceRow {
  std::size_t run = 0;        // 1-based
  std::size_t iteration = 0;  // 1-based
  double seen_count = 0.0;
  double blind_spot = 0.0;
  double delta_s = 0.0;
  double delta_b = 0.0;
  double avg_discovery = 0.0;
  double avg_blind_decrease = 0.0;
  double error_e = 0.0;
  double bound_d05 = 0.0;
  double bound_d01 = 0.0;

  bool operator==(const TraceRow&) const = default;
};

inline constexpr std::array<std::string_view, 11> kTraceColumns = {
    "run",           "iteration",    "seen_count",
    "blind_spot",    "delta_s",      "delta_b",
    "avg_discovery", "avg_blind_decrease", "error_e",
    "bound_d05",     "bound_d01"};

/// Per-user state kept alongside the aggregate rows so invariant checks can
/// look at individual trajectories. Not serialized to CSV.
struct RunDetail {
  std::vector<GroupSet> relevant;                    // [user]
  std::vector<std::vector<GroupSet>> seen_sets;      // [user][0..iterations]
  std::vector<std::vector<std::uint32_t>> rec_counts;  // [user][iteration-1]
  std::vector<std::size_t> exhausted_at;             // 0 = never exhausted
};

struct SimulationTrace {
  std::vector<std::pair<std::string, std::string>> config_echo;
  std::vector<TraceRow> rows;
  bool truncated = false;
  std::vector<RunDetail> run_details;  // present when detail collection is on

  std::optional<std::string> echo_value(std::string_view key) const {
    for (const auto& [k, v] : config_echo) {
      if (k == key) {
        return v;
      }
    }
    return std::nullopt;
  }
};

inline void write_trace_csv(const SimulationTrace& trace, std::ostream& out) {
  for (const auto& [key, value] : trace.config_echo) {
    out << "# " << key << " = " << value << '\n';
  }
  for (std::size_t c = 0; c < kTraceColumns.size(); ++c) {
    out << kTraceColumns[c] << (c + 1 < kTraceColumns.size() ? "," : "\n");
  }
  for (const auto& r : trace.rows) {
    out << r.run << ',' << r.iteration << ',' << format_double(r.seen_count)
        << ',' << format_double(r.blind_spot) << ','
        << format_double(r.delta_s) << ',' << format_double(r.delta_b) << ','
        << format_double(r.avg_discovery) << ','
        << format_double(r.avg_blind_decrease) << ','
        << format_double(r.error_e) << ',' << format_double(r.bound_d05)
        << ',' << format_double(r.bound_d01) << '\n';
  }
  if (trace.truncated) {
    out << "# truncated = true\n";
  }
}

inline SimulationTrace read_trace_csv(std::istream& in) {
  SimulationTrace trace;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = trim(line);
    if (text.empty()) {
      continue;
    }
    if (text.front() == '#') {
      std::string_view body = trim(text.substr(1));
      std::size_t eq = body.find('=');
      if (eq != std::string_view::npos) {
        std::string key(trim(body.substr(0, eq)));
        std::string value(trim(body.substr(eq + 1)));
        if (key == "truncated") {
          trace.truncated = (value == "true");
        } else if (!header_seen) {
          trace.config_echo.emplace_back(std::move(key), std::move(value));
        }
      }
      continue;
    }
    auto fields = split(text, ",");
    if (!header_seen) {
      if (fields.size() != kTraceColumns.size()) {
        throw DataError("trace schema mismatch: expected " +
                        std::to_string(kTraceColumns.size()) +
                        " columns, got " + std::to_string(fields.size()));
      }
      for (std::size_t c = 0; c < fields.size(); ++c) {
        if (trim(fields[c]) != kTraceColumns[c]) {
          throw DataError("trace schema mismatch at column " +
                          std::to_string(c + 1) + ": expected '" +
                          std::string(kTraceColumns[c]) + "', got '" +
                          std::string(trim(fields[c])) + "'");
        }
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != kTraceColumns.size()) {
      throw ParseError("expected " + std::to_string(kTraceColumns.size()) +
                           " fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    TraceRow r;
    r.run = parse_uint(trim(fields[0]), line_no);
    r.iteration = parse_uint(trim(fields[1]), line_no);
    r.seen_count = parse_double(trim(fields[2]), line_no);
    r.blind_spot = parse_double(trim(fields[3]), line_no);
    r.delta_s = parse_double(trim(fields[4]), line_no);
    r.delta_b = parse_double(trim(fields[5]), line_no);
    r.avg_discovery = parse_double(trim(fields[6]), line_no);
    r.avg_blind_decrease = parse_double(trim(fields[7]), line_no);
    r.error_e = parse_double(trim(fields[8]), line_no);
    r.bound_d05 = parse_double(trim(fields[9]), line_no);
    r.bound_d01 = parse_double(trim(fields[10]), line_no);
    trace.rows.push_back(r);
  }
  if (!header_seen) {
    throw DataError("trace file has no header row");
  }
  return trace;
}

}  // namespace recloop
