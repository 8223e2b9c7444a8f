#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "recloop/metrics.hpp"
#include "recloop/text.hpp"
#include "recloop/trace.hpp"

namespace recloop {

struct MeanCi {
  double mean = 0.0;
  double ci_half = 0.0;  // 95% half-width over runs
};

struct AggregateRow {
  std::size_t iteration = 0;
  std::size_t run_count = 0;
  MeanCi seen_count, blind_spot, delta_s, delta_b, avg_discovery,
      avg_blind_decrease, error_e;
  double bound_d05 = 0.0;
  double bound_d01 = 0.0;
};

namespace detail {

inline MeanCi mean_ci(std::span<const double> values) {
  MeanCi out;
  const std::size_t n = values.size();
  for (double v : values) {
    out.mean += v;
  }
  out.mean /= static_cast<double>(n);
  if (n < 2) {
    return out;
  }
  double ss = 0.0;
  for (double v : values) {
    ss += (v - out.mean) * (v - out.mean);
  }
  double sd = std::sqrt(ss / static_cast<double>(n - 1));
  boost::math::students_t dist(static_cast<double>(n - 1));
  double tq = boost::math::quantile(dist, 0.975);
  out.ci_half = tq * sd / std::sqrt(static_cast<double>(n));
  return out;
}

}  // namespace detail

/// Pools the (run, iteration) rows of one or more traces and reduces them to
/// per-iteration cross-run means with 95% confidence half-widths. All traces
/// must share the schema, rec_len and iteration range.
inline std::vector<AggregateRow> aggregate_traces(
    std::span<const SimulationTrace> traces) {
  if (traces.empty()) {
    throw ArgumentError("aggregate_traces: no traces");
  }
  auto rec_len = traces.front().echo_value("rec_len");
  for (const auto& t : traces) {
    if (t.echo_value("rec_len") != rec_len) {
      throw DataError("traces disagree on config key 'rec_len'");
    }
  }

  std::map<std::size_t, std::vector<const TraceRow*>> by_iteration;
  for (const auto& trace : traces) {
    for (const auto& row : trace.rows) {
      by_iteration[row.iteration].push_back(&row);
    }
  }
  if (by_iteration.empty()) {
    throw DataError("no data rows to aggregate");
  }
  const std::size_t expected = by_iteration.begin()->second.size();
  std::vector<AggregateRow> out;
  out.reserve(by_iteration.size());
  std::vector<double> scratch;
  for (const auto& [iteration, rows] : by_iteration) {
    if (rows.size() != expected) {
      throw DataError("iteration " + std::to_string(iteration) +
                      " appears in " + std::to_string(rows.size()) +
                      " runs but others appear in " +
                      std::to_string(expected));
    }
    AggregateRow agg;
    agg.iteration = iteration;
    agg.run_count = rows.size();
    auto reduce = [&](double TraceRow::* member) {
      scratch.clear();
      for (const TraceRow* r : rows) {
        scratch.push_back(r->*member);
      }
      return detail::mean_ci(scratch);
    };
    agg.seen_count = reduce(&TraceRow::seen_count);
    agg.blind_spot = reduce(&TraceRow::blind_spot);
    agg.delta_s = reduce(&TraceRow::delta_s);
    agg.delta_b = reduce(&TraceRow::delta_b);
    agg.avg_discovery = reduce(&TraceRow::avg_discovery);
    agg.avg_blind_decrease = reduce(&TraceRow::avg_blind_decrease);
    agg.error_e = reduce(&TraceRow::error_e);
    agg.bound_d05 = rows.front()->bound_d05;
    agg.bound_d01 = rows.front()->bound_d01;
    out.push_back(agg);
  }
  return out;
}

/// Fraction of (run, iteration) points with avg_discovery above the bound,
/// over iterations >= first_iteration.
inline double bound_violation_fraction(std::span<const SimulationTrace> traces,
                                       double delta,
                                       std::size_t first_iteration) {
  std::size_t total = 0;
  std::size_t violations = 0;
  for (const auto& trace : traces) {
    auto rec_len_echo = trace.echo_value("rec_len");
    if (!rec_len_echo) {
      throw DataError("trace lacks a rec_len config echo");
    }
    std::size_t rec_len = parse_uint(*rec_len_echo);
    for (const auto& row : trace.rows) {
      if (row.iteration < first_iteration) {
        continue;
      }
      ++total;
      double bound = azuma_bound({delta, rec_len, row.iteration});
      if (row.avg_discovery > bound + 1e-12) {
        ++violations;
      }
    }
  }
  if (total == 0) {
    throw ArgumentError("no rows at or after iteration " +
                        std::to_string(first_iteration));
  }
  return static_cast<double>(violations) / static_cast<double>(total);
}

struct Corollary2Result {
  std::size_t run = 0;
  bool premise_holds = false;   // e(t) non-increasing on this run
  bool inequality_holds = false;  // running mean |dB| <= avg_discovery + (e0-e(n))/n
  std::size_t first_violation = 0;  // iteration of first inequality breach
};

/// Per-run check of the blind-spot corollary. e(0) is reconstructed from the
/// first row via e(0) = e(1) - dS(1) + dB(1). Runs where e(t) increases
/// violate the corollary's decreasing-error premise and are reported as
/// skipped rather than checked.
inline std::vector<Corollary2Result> check_corollary2(
    const SimulationTrace& trace) {
  std::map<std::size_t, std::vector<const TraceRow*>> by_run;
  for (const auto& row : trace.rows) {
    by_run[row.run].push_back(&row);
  }
  std::vector<Corollary2Result> results;
  for (auto& [run, rows] : by_run) {
    std::sort(rows.begin(), rows.end(),
              [](const TraceRow* a, const TraceRow* b) {
                return a->iteration < b->iteration;
              });
    Corollary2Result res;
    res.run = run;
    const TraceRow* first = rows.front();
    double e0 = first->error_e - first->delta_s + first->delta_b;

    res.premise_holds = true;
    double prev_e = e0;
    for (const TraceRow* row : rows) {
      if (row->error_e > prev_e + 1e-9) {
        res.premise_holds = false;
        break;
      }
      prev_e = row->error_e;
    }
    if (!res.premise_holds) {
      results.push_back(res);
      continue;
    }

    res.inequality_holds = true;
    for (const TraceRow* row : rows) {
      double n = static_cast<double>(row->iteration);
      double rhs = row->avg_discovery + (e0 - row->error_e) / n;
      if (row->avg_blind_decrease > rhs + 1e-9) {
        res.inequality_holds = false;
        res.first_violation = row->iteration;
        break;
      }
    }
    results.push_back(res);
  }
  return results;
}

inline void write_aggregate_csv(std::span<const AggregateRow> rows,
                                std::ostream& out) {
  out << "iteration,runs";
  for (const char* name :
       {"seen_count", "blind_spot", "delta_s", "delta_b", "avg_discovery",
        "avg_blind_decrease", "error_e"}) {
    out << ',' << name << ',' << name << "_ci95";
  }
  out << ",bound_d05,bound_d01\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.run_count;
    for (const MeanCi* m :
         {&r.seen_count, &r.blind_spot, &r.delta_s, &r.delta_b,
          &r.avg_discovery, &r.avg_blind_decrease, &r.error_e}) {
      out << ',' << format_double(m->mean) << ','
          << format_double(m->ci_half);
    }
    out << ',' << format_double(r.bound_d05) << ','
        << format_double(r.bound_d01) << '\n';
  }
}

inline void write_summary(std::span<const SimulationTrace> traces,
                          std::span<const AggregateRow> rows,
                          std::span<const double> deltas, std::ostream& out) {
  const AggregateRow& last = rows.back();
  const std::size_t quarter_len = std::max<std::size_t>(rows.size() / 4, 1);
  const std::size_t final_quarter = rows[rows.size() - quarter_len].iteration;
  out << "iterations: " << rows.size() << ", runs per iteration: "
      << last.run_count << "\n";
  out << "final iteration " << last.iteration << ": mean seen groups "
      << format_double(last.seen_count.mean) << " (+/- "
      << format_double(last.seen_count.ci_half) << "), mean blind spot "
      << format_double(last.blind_spot.mean) << " (+/- "
      << format_double(last.blind_spot.ci_half) << ")\n";
  out << "final mean avg discovery: "
      << format_double(last.avg_discovery.mean) << "\n";
  for (double d : deltas) {
    double frac = bound_violation_fraction(traces, d, final_quarter);
    out << "bound violation fraction (delta = " << format_double(d)
        << ", iterations >= " << final_quarter
        << "): " << format_double(frac) << "\n";
  }
  std::size_t premise_ok = 0;
  std::size_t inequality_ok = 0;
  std::size_t total_runs = 0;
  for (const auto& trace : traces) {
    for (const auto& res : check_corollary2(trace)) {
      ++total_runs;
      if (res.premise_holds) {
        ++premise_ok;
        if (res.inequality_holds) {
          ++inequality_ok;
        }
      }
    }
  }
  out << "blind-spot corollary: premise held on " << premise_ok << "/"
      << total_runs << " runs, inequality held on " << inequality_ok << "/"
      << premise_ok << " of those\n";
}

}  // namespace recloop
