#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "recloop/metrics.hpp"
#include "recloop/report.hpp"
#include "recloop/rng.hpp"
#include "recloop/trace.hpp"

using namespace recloop;

TEST_CASE("blind_spot is the unseen-relevant count", "[metrics]") {
  CHECK(blind_spot({0, 1, 2}, {0, 1, 2}) == 0);
  CHECK(blind_spot({}, {3, 4, 5}) == 3);
  CHECK(blind_spot({0, 1}, {1, 2, 3}) == 2);
}

TEST_CASE("blind_spot partition identity", "[metrics]") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    GroupSet seen;
    GroupSet rel;
    for (GroupId g = 0; g < 12; ++g) {
      if (uniform_index(rng, 2)) {
        seen.insert(g);
      }
      if (uniform_index(rng, 2)) {
        rel.insert(g);
      }
    }
    std::size_t overlap = 0;
    for (GroupId g : rel) {
      overlap += seen.count(g);
    }
    CHECK(blind_spot(seen, rel) + overlap == rel.size());
  }
}

TEST_CASE("error_e is the seen-irrelevant count", "[metrics]") {
  CHECK(error_e({0, 1}, {0, 1, 2}, 5) == 0);   // seen inside rel
  CHECK(error_e({0, 1, 2}, {}, 5) == 3);       // nothing relevant
  CHECK(error_e({0, 1, 2}, {2}, 5) == 2);
  CHECK_THROWS_AS(error_e({7}, {}, 5), ArgumentError);
  CHECK_THROWS_AS(error_e({}, {9}, 5), ArgumentError);
}

TEST_CASE("discovery_series differentiates and averages", "[metrics]") {
  auto [ds, avg] = discovery_series(std::vector<double>{3, 5, 5, 8});
  CHECK(ds == std::vector<double>{2, 0, 3});
  REQUIRE(avg.size() == 3);
  CHECK(avg[0] == Catch::Approx(2.0));
  CHECK(avg[1] == Catch::Approx(1.0));
  CHECK(avg[2] == Catch::Approx(5.0 / 3.0));

  auto [flat, flat_avg] = discovery_series(std::vector<double>{4, 4, 4});
  CHECK(flat == std::vector<double>{0, 0});
  CHECK(flat_avg == std::vector<double>{0, 0});

  auto [single, single_avg] = discovery_series(std::vector<double>{4});
  CHECK(single.empty());
  CHECK(single_avg.empty());

  CHECK_THROWS_AS(discovery_series(std::vector<double>{3, 2}), DataError);
}

TEST_CASE("blind_series uses the decrease convention", "[metrics]") {
  auto [db, avg] = blind_series(std::vector<double>{10, 7, 7, 6});
  CHECK(db == std::vector<double>{3, 0, 1});
  REQUIRE(avg.size() == 3);
  CHECK(avg[0] == Catch::Approx(3.0));
  CHECK(avg[1] == Catch::Approx(1.5));
  CHECK(avg[2] == Catch::Approx(4.0 / 3.0));

  auto [flat, flat_avg] = blind_series(std::vector<double>{2, 2, 2});
  CHECK(flat == std::vector<double>{0, 0});

  // once the blind spot hits zero it stays there
  auto [zeroed, zeroed_avg] = blind_series(std::vector<double>{3, 0, 0, 0});
  CHECK(zeroed == std::vector<double>{3, 0, 0});
}

TEST_CASE("azuma_bound matches the closed form", "[metrics]") {
  // independent high-precision evaluation: ln(20) * 100 / 200
  CHECK(azuma_bound({0.05, 10, 100}) ==
        Catch::Approx(1.4978661367769954).margin(1e-9));
  // delta = 1 collapses the bound
  CHECK(azuma_bound({1.0, 10, 100}) == 0.0);
  CHECK(azuma_bound({1.0, 3, 7}) == 0.0);
  // doubling n halves the bound exactly
  CHECK(azuma_bound({0.05, 10, 100}) ==
        Catch::Approx(2.0 * azuma_bound({0.05, 10, 200})));

  CHECK_THROWS_AS(azuma_bound({0.0, 10, 100}), ArgumentError);
  CHECK_THROWS_AS(azuma_bound({1.5, 10, 100}), ArgumentError);
  CHECK_THROWS_AS(azuma_bound({0.05, 10, 0}), ArgumentError);
}

TEST_CASE("azuma_bound monotonicity", "[metrics]") {
  Rng rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    double delta = uniform_real(rng, 0.01, 0.99);
    std::size_t rec = 1 + uniform_index(rng, 40);
    std::size_t n = 1 + uniform_index(rng, 400);
    double base = azuma_bound({delta, rec, n});
    CHECK(azuma_bound({delta, rec, n + 1}) < base);
    CHECK(azuma_bound({delta + 0.005, rec, n}) < base);
    CHECK(azuma_bound({delta, rec + 1, n}) > base);
  }
}

namespace {

SimulationTrace two_run_trace() {
  SimulationTrace trace;
  trace.config_echo = {{"rec_len", "10"}};
  // two runs, three iterations; numbers hand-picked to keep the corollary
  // premise (e non-increasing: here e is constant)
  for (std::size_t run = 1; run <= 2; ++run) {
    double seen0 = 3.0;
    double blind0 = 5.0;
    double ds_sum = 0.0;
    double db_sum = 0.0;
    double seen = seen0;
    double blind = blind0;
    for (std::size_t t = 1; t <= 3; ++t) {
      TraceRow r;
      r.run = run;
      r.iteration = t;
      double ds = run == 1 ? 1.0 : 0.5;
      seen += ds;
      blind -= ds;  // every discovery is relevant: e stays constant
      r.seen_count = seen;
      r.blind_spot = blind;
      r.delta_s = ds;
      r.delta_b = ds;
      ds_sum += ds;
      db_sum += ds;
      r.avg_discovery = ds_sum / static_cast<double>(t);
      r.avg_blind_decrease = db_sum / static_cast<double>(t);
      r.error_e = 2.0;
      r.bound_d05 = azuma_bound({0.05, 10, t});
      r.bound_d01 = azuma_bound({0.01, 10, t});
      trace.rows.push_back(r);
    }
  }
  return trace;
}

}  // namespace

TEST_CASE("trace CSV round-trips", "[metrics]") {
  SimulationTrace trace = two_run_trace();
  std::ostringstream out;
  write_trace_csv(trace, out);
  std::istringstream in(out.str());
  SimulationTrace again = read_trace_csv(in);
  CHECK(again.rows == trace.rows);
  CHECK(again.config_echo == trace.config_echo);
  CHECK_FALSE(again.truncated);

  // avg_discovery is recomputable from the delta_s column
  for (std::size_t run = 1; run <= 2; ++run) {
    std::vector<double> seen_counts;
    double s0 = 0.0;
    std::vector<const TraceRow*> rows;
    for (const auto& r : again.rows) {
      if (r.run == run) {
        rows.push_back(&r);
      }
    }
    s0 = rows.front()->seen_count - rows.front()->delta_s;
    seen_counts.push_back(s0);
    for (const TraceRow* r : rows) {
      seen_counts.push_back(r->seen_count);
    }
    auto [ds, avg] = discovery_series(seen_counts);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i]->delta_s == Catch::Approx(ds[i]).margin(1e-12));
      CHECK(rows[i]->avg_discovery == Catch::Approx(avg[i]).margin(1e-12));
    }
  }
}

TEST_CASE("trace schema violations are named", "[metrics]") {
  std::istringstream bad_header(
      "run,iteration,seen_count,blind_spot,delta_s,delta_b,avg_discovery,"
      "avg_blind_decrease,error_x,bound_d05,bound_d01\n");
  try {
    read_trace_csv(bad_header);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string what = e.what();
    CHECK(what.find("column 9") != std::string::npos);
    CHECK(what.find("error_e") != std::string::npos);
  }

  std::istringstream empty("");
  CHECK_THROWS_AS(read_trace_csv(empty), DataError);
}

TEST_CASE("truncation marker survives the round trip", "[metrics]") {
  SimulationTrace trace = two_run_trace();
  trace.truncated = true;
  std::ostringstream out;
  write_trace_csv(trace, out);
  CHECK(out.str().find("# truncated = true\n") != std::string::npos);
  std::istringstream in(out.str());
  CHECK(read_trace_csv(in).truncated);
}

TEST_CASE("aggregate_traces reduces runs per iteration", "[metrics]") {
  SimulationTrace trace = two_run_trace();
  std::vector<SimulationTrace> traces = {trace};
  std::vector<AggregateRow> rows = aggregate_traces(traces);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].run_count == 2);
  CHECK(rows[0].delta_s.mean == Catch::Approx(0.75));
  CHECK(rows[2].iteration == 3);
  // single input with both runs identical in the bound columns
  CHECK(rows[0].bound_d05 == Catch::Approx(azuma_bound({0.05, 10, 1})));

  // two identical traces double the run count and zero nothing out
  std::vector<SimulationTrace> two = {trace, trace};
  std::vector<AggregateRow> rows2 = aggregate_traces(two);
  CHECK(rows2[0].run_count == 4);
  CHECK(rows2[0].delta_s.mean == Catch::Approx(0.75));
}

TEST_CASE("identical runs give zero confidence half-width", "[metrics]") {
  SimulationTrace trace = two_run_trace();
  // make run 2 a copy of run 1
  for (auto& r : trace.rows) {
    if (r.run == 2) {
      for (const auto& other : trace.rows) {
        if (other.run == 1 && other.iteration == r.iteration) {
          TraceRow copy = other;
          copy.run = 2;
          r = copy;
        }
      }
    }
  }
  std::vector<SimulationTrace> traces = {trace};
  for (const auto& row : aggregate_traces(traces)) {
    CHECK(row.seen_count.ci_half == Catch::Approx(0.0).margin(1e-12));
    CHECK(row.delta_s.ci_half == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("bound violations are counted from the bound", "[metrics]") {
  SimulationTrace trace = two_run_trace();
  std::vector<SimulationTrace> traces = {trace};
  // bounds at delta 0.05 are far above these tiny discoveries
  CHECK(bound_violation_fraction(traces, 0.05, 1) == 0.0);
  // a delta of 1 zeroes the bound, so every positive discovery violates it
  CHECK(bound_violation_fraction(traces, 1.0, 1) == 1.0);
}

TEST_CASE("corollary check accepts constant-error runs", "[metrics]") {
  SimulationTrace trace = two_run_trace();
  auto results = check_corollary2(trace);
  REQUIRE(results.size() == 2);
  for (const auto& res : results) {
    CHECK(res.premise_holds);
    CHECK(res.inequality_holds);
  }
}

TEST_CASE("corollary check reports increasing error as a premise violation",
          "[metrics]") {
  SimulationTrace trace = two_run_trace();
  // make e(t) grow on run 2
  for (auto& r : trace.rows) {
    if (r.run == 2) {
      r.error_e = 2.0 + static_cast<double>(r.iteration);
    }
  }
  auto results = check_corollary2(trace);
  REQUIRE(results.size() == 2);
  CHECK(results[0].premise_holds);
  CHECK_FALSE(results[1].premise_holds);
}
