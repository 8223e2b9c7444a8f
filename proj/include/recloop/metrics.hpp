#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "recloop/dataset.hpp"
#include "recloop/errors.hpp"

namespace recloop {

/// |rel \ seen|: relevant groups the user has never seen.
inline std::size_t blind_spot(const GroupSet& seen, const GroupSet& rel) {
  std::size_t count = 0;
  for (GroupId g : rel) {
    if (!seen.count(g)) {
      ++count;
    }
  }
  return count;
}

/// |seen \ rel|: seen groups that are not relevant (the error function e(t)).
inline std::size_t error_e(const GroupSet& seen, const GroupSet& rel,
                           std::size_t num_groups) {
  for (GroupId g : seen) {
    if (g >= num_groups) {
      throw ArgumentError("group id " + std::to_string(g) +
                          " outside the group universe");
    }
  }
  for (GroupId g : rel) {
    if (g >= num_groups) {
      throw ArgumentError("group id " + std::to_string(g) +
                          " outside the group universe");
    }
  }
  std::size_t count = 0;
  for (GroupId g : seen) {
    if (!rel.count(g)) {
      ++count;
    }
  }
  return count;
}

/// First differences and running means of a seen-count series. The input
/// must be non-decreasing (the seen set is a filtration); a decreasing value
/// signals a corrupted trace.
inline std::pair<std::vector<double>, std::vector<double>> discovery_series(
    std::span<const double> seen_counts) {
  std::vector<double> deltas;
  std::vector<double> running;
  if (seen_counts.size() <= 1) {
    return {deltas, running};
  }
  deltas.reserve(seen_counts.size() - 1);
  running.reserve(seen_counts.size() - 1);
  double sum = 0.0;
  for (std::size_t t = 1; t < seen_counts.size(); ++t) {
    if (seen_counts[t] < seen_counts[t - 1]) {
      throw DataError("seen-count series decreases at step " +
                      std::to_string(t) + "; the trace violates the "
                      "filtration invariant");
    }
    double d = seen_counts[t] - seen_counts[t - 1];
    deltas.push_back(d);
    sum += d;
    running.push_back(sum / static_cast<double>(t));
  }
  return {deltas, running};
}

/// Blind-spot differences b[t-1] - b[t] and the running mean of their
/// absolute values.
inline std::pair<std::vector<double>, std::vector<double>> blind_series(
    std::span<const double> blind_counts) {
  std::vector<double> deltas;
  std::vector<double> running;
  if (blind_counts.size() <= 1) {
    return {deltas, running};
  }
  deltas.reserve(blind_counts.size() - 1);
  running.reserve(blind_counts.size() - 1);
  double abs_sum = 0.0;
  for (std::size_t t = 1; t < blind_counts.size(); ++t) {
    double d = blind_counts[t - 1] - blind_counts[t];
    deltas.push_back(d);
    abs_sum += std::abs(d);
    running.push_back(abs_sum / static_cast<double>(t));
  }
  return {deltas, running};
}

struct BoundParams {
  double delta = 0.05;
  std::size_t rec_len = 10;
  std::size_t n = 1;
};

/// Azuma-Hoeffding discovery bound: ln(1/delta) * rec_len^2 / (2n). With
/// probability 1 - delta the average discovery over n iterations stays at or
/// below this value.
inline double azuma_bound(const BoundParams& params) {
  if (!(params.delta > 0.0 && params.delta <= 1.0)) {
    throw ArgumentError("delta must lie in (0, 1]");
  }
  if (params.n < 1) {
    throw ArgumentError("n must be >= 1");
  }
  if (params.rec_len < 1) {
    throw ArgumentError("rec_len must be >= 1");
  }
  double rec = static_cast<double>(params.rec_len);
  return std::log(1.0 / params.delta) * rec * rec /
         (2.0 * static_cast<double>(params.n));
}

}  // namespace recloop
