#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "recloop/dataset.hpp"
#include "recloop/errors.hpp"
#include "recloop/factorization.hpp"
#include "recloop/rng.hpp"

namespace recloop {

inline std::pair<double, double> mean_and_sample_variance(
    std::span<const double> values) {
  double mean = 0.0;
  for (double v : values) {
    mean += v;
  }
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) {
    ss += (v - mean) * (v - mean);
  }
  return {mean, ss / static_cast<double>(values.size() - 1)};
}

struct WelchResult {
  double t_stat = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// Welch's unequal-variance two-sample t-test, two-tailed. The degrees of
/// freedom follow the Welch-Satterthwaite equation.
inline WelchResult welch_t_test(std::span<const double> a,
                                std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw ArgumentError("welch_t_test: both samples need >= 2 elements");
  }
  auto [mean_a, var_a] = mean_and_sample_variance(a);
  auto [mean_b, var_b] = mean_and_sample_variance(b);
  if (!std::isfinite(var_a) || !std::isfinite(var_b)) {
    throw DataError("welch_t_test: non-finite sample variance");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ga = var_a / na;
  const double gb = var_b / nb;
  if (ga + gb <= 0.0) {
    throw DataError("welch_t_test: degenerate variance (both samples "
                    "constant)");
  }
  WelchResult res;
  res.t_stat = (mean_a - mean_b) / std::sqrt(ga + gb);
  res.df = (ga + gb) * (ga + gb) /
           (ga * ga / (na - 1.0) + gb * gb / (nb - 1.0));
  if (res.t_stat == 0.0) {
    res.p_value = 1.0;
  } else {
    boost::math::students_t dist(res.df);
    res.p_value = 2.0 * boost::math::cdf(dist, -std::abs(res.t_stat));
  }
  return res;
}

/// Outcome of the ranking-assumption check: per sampled user, the mean
/// predicted rating over unrated items from already-seen groups against the
/// mean over items sharing no seen group, pooled across users into two
/// samples and tested with Welch's t.
struct RankingTestReport {
  double mean_seen = 0.0;
  double mean_unseen = 0.0;
  double var_seen = 0.0;
  double var_unseen = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
  std::size_t n_seen = 0;
  std::size_t n_unseen = 0;
  std::size_t repetitions = 1;
  std::size_t resampled_users = 0;
  std::vector<double> seen_user_means;
  std::vector<double> unseen_user_means;
};

namespace detail {

inline RankingTestReport report_from_samples(std::vector<double> seen_means,
                                             std::vector<double> unseen_means,
                                             std::size_t repetitions,
                                             std::size_t resampled) {
  RankingTestReport report;
  WelchResult welch = welch_t_test(seen_means, unseen_means);
  auto [ms, vs] = mean_and_sample_variance(seen_means);
  auto [mu, vu] = mean_and_sample_variance(unseen_means);
  report.mean_seen = ms;
  report.var_seen = vs;
  report.mean_unseen = mu;
  report.var_unseen = vu;
  report.t_stat = welch.t_stat;
  report.p_value = welch.p_value;
  report.n_seen = seen_means.size();
  report.n_unseen = unseen_means.size();
  report.repetitions = repetitions;
  report.resampled_users = resampled;
  report.seen_user_means = std::move(seen_means);
  report.unseen_user_means = std::move(unseen_means);
  return report;
}

}  // namespace detail

/// Samples users whose seen-group set is a strict subset of all groups and
/// compares predicted ratings between their seen-group and unseen-group
/// unrated items. An item counts as "seen group" when it shares at least one
/// group with the user's seen set. Users with an empty side are resampled
/// (and counted in the report). Deterministic given (model, rng state).
inline RankingTestReport ranking_assumption_test(const FactorModel& model,
                                                 const RatingDataset& dataset,
                                                 const GroupMapping& mapping,
                                                 std::size_t sample_users,
                                                 Rng& rng) {
  if (sample_users < 2) {
    throw ArgumentError("ranking_assumption_test: need >= 2 sampled users");
  }
  if (mapping.membership.size() != dataset.num_items) {
    throw ArgumentError("group mapping does not cover the item set");
  }

  std::vector<std::vector<char>> rated(dataset.num_users);
  for (auto& r : rated) {
    r.assign(dataset.num_items, 0);
  }
  for (const auto& obs : dataset.observations) {
    rated[obs.user][obs.item] = 1;
  }

  std::vector<UserId> eligible;
  std::vector<GroupSet> seen_of(dataset.num_users);
  for (UserId u = 0; u < dataset.num_users; ++u) {
    GroupSet seen;
    for (ItemId i = 0; i < dataset.num_items; ++i) {
      if (rated[u][i]) {
        for (GroupId g : mapping.groups_of(i)) {
          seen.insert(g);
        }
      }
    }
    seen_of[u] = std::move(seen);
    if (seen_of[u].size() < mapping.num_groups) {
      eligible.push_back(u);
    }
  }
  if (eligible.size() < sample_users) {
    throw DataError("only " + std::to_string(eligible.size()) +
                    " users have unseen groups; " +
                    std::to_string(sample_users) + " requested");
  }

  shuffle_in_place(rng, eligible);

  std::vector<double> seen_means;
  std::vector<double> unseen_means;
  std::size_t resampled = 0;
  for (UserId u : eligible) {
    if (seen_means.size() == sample_users) {
      break;
    }
    double sum_seen = 0.0;
    double sum_unseen = 0.0;
    std::size_t count_seen = 0;
    std::size_t count_unseen = 0;
    for (ItemId i = 0; i < dataset.num_items; ++i) {
      if (rated[u][i]) {
        continue;
      }
      double score = model.predict(u, i);
      if (mapping.shares_group(i, seen_of[u])) {
        sum_seen += score;
        ++count_seen;
      } else {
        sum_unseen += score;
        ++count_unseen;
      }
    }
    if (count_seen == 0 || count_unseen == 0) {
      ++resampled;
      continue;
    }
    seen_means.push_back(sum_seen / static_cast<double>(count_seen));
    unseen_means.push_back(sum_unseen / static_cast<double>(count_unseen));
  }
  if (seen_means.size() < sample_users) {
    throw DataError("ran out of eligible users after resampling (" +
                    std::to_string(seen_means.size()) + " usable)");
  }

  return detail::report_from_samples(std::move(seen_means),
                                     std::move(unseen_means), 1, resampled);
}

/// Welch test over the union of the per-repetition samples.
inline RankingTestReport pool_reports(
    std::span<const RankingTestReport> reports) {
  if (reports.empty()) {
    throw ArgumentError("pool_reports: no reports");
  }
  std::vector<double> seen_means;
  std::vector<double> unseen_means;
  std::size_t resampled = 0;
  for (const auto& r : reports) {
    seen_means.insert(seen_means.end(), r.seen_user_means.begin(),
                      r.seen_user_means.end());
    unseen_means.insert(unseen_means.end(), r.unseen_user_means.begin(),
                        r.unseen_user_means.end());
    resampled += r.resampled_users;
  }
  return detail::report_from_samples(std::move(seen_means),
                                     std::move(unseen_means), reports.size(),
                                     resampled);
}

}  // namespace recloop
