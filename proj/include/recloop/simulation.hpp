#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "recloop/completion.hpp"
#include "recloop/dataset.hpp"
#include "recloop/factorization.hpp"
#include "recloop/metrics.hpp"
#include "recloop/policies.hpp"
#include "recloop/rng.hpp"
#include "recloop/trace.hpp"

namespace recloop {

enum class FeedbackKind { perfect, rank_dependent };

/// perfect: every recommended item comes back rated.
/// rank_dependent: the item at 1-based rank k is rated with probability
/// theta^(k-1), independently; ratings are always the ground-truth values.
struct FeedbackModel {
  FeedbackKind kind = FeedbackKind::perfect;
  double theta = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(theta > 0.0 && theta <= 1.0)) {
      throw ArgumentError("theta must lie in (0, 1]");
    }
  }
};

enum class RetrainMode { from_scratch, warm_start };

/// What enters the seen-group set each iteration: the groups of everything
/// that was displayed (the user saw the whole list), or only the groups of
/// the items that actually came back rated.
enum class SeenUpdate { recommended, rated_only };

struct SimulationConfig {
  std::size_t iterations = 30;
  std::size_t runs = 10;
  PolicyConfig policy;
  FeedbackModel feedback;
  int relevance_threshold = 4;
  RetrainMode retrain = RetrainMode::from_scratch;
  SeenUpdate seen_update = SeenUpdate::recommended;
  Hyperparams hyperparams;
  std::uint64_t master_seed = 0;
  bool collect_user_detail = true;

  void validate() const {
    if (iterations < 1) {
      throw ArgumentError("iterations must be >= 1");
    }
    if (runs < 1) {
      throw ArgumentError("runs must be >= 1");
    }
    if (relevance_threshold < 1 || relevance_threshold > 5) {
      throw ArgumentError("relevance_threshold must lie in {1..5}");
    }
    policy.validate();
    feedback.validate();
    hyperparams.validate();
  }
};

struct UserState {
  std::vector<char> rated;  // item id -> already rated
  std::size_t rated_count = 0;
  GroupSet seen;        // S_t
  GroupSet relevant;    // Rel, frozen at t = 0
  std::size_t exhausted_at = 0;  // iteration the pool emptied, 0 = never

  bool has_rated(ItemId item) const { return rated[item] != 0; }
};

struct LoopState {
  std::vector<UserState> users;
  std::size_t iteration = 0;  // t
};

/// A group is relevant to a user iff the ground truth rates at least one of
/// its items at or above the threshold.
inline GroupSet relevant_groups(const GroundTruth& truth,
                                const GroupMapping& mapping, UserId user,
                                int threshold) {
  if (threshold < 1 || threshold > 5) {
    throw ArgumentError("relevance threshold must lie in {1..5}");
  }
  GroupSet rel;
  for (ItemId i = 0; i < truth.num_items; ++i) {
    if (truth.at(user, i) >= threshold) {
      for (GroupId g : mapping.groups_of(i)) {
        rel.insert(g);
      }
    }
  }
  return rel;
}

inline std::vector<std::pair<ItemId, double>> perfect_feedback(
    std::span<const ItemId> recs, const GroundTruth& truth, UserId user) {
  std::vector<std::pair<ItemId, double>> rated;
  rated.reserve(recs.size());
  for (ItemId item : recs) {
    rated.emplace_back(item, static_cast<double>(truth.at(user, item)));
  }
  return rated;
}

inline std::vector<std::pair<ItemId, double>> rank_dependent_feedback(
    std::span<const ItemId> recs, const GroundTruth& truth, UserId user,
    double theta, Rng& rng) {
  if (!(theta > 0.0 && theta <= 1.0)) {
    throw ArgumentError("theta must lie in (0, 1]");
  }
  std::vector<std::pair<ItemId, double>> rated;
  double p = 1.0;  // theta^(rank-1); rank 1 is always rated
  for (ItemId item : recs) {
    if (uniform_real(rng, 0.0, 1.0) < p) {
      rated.emplace_back(item, static_cast<double>(truth.at(user, item)));
    }
    p *= theta;
  }
  return rated;
}

/// Builds the t = 0 state: rated items come from the observed dataset (the
/// loop does not start from an empty system), seen groups are derived from
/// them, and Rel is frozen from the ground truth.
inline LoopState init_loop_state(const RatingDataset& dataset,
                                 const GroupMapping& mapping,
                                 const GroundTruth& truth, int threshold) {
  if (dataset.num_users != truth.num_users ||
      dataset.num_items != truth.num_items) {
    throw ArgumentError("dataset and ground truth dimensions differ");
  }
  if (mapping.membership.size() != dataset.num_items) {
    throw ArgumentError("group mapping does not cover the item set");
  }
  LoopState state;
  state.users.resize(dataset.num_users);
  for (auto& user : state.users) {
    user.rated.assign(dataset.num_items, 0);
  }
  for (const auto& obs : dataset.observations) {
    auto& user = state.users[obs.user];
    if (!user.rated[obs.item]) {
      user.rated[obs.item] = 1;
      ++user.rated_count;
    }
  }
  for (UserId u = 0; u < state.users.size(); ++u) {
    auto& user = state.users[u];
    for (ItemId i = 0; i < dataset.num_items; ++i) {
      if (user.rated[i]) {
        for (GroupId g : mapping.groups_of(i)) {
          user.seen.insert(g);
        }
      }
    }
    user.relevant = relevant_groups(truth, mapping, u, threshold);
  }
  return state;
}

struct IterationOutcome {
  std::vector<ItemId> recommendations;
  std::vector<std::pair<ItemId, double>> rated;
  std::size_t new_groups = 0;
  bool exhausted = false;
};

/// One recommend -> rate -> update step for one user. The candidate pool is
/// every item the user has not rated; if it is empty the user is flagged
/// exhausted and skipped from then on. The seen set only ever grows
/// (filtration), and gains at most |recs| groups per step.
inline IterationOutcome run_iteration(
    LoopState& state, UserId user, const FactorModel& model,
    const PolicyConfig& policy, const FeedbackModel& feedback,
    SeenUpdate seen_update, const GroundTruth& truth,
    const GroupMapping& mapping, Rng& policy_rng, Rng& feedback_rng) {
  IterationOutcome outcome;
  auto& u = state.users[user];

  std::vector<ItemId> pool;
  pool.reserve(truth.num_items - u.rated_count);
  for (ItemId i = 0; i < truth.num_items; ++i) {
    if (!u.rated[i]) {
      pool.push_back(i);
    }
  }
  if (pool.empty()) {
    outcome.exhausted = true;
    return outcome;
  }

  const std::size_t n = std::min(policy.rec_len, pool.size());
  ScoredRanking ranking = score_candidates(model, user, pool);
  outcome.recommendations =
      epsilon_greedy(ranking, n, policy.epsilon, policy_rng);

  switch (feedback.kind) {
    case FeedbackKind::perfect:
      outcome.rated = perfect_feedback(outcome.recommendations, truth, user);
      break;
    case FeedbackKind::rank_dependent:
      outcome.rated = rank_dependent_feedback(
          outcome.recommendations, truth, user, feedback.theta, feedback_rng);
      break;
  }

  for (const auto& [item, rating] : outcome.rated) {
    if (!u.rated[item]) {
      u.rated[item] = 1;
      ++u.rated_count;
    }
  }

  const std::size_t seen_before = u.seen.size();
  if (seen_update == SeenUpdate::recommended) {
    for (ItemId item : outcome.recommendations) {
      for (GroupId g : mapping.groups_of(item)) {
        u.seen.insert(g);
      }
    }
  } else {
    for (const auto& [item, rating] : outcome.rated) {
      for (GroupId g : mapping.groups_of(item)) {
        u.seen.insert(g);
      }
    }
  }
  outcome.new_groups = u.seen.size() - seen_before;
  if (outcome.new_groups > outcome.recommendations.size()) {
    throw DataError("discovery increment exceeded the recommendation count");
  }
  return outcome;
}

/// Drives the whole closed loop: per run, retrain on the accumulated
/// ratings, recommend and collect feedback for every user, and record the
/// user-aggregated metrics per iteration.
///
/// Seeds derive hierarchically from master_seed (run, iteration, user), so
/// run r's randomness never depends on how many runs were requested.
///
/// If training diverges mid-way the error propagates; when `partial_out` is
/// given it receives the rows completed so far, marked truncated.
inline SimulationTrace run_simulation(const SimulationConfig& config,
                                      const RatingDataset& dataset,
                                      const GroupMapping& mapping,
                                      const GroundTruth& truth,
                                      SimulationTrace* partial_out = nullptr) {
  config.validate();

  SimulationTrace trace;
  trace.config_echo = {
      {"policy", config.policy.epsilon > 0.0 ? "epsilon_greedy" : "exploit"},
      {"epsilon", format_double(config.policy.epsilon)},
      {"rec_len", std::to_string(config.policy.rec_len)},
      {"feedback", config.feedback.kind == FeedbackKind::perfect
                       ? "perfect"
                       : "rank_dependent"},
      {"theta", format_double(config.feedback.theta)},
      {"relevance_threshold", std::to_string(config.relevance_threshold)},
      {"retrain", config.retrain == RetrainMode::from_scratch
                      ? "from_scratch"
                      : "warm_start"},
      {"seen_update", config.seen_update == SeenUpdate::recommended
                          ? "recommended"
                          : "rated"},
      {"iterations", std::to_string(config.iterations)},
      {"runs", std::to_string(config.runs)},
      {"learning_rate", format_double(config.hyperparams.learning_rate)},
      {"latent_dim", std::to_string(config.hyperparams.latent_dim)},
      {"l2_coeff", format_double(config.hyperparams.l2_coeff)},
      {"epochs", std::to_string(config.hyperparams.epochs)},
      {"master_seed", std::to_string(config.master_seed)},
      {"num_users", std::to_string(truth.num_users)},
      {"num_items", std::to_string(truth.num_items)},
      {"num_groups", std::to_string(mapping.num_groups)},
  };

  const std::size_t num_users = truth.num_users;

  try {
    for (std::size_t run = 1; run <= config.runs; ++run) {
      RatingDataset accumulated = dataset;
      LoopState state = init_loop_state(dataset, mapping, truth,
                                        config.relevance_threshold);

      RunDetail detail;
      if (config.collect_user_detail) {
        detail.relevant.resize(num_users);
        detail.seen_sets.resize(num_users);
        detail.rec_counts.resize(num_users);
        detail.exhausted_at.assign(num_users, 0);
        for (UserId u = 0; u < num_users; ++u) {
          detail.relevant[u] = state.users[u].relevant;
          detail.seen_sets[u].push_back(state.users[u].seen);
        }
      }

      std::vector<std::size_t> prev_blind(num_users);
      for (UserId u = 0; u < num_users; ++u) {
        prev_blind[u] =
            blind_spot(state.users[u].seen, state.users[u].relevant);
      }

      FactorModel model;
      if (config.retrain == RetrainMode::warm_start) {
        Hyperparams hp0 = config.hyperparams;
        hp0.seed = derive_seed(config.master_seed, {seed_stream::kTrain, run, 0});
        model = init_model(num_users, truth.num_items, hp0);
      }

      double delta_s_sum = 0.0;
      double abs_delta_b_sum = 0.0;

      for (std::size_t t = 1; t <= config.iterations; ++t) {
        state.iteration = t;
        Hyperparams hp = config.hyperparams;
        hp.seed =
            derive_seed(config.master_seed, {seed_stream::kTrain, run, t});
        if (config.retrain == RetrainMode::from_scratch) {
          model = init_model(num_users, truth.num_items, hp);
        }
        train(model, accumulated, hp);

        double sum_seen = 0.0;
        double sum_blind = 0.0;
        double sum_delta_s = 0.0;
        double sum_delta_b = 0.0;
        double sum_err = 0.0;

        for (UserId u = 0; u < num_users; ++u) {
          auto& user = state.users[u];
          std::size_t delta_s_user = 0;
          std::size_t rec_count = 0;
          if (user.exhausted_at == 0) {
            const std::size_t seen_before_count = user.seen.size();
            Rng policy_rng(derive_seed(
                config.master_seed,
                {seed_stream::kPolicy, config.policy.seed, run, t, u}));
            Rng feedback_rng(derive_seed(
                config.master_seed,
                {seed_stream::kFeedback, config.feedback.seed, run, t, u}));
            IterationOutcome outcome = run_iteration(
                state, u, model, config.policy, config.feedback,
                config.seen_update, truth, mapping, policy_rng, feedback_rng);
            if (outcome.exhausted) {
              user.exhausted_at = t;
            } else {
              for (const auto& [item, rating] : outcome.rated) {
                accumulated.observations.push_back(
                    {u, item, rating, static_cast<std::int64_t>(t)});
              }
            }
            delta_s_user = user.seen.size() - seen_before_count;
            rec_count = outcome.recommendations.size();
          }

          std::size_t blind = blind_spot(user.seen, user.relevant);
          std::size_t err = error_e(user.seen, user.relevant,
                                    mapping.num_groups);
          sum_seen += static_cast<double>(user.seen.size());
          sum_blind += static_cast<double>(blind);
          sum_delta_s += static_cast<double>(delta_s_user);
          sum_delta_b += static_cast<double>(prev_blind[u]) -
                         static_cast<double>(blind);
          sum_err += static_cast<double>(err);
          prev_blind[u] = blind;

          if (config.collect_user_detail) {
            detail.seen_sets[u].push_back(user.seen);
            detail.rec_counts[u].push_back(
                static_cast<std::uint32_t>(rec_count));
            detail.exhausted_at[u] = user.exhausted_at;
          }
        }

        const double inv_users = 1.0 / static_cast<double>(num_users);
        TraceRow row;
        row.run = run;
        row.iteration = t;
        row.seen_count = sum_seen * inv_users;
        row.blind_spot = sum_blind * inv_users;
        row.delta_s = sum_delta_s * inv_users;
        row.delta_b = sum_delta_b * inv_users;
        delta_s_sum += row.delta_s;
        abs_delta_b_sum += std::abs(row.delta_b);
        row.avg_discovery = delta_s_sum / static_cast<double>(t);
        row.avg_blind_decrease = abs_delta_b_sum / static_cast<double>(t);
        row.error_e = sum_err * inv_users;
        row.bound_d05 =
            azuma_bound({0.05, config.policy.rec_len, t});
        row.bound_d01 =
            azuma_bound({0.01, config.policy.rec_len, t});
        trace.rows.push_back(row);
      }

      if (config.collect_user_detail) {
        trace.run_details.push_back(std::move(detail));
      }
    }
  } catch (const TrainingError&) {
    if (partial_out != nullptr) {
      *partial_out = trace;
      partial_out->truncated = true;
    }
    throw;
  }
  return trace;
}

}  // namespace recloop
