#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "recloop/completion.hpp"
#include "recloop/dataset.hpp"
#include "recloop/factorization.hpp"
#include "recloop/rng.hpp"

namespace recloop {

/// Fixture for the ranking-assumption test: a population of users who have
/// only rated items from the first half of the groups, plus a factor model
/// in which those groups' item factors are scaled up. Every sampled user
/// should therefore score seen-group items higher on average.
struct PlantedConfig {
  std::size_t num_users = 60;
  std::size_t num_items = 200;
  std::size_t num_groups = 10;
  std::size_t latent_dim = 10;
  double scale = 1.2;
  std::size_t rated_per_user = 8;
  std::uint64_t seed = 0;
};

struct PlantedInstance {
  RatingDataset dataset;
  GroupMapping mapping;
  FactorModel model;
};

inline PlantedInstance make_planted_instance(const PlantedConfig& cfg) {
  if (cfg.num_groups < 2 || cfg.num_items < cfg.num_groups ||
      cfg.num_users < 2) {
    throw ArgumentError("planted instance needs >= 2 groups and users");
  }
  PlantedInstance inst;

  inst.mapping.num_groups = cfg.num_groups;
  for (std::size_t g = 0; g < cfg.num_groups; ++g) {
    inst.mapping.group_names.push_back("group" + std::to_string(g));
  }
  inst.mapping.membership.resize(cfg.num_items);
  for (ItemId i = 0; i < cfg.num_items; ++i) {
    inst.mapping.membership[i] = {static_cast<GroupId>(i % cfg.num_groups)};
  }

  const std::size_t boosted_groups = cfg.num_groups / 2;
  std::vector<ItemId> boosted_items;
  for (ItemId i = 0; i < cfg.num_items; ++i) {
    if (i % cfg.num_groups < boosted_groups) {
      boosted_items.push_back(i);
    }
  }

  Rng rng(derive_seed(cfg.seed, {seed_stream::kSample}));
  inst.dataset.num_users = cfg.num_users;
  inst.dataset.num_items = cfg.num_items;
  for (UserId u = 0; u < cfg.num_users; ++u) {
    inst.dataset.user_ids.push_back(u);
  }
  for (ItemId i = 0; i < cfg.num_items; ++i) {
    inst.dataset.item_ids.push_back(i);
  }
  const std::size_t per_user =
      std::min(cfg.rated_per_user, boosted_items.size());
  for (UserId u = 0; u < cfg.num_users; ++u) {
    auto picks = sample_without_replacement(
        rng, static_cast<std::uint32_t>(boosted_items.size()),
        static_cast<std::uint32_t>(per_user));
    for (std::uint32_t p : picks) {
      double rating = 1.0 + static_cast<double>(uniform_index(rng, 5));
      inst.dataset.observations.push_back(
          {u, boosted_items[p], rating, 0});
    }
  }

  inst.model = FactorModel(cfg.num_users, cfg.num_items, cfg.latent_dim);
  for (UserId u = 0; u < cfg.num_users; ++u) {
    for (double& v : inst.model.user_factor(u)) {
      v = uniform_real(rng, 0.3, 0.7);
    }
  }
  for (ItemId i = 0; i < cfg.num_items; ++i) {
    const bool boosted = (i % cfg.num_groups) < boosted_groups;
    for (double& v : inst.model.item_factor(i)) {
      v = uniform_real(rng, 0.3, 0.7);
      if (boosted) {
        v *= cfg.scale;
      }
    }
  }
  return inst;
}

/// A synthetic world for closed-loop experiments: a planted low-rank
/// preference structure with one group per item, percentile-rescaled into a
/// dense {1..5} ground truth, plus a seed dataset in which every user has
/// only rated items from a couple of "home" groups. Group directions overlap
/// in the low-rank space, so some never-seen groups stay genuinely relevant.
///
/// group_size_decay < 1 skews the group sizes geometrically (group g gets a
/// share proportional to decay^g), mimicking the long-tailed genre
/// distribution of real catalogues; 1.0 keeps them even. Home groups are
/// drawn size-weighted, so users start in the big mainstream groups and the
/// small ones form the natural blind spot.
struct SyntheticWorldConfig {
  std::size_t num_users = 200;
  std::size_t num_items = 500;
  std::size_t num_groups = 10;
  std::size_t rank = 3;
  double noise = 0.15;
  std::size_t home_groups = 2;
  std::size_t rated_per_user = 20;
  double group_size_decay = 1.0;
  double home_weight_power = 1.0;  // home draws weighted by size^power
  std::uint64_t seed = 0;
};

struct SyntheticWorld {
  GroundTruth truth;
  GroupMapping mapping;
  RatingDataset dataset;
};

namespace detail {

/// Splits num_items into num_groups sizes proportional to decay^g, each at
/// least 2, using largest remainders.
inline std::vector<std::size_t> skewed_group_sizes(std::size_t num_items,
                                                   std::size_t num_groups,
                                                   double decay) {
  std::vector<double> weights(num_groups);
  double total = 0.0;
  double w = 1.0;
  for (std::size_t g = 0; g < num_groups; ++g) {
    weights[g] = w;
    total += w;
    w *= decay;
  }
  std::vector<std::size_t> sizes(num_groups);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < num_groups; ++g) {
    double exact = weights[g] / total * static_cast<double>(num_items);
    sizes[g] = std::max<std::size_t>(2, static_cast<std::size_t>(exact));
    assigned += sizes[g];
    remainders.emplace_back(exact - std::floor(exact), g);
  }
  std::sort(remainders.rbegin(), remainders.rend());
  std::size_t cursor = 0;
  while (assigned < num_items) {
    std::size_t g = remainders[cursor % num_groups].second;
    ++sizes[g];
    ++assigned;
    ++cursor;
  }
  while (assigned > num_items) {
    // shave the largest groups down, never below 2
    std::size_t biggest = 0;
    for (std::size_t g = 1; g < num_groups; ++g) {
      if (sizes[g] > sizes[biggest]) {
        biggest = g;
      }
    }
    if (sizes[biggest] <= 2) {
      throw ArgumentError("too few items for the requested group count");
    }
    --sizes[biggest];
    --assigned;
  }
  return sizes;
}

}  // namespace detail

inline SyntheticWorld make_synthetic_world(const SyntheticWorldConfig& cfg) {
  if (cfg.num_groups < 2 || cfg.rank < 1 ||
      cfg.home_groups < 1 || cfg.home_groups > cfg.num_groups ||
      cfg.num_items < 2 * cfg.num_groups) {
    throw ArgumentError("bad synthetic world configuration");
  }
  if (!(cfg.group_size_decay > 0.0 && cfg.group_size_decay <= 1.0)) {
    throw ArgumentError("group_size_decay must lie in (0, 1]");
  }
  SyntheticWorld world;
  Rng rng(derive_seed(cfg.seed, {seed_stream::kTruth}));

  world.mapping.num_groups = cfg.num_groups;
  for (std::size_t g = 0; g < cfg.num_groups; ++g) {
    world.mapping.group_names.push_back("group" + std::to_string(g));
  }
  world.mapping.membership.resize(cfg.num_items);
  std::vector<std::size_t> sizes = detail::skewed_group_sizes(
      cfg.num_items, cfg.num_groups, cfg.group_size_decay);
  std::vector<std::vector<ItemId>> items_of_group(cfg.num_groups);
  {
    ItemId next = 0;
    for (std::size_t g = 0; g < cfg.num_groups; ++g) {
      for (std::size_t k = 0; k < sizes[g]; ++k, ++next) {
        world.mapping.membership[next] = {static_cast<GroupId>(g)};
        items_of_group[g].push_back(next);
      }
    }
  }

  // Unit group directions in the rank-dimensional space.
  std::vector<std::vector<double>> directions(cfg.num_groups,
                                              std::vector<double>(cfg.rank));
  for (auto& dir : directions) {
    double norm = 0.0;
    for (double& v : dir) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : dir) {
      v /= norm;
    }
  }

  std::vector<std::vector<double>> item_vec(cfg.num_items,
                                            std::vector<double>(cfg.rank));
  for (ItemId i = 0; i < cfg.num_items; ++i) {
    const auto& dir = directions[world.mapping.membership[i].front()];
    for (std::size_t k = 0; k < cfg.rank; ++k) {
      item_vec[i][k] = dir[k] + cfg.noise * normal(rng);
    }
  }

  // home groups are drawn with probability proportional to
  // size^home_weight_power, without replacement; higher powers starve the
  // tail groups of native raters
  auto draw_homes = [&](Rng& r) {
    std::vector<double> remaining(cfg.num_groups);
    for (std::size_t g = 0; g < cfg.num_groups; ++g) {
      remaining[g] = std::pow(static_cast<double>(sizes[g]),
                              cfg.home_weight_power);
    }
    std::vector<std::uint32_t> homes;
    for (std::size_t pick = 0; pick < cfg.home_groups; ++pick) {
      double total = 0.0;
      for (double w : remaining) {
        total += w;
      }
      double roll = uniform_real(r, 0.0, total);
      std::size_t g = 0;
      while (g + 1 < cfg.num_groups && roll >= remaining[g]) {
        roll -= remaining[g];
        ++g;
      }
      homes.push_back(static_cast<std::uint32_t>(g));
      remaining[g] = 0.0;
    }
    return homes;
  };

  std::vector<std::vector<ItemId>> home_pool(cfg.num_users);
  std::vector<std::vector<double>> user_vec(cfg.num_users,
                                            std::vector<double>(cfg.rank));
  for (UserId u = 0; u < cfg.num_users; ++u) {
    auto homes = draw_homes(rng);
    for (std::uint32_t g : homes) {
      home_pool[u].insert(home_pool[u].end(), items_of_group[g].begin(),
                          items_of_group[g].end());
    }
    for (std::size_t k = 0; k < cfg.rank; ++k) {
      double v = 0.0;
      for (std::uint32_t g : homes) {
        v += directions[g][k];
      }
      user_vec[u][k] = v / static_cast<double>(homes.size()) +
                       cfg.noise * normal(rng);
    }
  }

  world.truth.num_users = cfg.num_users;
  world.truth.num_items = cfg.num_items;
  world.truth.ratings.resize(cfg.num_users * cfg.num_items);
  std::vector<double> raw_row(cfg.num_items);
  for (UserId u = 0; u < cfg.num_users; ++u) {
    for (ItemId i = 0; i < cfg.num_items; ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < cfg.rank; ++k) {
        dot += user_vec[u][k] * item_vec[i][k];
      }
      raw_row[i] = dot;
    }
    std::vector<std::uint8_t> classes = percentile_rescale(raw_row);
    std::copy(classes.begin(), classes.end(),
              world.truth.ratings.begin() + u * cfg.num_items);
  }

  world.dataset.num_users = cfg.num_users;
  world.dataset.num_items = cfg.num_items;
  for (UserId u = 0; u < cfg.num_users; ++u) {
    world.dataset.user_ids.push_back(u);
  }
  for (ItemId i = 0; i < cfg.num_items; ++i) {
    world.dataset.item_ids.push_back(i);
  }
  for (UserId u = 0; u < cfg.num_users; ++u) {
    const auto& pool = home_pool[u];
    const std::size_t per_user = std::min(cfg.rated_per_user, pool.size());
    auto picks = sample_without_replacement(
        rng, static_cast<std::uint32_t>(pool.size()),
        static_cast<std::uint32_t>(per_user));
    for (std::uint32_t p : picks) {
      ItemId item = pool[p];
      world.dataset.observations.push_back(
          {u, item, static_cast<double>(world.truth.at(u, item)), 0});
    }
  }
  return world;
}

}  // namespace recloop
