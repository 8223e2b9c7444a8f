#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "recloop/factorization.hpp"
#include "recloop/rng.hpp"

namespace recloop {

struct ScoredItem {
  ItemId item;
  double score;

  bool operator==(const ScoredItem&) const = default;
};

/// Candidates ordered by (score desc, item asc). The item-id tie-break is
/// part of the contract: equal scores always rank the same way.
using ScoredRanking = std::vector<ScoredItem>;

struct PolicyConfig {
  std::size_t rec_len = 10;
  double epsilon = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (rec_len < 1) {
      throw ArgumentError("rec_len must be >= 1");
    }
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
      throw ArgumentError("epsilon must lie in [0, 1]");
    }
  }
};

inline ScoredRanking score_candidates(const FactorModel& model, UserId user,
                                      std::span<const ItemId> candidates) {
  if (candidates.empty()) {
    throw ArgumentError("score_candidates: empty candidate set");
  }
  ScoredRanking ranking;
  ranking.reserve(candidates.size());
  for (ItemId item : candidates) {
    ranking.push_back({item, model.predict(user, item)});
  }
  std::sort(ranking.begin(), ranking.end(),
            [](const ScoredItem& a, const ScoredItem& b) {
              if (a.score != b.score) {
                return a.score > b.score;
              }
              return a.item < b.item;
            });
  return ranking;
}

/// First n items of the ranking: the pure-exploitation policy.
inline std::vector<ItemId> top_n_exploit(const ScoredRanking& ranking,
                                         std::size_t n) {
  if (n > ranking.size()) {
    throw ArgumentError("top_n_exploit: n exceeds candidate count");
  }
  std::vector<ItemId> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(ranking[i].item);
  }
  return out;
}

/// round(epsilon * n) slots are uniform draws without replacement from the
/// whole candidate set; the rest are the top-ranked items not already drawn.
/// Exploit picks come first (in rank order), exploration picks follow in
/// draw order. epsilon = 0 reproduces top_n_exploit exactly.
inline std::vector<ItemId> epsilon_greedy(const ScoredRanking& ranking,
                                          std::size_t n, double epsilon,
                                          Rng& rng) {
  if (n > ranking.size()) {
    throw ArgumentError("epsilon_greedy: n exceeds candidate count");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ArgumentError("epsilon must lie in [0, 1]");
  }
  const std::size_t k = static_cast<std::size_t>(
      std::lround(epsilon * static_cast<double>(n)));

  std::vector<char> chosen(ranking.size(), 0);
  std::vector<std::uint32_t> explore = sample_without_replacement(
      rng, static_cast<std::uint32_t>(ranking.size()),
      static_cast<std::uint32_t>(k));
  for (std::uint32_t pos : explore) {
    chosen[pos] = 1;
  }

  std::vector<ItemId> out;
  out.reserve(n);
  for (std::size_t pos = 0; pos < ranking.size() && out.size() < n - k;
       ++pos) {
    if (!chosen[pos]) {
      out.push_back(ranking[pos].item);
    }
  }
  for (std::uint32_t pos : explore) {
    out.push_back(ranking[pos].item);
  }
  return out;
}

}  // namespace recloop
