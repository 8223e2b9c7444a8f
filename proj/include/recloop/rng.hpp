#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace recloop {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent seed from a master seed and a path of stream tags
/// (e.g. {stream, run, iteration, user}). Folding the path element by element
/// keeps a stream stable when unrelated dimensions (extra runs, extra
/// iterations) are added to an experiment.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t p : path) {
    h = mix64(h ^ mix64(p));
  }
  return h;
}

// Seed stream tags. Keeping them distinct means the policy, feedback and
// training streams never alias even for equal (run, iteration, user) paths.
namespace seed_stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kTrain = 3;
inline constexpr std::uint64_t kPolicy = 4;
inline constexpr std::uint64_t kFeedback = 5;
inline constexpr std::uint64_t kTruth = 6;
inline constexpr std::uint64_t kSample = 7;
}  // namespace seed_stream

/// Uniform double in [lo, hi). Built directly on the engine's 64-bit output
/// so values do not depend on the standard library's distribution
/// implementation.
inline double uniform_real(Rng& rng, double lo, double hi) {
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
  return lo + u * (hi - lo);
}

/// Uniform integer in [0, n). Rejection sampling, no modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t x = rng();
  while (x >= limit) {
    x = rng();
  }
  return x % n;
}

/// Standard normal deviate (Box-Muller, pinned to uniform_real).
inline double normal(Rng& rng) {
  double u1 = uniform_real(rng, 0.0, 1.0);
  double u2 = uniform_real(rng, 0.0, 1.0);
  while (u1 <= 0.0) {
    u1 = uniform_real(rng, 0.0, 1.0);
  }
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
inline std::vector<std::uint32_t> sample_without_replacement(Rng& rng,
                                                             std::uint32_t n,
                                                             std::uint32_t k) {
  std::vector<std::uint32_t> pool(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    pool[i] = i;
  }
  std::vector<std::uint32_t> out;
  out.reserve(k);
  for (std::uint32_t i = 0; i < k && i < n; ++i) {
    std::uint32_t j =
        i + static_cast<std::uint32_t>(uniform_index(rng, n - i));
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

template <typename T>
void shuffle_in_place(Rng& rng, std::vector<T>& values) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace recloop
