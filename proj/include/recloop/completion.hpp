#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "recloop/factorization.hpp"

namespace recloop {

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }
};

/// Dense rating matrix with every cell in {1..5}. Built once per experiment
/// and then treated as the users' true preferences.
struct GroundTruth {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<std::uint8_t> ratings;  // row-major, values 1..5

  bool operator==(const GroundTruth&) const = default;

  std::uint8_t at(UserId u, ItemId i) const {
    if (u >= num_users || i >= num_items) {
      throw ArgumentError("ground-truth index out of range");
    }
    return ratings[static_cast<std::size_t>(u) * num_items + i];
  }
};

/// Trains a factorization model on all observations and fills every cell
/// with its prediction. Observed cells are replaced by predictions too, so
/// the whole matrix goes through the same rescaling afterwards.
inline DenseMatrix complete_matrix(const RatingDataset& dataset,
                                   const Hyperparams& hp) {
  FactorModel model = init_model(dataset.num_users, dataset.num_items, hp);
  train(model, dataset, hp);
  DenseMatrix raw;
  raw.rows = dataset.num_users;
  raw.cols = dataset.num_items;
  raw.values.resize(raw.rows * raw.cols);
  for (UserId u = 0; u < raw.rows; ++u) {
    for (ItemId i = 0; i < raw.cols; ++i) {
      raw.at(u, i) = model.predict(u, i);
    }
  }
  return raw;
}

/// Maps a row of raw scores to classes {1..5} by the row's own quintiles.
/// Percentiles use the nearest-rank method: the p-th percentile is the
/// ceil(p/100 * N)-th smallest value. A value lands in class 1 when it is at
/// or below the 20th percentile, class 2 in (p20, p40], and so on; ties share
/// the class of their bucket, so a constant row maps entirely to 1.
inline std::vector<std::uint8_t> percentile_rescale(
    std::span<const double> raw_row) {
  if (raw_row.empty()) {
    throw ArgumentError("percentile_rescale: empty row");
  }
  for (double v : raw_row) {
    if (!std::isfinite(v)) {
      throw DataError("percentile_rescale: non-finite value");
    }
  }
  std::vector<double> sorted(raw_row.begin(), raw_row.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  auto nearest_rank = [&](double pct) {
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(pct / 100.0 * static_cast<double>(n)));
    if (rank < 1) {
      rank = 1;
    }
    return sorted[rank - 1];
  };
  const double p20 = nearest_rank(20.0);
  const double p40 = nearest_rank(40.0);
  const double p60 = nearest_rank(60.0);
  const double p80 = nearest_rank(80.0);

  std::vector<std::uint8_t> classes(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = raw_row[i];
    if (v <= p20) {
      classes[i] = 1;
    } else if (v <= p40) {
      classes[i] = 2;
    } else if (v <= p60) {
      classes[i] = 3;
    } else if (v <= p80) {
      classes[i] = 4;
    } else {
      classes[i] = 5;
    }
  }
  return classes;
}

/// Matrix completion followed by per-user percentile rescaling. Depends only
/// on the observed ratings and hp (including hp.seed).
inline GroundTruth build_semisynthetic(const RatingDataset& dataset,
                                       const Hyperparams& hp) {
  DenseMatrix raw = complete_matrix(dataset, hp);
  GroundTruth truth;
  truth.num_users = raw.rows;
  truth.num_items = raw.cols;
  truth.ratings.resize(raw.rows * raw.cols);
  for (std::size_t u = 0; u < raw.rows; ++u) {
    std::vector<std::uint8_t> classes = percentile_rescale(raw.row(u));
    std::copy(classes.begin(), classes.end(),
              truth.ratings.begin() + u * raw.cols);
  }
  return truth;
}

inline constexpr const char* kPercentileMethodTag = "nearest-rank-quintile";

// Ground-truth artifact: "RLGT" magic, version, dimensions, the
// hyperparameters that built it, a percentile-method tag and the rating
// bytes. One artifact can back many policy-comparison simulations.

inline void save_ground_truth(const GroundTruth& truth, const Hyperparams& hp,
                              std::ostream& out) {
  out.write("RLGT", 4);
  detail::write_u64(out, 1);  // version
  detail::write_u64(out, truth.num_users);
  detail::write_u64(out, truth.num_items);
  detail::write_hyperparams(out, hp);
  std::string tag = kPercentileMethodTag;
  detail::write_u64(out, tag.size());
  out.write(tag.data(), static_cast<std::streamsize>(tag.size()));
  out.write(reinterpret_cast<const char*>(truth.ratings.data()),
            static_cast<std::streamsize>(truth.ratings.size()));
}

inline std::pair<GroundTruth, Hyperparams> load_ground_truth(
    std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "RLGT", 4) != 0) {
    throw DataError("not a ground-truth file (bad magic)");
  }
  std::uint64_t version = detail::read_u64(in);
  if (version != 1) {
    throw DataError("unsupported ground-truth version " +
                    std::to_string(version));
  }
  GroundTruth truth;
  truth.num_users = detail::read_u64(in);
  truth.num_items = detail::read_u64(in);
  Hyperparams hp = detail::read_hyperparams(in);
  std::uint64_t tag_len = detail::read_u64(in);
  std::string tag(tag_len, '\0');
  if (!in.read(tag.data(), static_cast<std::streamsize>(tag_len))) {
    throw DataError("truncated ground-truth file");
  }
  if (tag != kPercentileMethodTag) {
    throw DataError("unknown percentile method tag '" + tag + "'");
  }
  truth.ratings.resize(truth.num_users * truth.num_items);
  if (!in.read(reinterpret_cast<char*>(truth.ratings.data()),
               static_cast<std::streamsize>(truth.ratings.size()))) {
    throw DataError("truncated ground-truth file");
  }
  for (std::uint8_t r : truth.ratings) {
    if (r < 1 || r > 5) {
      throw DataError("ground-truth rating outside {1..5}");
    }
  }
  return {std::move(truth), hp};
}

}  // namespace recloop
