#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "recloop/dataset.hpp"
#include "recloop/errors.hpp"
#include "recloop/rng.hpp"

namespace recloop {

struct Hyperparams {
  double learning_rate = 0.001;
  std::size_t latent_dim = 10;
  double l2_coeff = 0.01;
  std::size_t epochs = 300;
  std::uint64_t seed = 0;

  bool operator==(const Hyperparams&) const = default;

  void validate() const {
    if (!(learning_rate > 0.0)) {
      throw ArgumentError("learning_rate must be > 0");
    }
    if (latent_dim < 1) {
      throw ArgumentError("latent_dim must be >= 1");
    }
    if (!(l2_coeff >= 0.0)) {
      throw ArgumentError("l2_coeff must be >= 0");
    }
    if (epochs < 1) {
      throw ArgumentError("epochs must be >= 1");
    }
  }
};

/// Per-user and per-item latent vectors. Predicted ratings are the plain dot
/// product of the two vectors; there are no bias terms.
class FactorModel {
 public:
  FactorModel() = default;

  FactorModel(std::size_t num_users, std::size_t num_items,
              std::size_t latent_dim)
      : num_users_(num_users),
        num_items_(num_items),
        latent_dim_(latent_dim),
        user_factors_(num_users * latent_dim, 0.0),
        item_factors_(num_items * latent_dim, 0.0) {
    if (num_users == 0 || num_items == 0 || latent_dim == 0) {
      throw ArgumentError("model dimensions must be >= 1");
    }
  }

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t latent_dim() const { return latent_dim_; }

  std::span<double> user_factor(UserId u) {
    check_user(u);
    return {user_factors_.data() + u * latent_dim_, latent_dim_};
  }
  std::span<const double> user_factor(UserId u) const {
    check_user(u);
    return {user_factors_.data() + u * latent_dim_, latent_dim_};
  }
  std::span<double> item_factor(ItemId i) {
    check_item(i);
    return {item_factors_.data() + i * latent_dim_, latent_dim_};
  }
  std::span<const double> item_factor(ItemId i) const {
    check_item(i);
    return {item_factors_.data() + i * latent_dim_, latent_dim_};
  }

  double predict(UserId u, ItemId i) const {
    check_user(u);
    check_item(i);
    const double* p = user_factors_.data() + u * latent_dim_;
    const double* q = item_factors_.data() + i * latent_dim_;
    double dot = 0.0;
    for (std::size_t k = 0; k < latent_dim_; ++k) {
      dot += p[k] * q[k];
    }
    return dot;
  }

  bool all_finite() const {
    for (double v : user_factors_) {
      if (!std::isfinite(v)) {
        return false;
      }
    }
    for (double v : item_factors_) {
      if (!std::isfinite(v)) {
        return false;
      }
    }
    return true;
  }

  bool operator==(const FactorModel&) const = default;

 private:
  void check_user(UserId u) const {
    if (u >= num_users_) {
      throw ArgumentError("user index " + std::to_string(u) +
                          " out of range");
    }
  }
  void check_item(ItemId i) const {
    if (i >= num_items_) {
      throw ArgumentError("item index " + std::to_string(i) +
                          " out of range");
    }
  }

  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::size_t latent_dim_ = 0;
  std::vector<double> user_factors_;
  std::vector<double> item_factors_;
};

/// Fresh model with entries i.i.d. uniform in [-0.05, 0.05], drawn from a
/// generator seeded by hp.seed (user factors first, then item factors).
inline FactorModel init_model(std::size_t num_users, std::size_t num_items,
                              const Hyperparams& hp) {
  hp.validate();
  FactorModel model(num_users, num_items, hp.latent_dim);
  Rng rng(derive_seed(hp.seed, {seed_stream::kInit}));
  for (UserId u = 0; u < num_users; ++u) {
    for (double& v : model.user_factor(u)) {
      v = uniform_real(rng, -0.05, 0.05);
    }
  }
  for (ItemId i = 0; i < num_items; ++i) {
    for (double& v : model.item_factor(i)) {
      v = uniform_real(rng, -0.05, 0.05);
    }
  }
  return model;
}

/// The term one SGD step descends: (1/2)(r - p.q)^2 + (l2/2)(|p|^2 + |q|^2).
/// Half the per-observation contribution to loss(); same minimizer, and its
/// exact gradient gives the standard update p += lr * (err * q - l2 * p).
inline double sgd_loss_term(std::span<const double> p,
                            std::span<const double> q, double rating,
                            double l2_coeff) {
  double dot = 0.0;
  double np = 0.0;
  double nq = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    dot += p[k] * q[k];
    np += p[k] * p[k];
    nq += q[k] * q[k];
  }
  double err = rating - dot;
  return 0.5 * err * err + 0.5 * l2_coeff * (np + nq);
}

/// Gradient of sgd_loss_term with respect to p and q, both evaluated at the
/// current (p, q). This is the gradient train() applies.
inline void sgd_gradient(std::span<const double> p, std::span<const double> q,
                         double rating, double l2_coeff,
                         std::span<double> grad_p, std::span<double> grad_q) {
  double dot = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    dot += p[k] * q[k];
  }
  double err = rating - dot;
  for (std::size_t k = 0; k < p.size(); ++k) {
    grad_p[k] = -err * q[k] + l2_coeff * p[k];
    grad_q[k] = -err * p[k] + l2_coeff * q[k];
  }
}

/// Regularized squared-error objective: sum over observations of
/// (r - p.q)^2 + l2 * (|p|^2 + |q|^2).
inline double loss(const FactorModel& model, const RatingDataset& dataset,
                   double l2_coeff) {
  double total = 0.0;
  for (const auto& obs : dataset.observations) {
    total += 2.0 * sgd_loss_term(model.user_factor(obs.user),
                                 model.item_factor(obs.item), obs.rating,
                                 l2_coeff);
  }
  return total;
}

/// Per-observation SGD on the regularized squared error. Observation order
/// is reshuffled every epoch from a generator derived from hp.seed, so a
/// given (seed, hyperparameters) pair trains bit-identically.
///
/// Returns the mean squared training error measured after each epoch.
/// Throws TrainingError naming the epoch if any factor goes non-finite.
inline std::vector<double> train(FactorModel& model,
                                 const RatingDataset& dataset,
                                 const Hyperparams& hp) {
  hp.validate();
  if (dataset.observations.empty()) {
    throw ArgumentError("cannot train on an empty dataset");
  }
  if (model.latent_dim() != hp.latent_dim) {
    throw ArgumentError("model dimension does not match hyperparameters");
  }

  const std::size_t dim = hp.latent_dim;
  std::vector<std::uint32_t> order(dataset.observations.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  Rng shuffle_rng(derive_seed(hp.seed, {seed_stream::kShuffle}));
  std::vector<double> grad_p(dim);
  std::vector<double> grad_q(dim);
  std::vector<double> epoch_mse;
  epoch_mse.reserve(hp.epochs);

  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    shuffle_in_place(shuffle_rng, order);
    for (std::uint32_t idx : order) {
      const auto& obs = dataset.observations[idx];
      auto p = model.user_factor(obs.user);
      auto q = model.item_factor(obs.item);
      sgd_gradient(p, q, obs.rating, hp.l2_coeff, grad_p, grad_q);
      for (std::size_t k = 0; k < dim; ++k) {
        p[k] -= hp.learning_rate * grad_p[k];
        q[k] -= hp.learning_rate * grad_q[k];
      }
    }
    if (!model.all_finite()) {
      throw TrainingError("factors diverged to non-finite values", epoch);
    }
    double sq = 0.0;
    for (const auto& obs : dataset.observations) {
      double err = obs.rating - model.predict(obs.user, obs.item);
      sq += err * err;
    }
    epoch_mse.push_back(sq / static_cast<double>(dataset.observations.size()));
  }
  return epoch_mse;
}

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}

inline void write_f64(std::ostream& out, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  char buf[8];
  if (!in.read(buf, 8)) {
    throw DataError("truncated binary file");
  }
  std::uint64_t v;
  std::memcpy(&v, buf, 8);
  return v;
}

inline double read_f64(std::istream& in) {
  char buf[8];
  if (!in.read(buf, 8)) {
    throw DataError("truncated binary file");
  }
  double v;
  std::memcpy(&v, buf, 8);
  return v;
}

inline void write_hyperparams(std::ostream& out, const Hyperparams& hp) {
  write_f64(out, hp.learning_rate);
  write_u64(out, hp.latent_dim);
  write_f64(out, hp.l2_coeff);
  write_u64(out, hp.epochs);
  write_u64(out, hp.seed);
}

inline Hyperparams read_hyperparams(std::istream& in) {
  Hyperparams hp;
  hp.learning_rate = read_f64(in);
  hp.latent_dim = read_u64(in);
  hp.l2_coeff = read_f64(in);
  hp.epochs = read_u64(in);
  hp.seed = read_u64(in);
  return hp;
}

}  // namespace detail

// Model checkpoint: "RLMF" magic, version, dimensions, hyperparameters and
// raw factor doubles (native little-endian). Loading reproduces predictions
// exactly.

inline void save_model(const FactorModel& model, const Hyperparams& hp,
                       std::ostream& out) {
  out.write("RLMF", 4);
  detail::write_u64(out, 1);  // version
  detail::write_u64(out, model.num_users());
  detail::write_u64(out, model.num_items());
  detail::write_u64(out, model.latent_dim());
  detail::write_hyperparams(out, hp);
  for (UserId u = 0; u < model.num_users(); ++u) {
    for (double v : model.user_factor(u)) {
      detail::write_f64(out, v);
    }
  }
  for (ItemId i = 0; i < model.num_items(); ++i) {
    for (double v : model.item_factor(i)) {
      detail::write_f64(out, v);
    }
  }
}

inline std::pair<FactorModel, Hyperparams> load_model(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "RLMF", 4) != 0) {
    throw DataError("not a model checkpoint (bad magic)");
  }
  std::uint64_t version = detail::read_u64(in);
  if (version != 1) {
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version));
  }
  std::uint64_t num_users = detail::read_u64(in);
  std::uint64_t num_items = detail::read_u64(in);
  std::uint64_t dim = detail::read_u64(in);
  Hyperparams hp = detail::read_hyperparams(in);
  FactorModel model(num_users, num_items, dim);
  for (UserId u = 0; u < num_users; ++u) {
    for (double& v : model.user_factor(u)) {
      v = detail::read_f64(in);
    }
  }
  for (ItemId i = 0; i < num_items; ++i) {
    for (double& v : model.item_factor(i)) {
      v = detail::read_f64(in);
    }
  }
  return {std::move(model), hp};
}

}  // namespace recloop
