#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nnvp/dataset.hpp"
#include "nnvp/error.hpp"
#include "nnvp/mlp.hpp"
#include "nnvp/random.hpp"

namespace nnvp {

struct ScgOptions {
  double sigma = 1e-4;          // finite-difference step for curvature estimates
  double initial_lambda = 1e-6; // initial Levenberg-Marquardt style scale
  double lambda_min = 1e-15;
  double lambda_max = 1e100;
  double min_direction_norm2 = 1e-30;
  double min_gradient_norm2 = 1e-30;
};

struct TrainedModel {
  MLPModel model;
  double validation_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;  // 0 means the initial weights were never beaten
  int epochs_run = 0;
  std::vector<double> validation_curve;  // entry e = validation CE after epoch e (entry 0: initial)
};

// Full-batch scaled conjugate gradient (Moller 1993) on the summed
// cross-entropy of `train`, starting from `initial`. After every iteration
// the validation CE is measured and the best weights seen so far are kept.
// Stops at max_epochs, after `patience` iterations without validation
// improvement, or when the search direction / gradient underflows.
inline TrainedModel scg_fit(MLPModel initial, const MLPConfig& config, const Batch& train,
                            const Batch& validation, const ScgOptions& opt = {}) {
  if (train.size() == 0) throw std::invalid_argument("scg: empty training set");
  if (validation.size() == 0) throw std::invalid_argument("scg: empty validation set");

  MLPModel model = std::move(initial);
  MLPModel probe = model;
  const Eigen::Index num_params = model.num_parameters();

  auto checked = [](double v, int epoch, const char* what) {
    if (!std::isfinite(v))
      throw TrainingError(std::string("non-finite ") + what + " at epoch " + std::to_string(epoch),
                          epoch);
    return v;
  };

  LossAndGradient lg = loss_and_gradient(model, train);
  double f = checked(lg.loss, 0, "training loss");
  Eigen::VectorXd r = -lg.gradient;  // residual: negative gradient
  Eigen::VectorXd p = r;
  Eigen::VectorXd s(num_params);

  double lambda = opt.initial_lambda;
  double lambda_bar = 0.0;
  double delta = 0.0;
  double p_norm2 = p.squaredNorm();
  bool success = true;
  Eigen::Index successes = 0;

  TrainedModel best;
  double current_val = checked(loss(model, validation), 0, "validation loss");
  best.model = model;
  best.validation_loss = current_val;
  best.validation_curve.push_back(current_val);
  int since_best = 0;

  int epoch = 0;
  while (epoch < config.max_epochs && since_best < config.patience) {
    ++epoch;

    if (success) {
      p_norm2 = p.squaredNorm();
      if (p_norm2 < opt.min_direction_norm2) break;
      const double sigma_k = opt.sigma / std::sqrt(p_norm2);
      probe.parameters() = model.parameters() + sigma_k * p;
      // s approximates H p from the gradient difference (gradient = -r).
      s = (gradient(probe, train) + r) / sigma_k;
      delta = p.dot(s);
    }

    delta += (lambda - lambda_bar) * p_norm2;
    if (delta <= 0.0) {
      // Make the Hessian approximation positive definite.
      lambda_bar = 2.0 * (lambda - delta / p_norm2);
      delta = -delta + lambda * p_norm2;
      lambda = lambda_bar;
    }

    const double mu = p.dot(r);
    const double alpha = mu / delta;
    probe.parameters() = model.parameters() + alpha * p;
    const double f_new = checked(loss(probe, train), epoch, "training loss");
    const double comparison = 2.0 * delta * (f - f_new) / (mu * mu);

    if (comparison >= 0.0) {
      std::swap(model, probe);
      f = f_new;
      lg = loss_and_gradient(model, train);
      const Eigen::VectorXd r_new = -lg.gradient;
      lambda_bar = 0.0;
      success = true;
      ++successes;
      if (successes % num_params == 0) {
        p = r_new;
      } else {
        const double beta = (r_new.squaredNorm() - r_new.dot(r)) / mu;
        p = r_new + beta * p;
      }
      r = r_new;
      if (p.dot(r) <= 0.0) p = r;  // lost descent; restart along steepest descent
      if (comparison >= 0.75) lambda = std::max(0.25 * lambda, opt.lambda_min);
      current_val = checked(loss(model, validation), epoch, "validation loss");
    } else {
      lambda_bar = lambda;
      success = false;
    }
    if (comparison < 0.25) lambda = std::min(lambda + delta * (1.0 - comparison) / p_norm2, opt.lambda_max);

    best.validation_curve.push_back(current_val);
    if (current_val < best.validation_loss) {
      best.validation_loss = current_val;
      best.model = model;
      best.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (success && r.squaredNorm() < opt.min_gradient_norm2) break;
  }
  best.epochs_run = epoch;
  if (!best.model.all_finite()) throw TrainingError("training produced non-finite weights", epoch);
  return best;
}

// Random initialization from config.init_seed followed by scg_fit.
inline TrainedModel scg_train(const MLPConfig& config, const Batch& train, const Batch& validation,
                              const ScgOptions& opt = {}) {
  config.validate();
  Rng rng(config.init_seed);
  MLPModel init = MLPModel::random(static_cast<int>(train.inputs.rows()), config.hidden_units,
                                   train.num_classes, rng);
  return scg_fit(std::move(init), config, train, validation, opt);
}

struct ValidationPartition {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> validation;
};

// Seeded unstratified hold-out of round(validation_fraction * n) examples.
inline ValidationPartition validation_partition(std::size_t n, const MLPConfig& config) {
  const std::size_t n_val = rounded_share(config.validation_fraction, n);
  if (n_val == 0 || n_val >= n)
    throw TrainingError("training set of " + std::to_string(n) +
                        " examples is too small for a validation split");
  auto perm = shuffled_indices(n, derive_seed(config.init_seed, {salt::kValidationSplit}));
  ValidationPartition out;
  out.validation.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.fit.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.fit.begin(), out.fit.end());
  return out;
}

inline MLPConfig restart_config(const MLPConfig& config, int restart) {
  MLPConfig c = config;
  c.init_seed = derive_seed(config.init_seed, {salt::kRestart, static_cast<std::uint64_t>(restart)});
  return c;
}

struct RestartOutcome {
  TrainedModel best;
  int best_restart = 0;
  std::vector<double> restart_validation_losses;  // +inf for aborted restarts
};

// Hold out a validation set, train num_restarts networks from different
// initial weights and keep the one with the lowest validation CE (lowest
// restart index on ties). Aborted restarts are skipped; if every restart
// aborts the last error is rethrown.
inline RestartOutcome train_with_restarts_detailed(const MLPConfig& config, const Batch& full_train,
                                                   const ScgOptions& opt = {}) {
  config.validate();
  const ValidationPartition part = validation_partition(full_train.size(), config);
  const Batch fit = select_columns(full_train, part.fit);
  const Batch val = select_columns(full_train, part.validation);

  RestartOutcome out;
  bool have_best = false;
  std::string last_error;
  int last_epoch = -1;
  for (int r = 0; r < config.num_restarts; ++r) {
    try {
      TrainedModel t = scg_train(restart_config(config, r), fit, val, opt);
      out.restart_validation_losses.push_back(t.validation_loss);
      if (!have_best || t.validation_loss < out.best.validation_loss) {
        out.best = std::move(t);
        out.best_restart = r;
        have_best = true;
      }
    } catch (const TrainingError& e) {
      out.restart_validation_losses.push_back(std::numeric_limits<double>::infinity());
      last_error = e.what();
      last_epoch = e.epoch();
    }
  }
  if (!have_best)
    throw TrainingError("all " + std::to_string(config.num_restarts) +
                            " training restarts aborted; last: " + last_error,
                        last_epoch);
  return out;
}

inline TrainedModel train_with_restarts(const MLPConfig& config, const Batch& full_train,
                                        const ScgOptions& opt = {}) {
  return train_with_restarts_detailed(config, full_train, opt).best;
}

// A trained network bundled with the normalization fitted on its training data.
struct NeuralClassifier {
  NormalizationStats normalization;
  MLPModel model;
  double validation_loss = 0.0;

  Eigen::VectorXd predict_proba(std::span<const double> x) const {
    return forward(model, normalization.apply(x));
  }

  // c x N probabilities for every example of `data`.
  Eigen::MatrixXd predict_proba(const Dataset& data) const {
    return forward_batch(model, to_batch(apply_normalization(normalization, data)).inputs);
  }
};

// One training session: normalize on `train`, then train_with_restarts.
inline NeuralClassifier fit_classifier(const MLPConfig& config, const Dataset& train) {
  NeuralClassifier clf;
  clf.normalization = fit_normalization(train);
  TrainedModel t = train_with_restarts(config, to_batch(apply_normalization(clf.normalization, train)));
  clf.model = std::move(t.model);
  clf.validation_loss = t.validation_loss;
  return clf;
}

}  // namespace nnvp
