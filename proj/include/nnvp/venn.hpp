#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nnvp/dataset.hpp"
#include "nnvp/error.hpp"
#include "nnvp/mlp.hpp"
#include "nnvp/parallel.hpp"
#include "nnvp/random.hpp"
#include "nnvp/scg.hpp"
#include "nnvp/taxonomy.hpp"

namespace nnvp {

// Row k holds the label distribution obtained when the new example is
// assumed to carry label k.
struct MultiProbability {
  Eigen::MatrixXd rows;  // c x c

  int num_classes() const noexcept { return static_cast<int>(rows.rows()); }
};

struct ProbabilityInterval {
  double lower = 0.0;
  double upper = 0.0;

  double width() const noexcept { return upper - lower; }
};

struct PredictionResult {
  int predicted_label = 0;
  std::vector<double> mean_probs;
  std::vector<ProbabilityInterval> intervals;  // [L(Y_j), U(Y_j)] per class
  ProbabilityInterval error_interval;          // [1 - U(y_hat), 1 - L(y_hat)]

  const ProbabilityInterval& predicted_interval() const { return intervals.at(predicted_label); }
};

// Network outputs for the whole extended set under every candidate label.
// outputs[k] is c x (l+1); column l belongs to the new example.
struct CandidateOutputs {
  std::vector<Eigen::MatrixXd> outputs;
  std::vector<int> train_labels;  // the l known labels
  int num_classes = 0;

  std::size_t training_passes() const noexcept { return outputs.size(); }
};

inline std::uint64_t candidate_seed(std::uint64_t base, int candidate) {
  return derive_seed(base, {salt::kVenn, static_cast<std::uint64_t>(candidate)});
}

// One training session per candidate label k: append (x_new, k), refit the
// normalization on that extended set, train with restarts, and record the
// network's outputs on all l+1 inputs. Candidates may run on `jobs` threads.
inline CandidateOutputs train_candidates(const Dataset& train, std::span<const double> x_new,
                                         const MLPConfig& config, std::uint64_t seed, int jobs = 1) {
  if (train.empty()) throw std::invalid_argument("venn: empty training set");
  if (x_new.size() != train.num_attributes())
    throw std::invalid_argument("venn: new example has " + std::to_string(x_new.size()) +
                                " attributes, training set has " +
                                std::to_string(train.num_attributes()));
  const int c = train.num_classes();
  CandidateOutputs out;
  out.num_classes = c;
  out.train_labels = train.labels();
  out.outputs.resize(static_cast<std::size_t>(c));

  const std::vector<double> x(x_new.begin(), x_new.end());
  parallel_for(static_cast<std::size_t>(c), jobs, [&](std::size_t k) {
    const Dataset extended = train.with({x, static_cast<int>(k)});
    const NormalizationStats stats = fit_normalization(extended);
    const Batch batch = to_batch(apply_normalization(stats, extended));
    MLPConfig cfg = config;
    cfg.init_seed = candidate_seed(seed, static_cast<int>(k));
    try {
      const TrainedModel trained = train_with_restarts(cfg, batch);
      out.outputs[k] = forward_batch(trained.model, batch.inputs);
    } catch (const TrainingError& e) {
      throw TrainingError("venn: training failed for candidate label " + std::to_string(k) + ": " +
                              e.what(),
                          e.epoch());
    }
  });
  return out;
}

// Label frequencies inside the category of the last column of `outputs`
// (the new example), counting that example itself with its assumed label.
// `labels` has one entry per column.
inline std::vector<double> category_distribution(const TaxonomyRule& rule,
                                                 const Eigen::MatrixXd& outputs,
                                                 std::span<const int> labels, int num_classes) {
  if (static_cast<std::size_t>(outputs.cols()) != labels.size() || labels.empty())
    throw std::invalid_argument("venn: outputs and labels differ in length");
  const auto column = [&](Eigen::Index i) {
    return std::span<const double>(outputs.col(i).data(), static_cast<std::size_t>(outputs.rows()));
  };
  const Eigen::Index last = outputs.cols() - 1;
  const CategoryKey target = category_of(rule, column(last));

  std::vector<double> counts(static_cast<std::size_t>(num_classes), 0.0);
  std::size_t members = 0;
  for (Eigen::Index i = 0; i <= last; ++i) {
    if (category_of(rule, column(i)) != target) continue;
    ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    ++members;
  }
  // members >= 1: the new example always falls in its own category.
  for (double& v : counts) v /= static_cast<double>(members);
  return counts;
}

inline MultiProbability multiprobability(const CandidateOutputs& cand, const TaxonomyRule& rule) {
  const int c = cand.num_classes;
  rule.validate(c);
  if (cand.outputs.size() != static_cast<std::size_t>(c))
    throw std::invalid_argument("venn: expected one output matrix per candidate label");
  MultiProbability p{Eigen::MatrixXd(c, c)};
  std::vector<int> labels = cand.train_labels;
  labels.push_back(0);
  for (int k = 0; k < c; ++k) {
    labels.back() = k;
    const auto row = category_distribution(rule, cand.outputs[static_cast<std::size_t>(k)], labels, c);
    for (int j = 0; j < c; ++j) p.rows(k, j) = row[static_cast<std::size_t>(j)];
  }
  return p;
}

inline MultiProbability multiprobability(const Dataset& train, std::span<const double> x_new,
                                         const TaxonomyRule& rule, const MLPConfig& config,
                                         std::uint64_t seed, int jobs = 1) {
  rule.validate(train.num_classes());
  return multiprobability(train_candidates(train, x_new, config, seed, jobs), rule);
}

inline constexpr double kRowSumTolerance = 1e-9;

// Per-class [min_k, max_k] intervals, mean over candidates, argmax of the
// mean (lowest index on ties) and the complementary error interval.
inline PredictionResult aggregate(const MultiProbability& p) {
  const int c = p.num_classes();
  if (c < 2 || p.rows.cols() != c) throw std::invalid_argument("aggregate: matrix must be c x c, c >= 2");
  for (int k = 0; k < c; ++k) {
    const double sum = p.rows.row(k).sum();
    if (std::abs(sum - 1.0) > kRowSumTolerance || p.rows.row(k).minCoeff() < 0.0)
      throw std::invalid_argument("aggregate: row " + std::to_string(k) + " is not a distribution");
  }
  PredictionResult r;
  r.mean_probs.resize(static_cast<std::size_t>(c));
  r.intervals.resize(static_cast<std::size_t>(c));
  for (int j = 0; j < c; ++j) {
    const auto col = p.rows.col(j);
    r.intervals[static_cast<std::size_t>(j)] = {col.minCoeff(), col.maxCoeff()};
    r.mean_probs[static_cast<std::size_t>(j)] = col.mean();
  }
  r.predicted_label = argmax(r.mean_probs);
  const ProbabilityInterval& best = r.predicted_interval();
  r.error_interval = {1.0 - best.upper, 1.0 - best.lower};
  return r;
}

inline PredictionResult predict(const Dataset& train, std::span<const double> x_new,
                                const TaxonomyRule& rule, const MLPConfig& config,
                                std::uint64_t seed, int jobs = 1) {
  return aggregate(multiprobability(train, x_new, rule, config, seed, jobs));
}

// Several taxonomies over one set of trained networks. The taxonomy does not
// influence training, so the c training sessions are shared.
inline std::vector<PredictionResult> predict_all(const CandidateOutputs& cand,
                                                 std::span<const TaxonomyRule> rules) {
  std::vector<PredictionResult> out;
  out.reserve(rules.size());
  for (const TaxonomyRule& rule : rules) out.push_back(aggregate(multiprobability(cand, rule)));
  return out;
}

}  // namespace nnvp
