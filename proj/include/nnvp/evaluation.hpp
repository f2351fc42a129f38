#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nnvp/dataset.hpp"
#include "nnvp/mlp.hpp"
#include "nnvp/parallel.hpp"
#include "nnvp/random.hpp"
#include "nnvp/scg.hpp"
#include "nnvp/taxonomy.hpp"
#include "nnvp/venn.hpp"

namespace nnvp {

// ---------------------------------------------------------------------------
// On-line protocol
// ---------------------------------------------------------------------------

struct OnlineOptions {
  std::size_t initial_size = 50;
  std::uint64_t seed = 0;
  // Stop after this many predictions (a prefix of the stream).
  std::optional<std::size_t> max_steps;
  int jobs = 1;
  // Called after each step with (steps done, steps total).
  std::function<void(std::size_t, std::size_t)> progress;
};

// Cumulative curves of a Venn predictor; entry n-1 holds the value after n
// predictions.
struct VennCurves {
  TaxonomyRule rule;
  std::vector<long> errors;    // E_n
  std::vector<double> lower;   // LEP_n, sum of 1 - U(y_hat)
  std::vector<double> upper;   // UEP_n, sum of 1 - L(y_hat)

  std::size_t size() const noexcept { return errors.size(); }

  void record(const PredictionResult& res, int true_label) {
    const ProbabilityInterval& iv = res.predicted_interval();
    errors.push_back((errors.empty() ? 0 : errors.back()) + (res.predicted_label != true_label ? 1 : 0));
    lower.push_back((lower.empty() ? 0.0 : lower.back()) + (1.0 - iv.upper));
    upper.push_back((upper.empty() ? 0.0 : upper.back()) + (1.0 - iv.lower));
  }

  bool final_contained() const {
    if (errors.empty()) return true;
    const double e = static_cast<double>(errors.back());
    return lower.back() <= e && e <= upper.back();
  }
};

// Cumulative curves of the plain network.
struct BaselineCurves {
  std::vector<long> errors;           // E_n
  std::vector<double> error_prob;     // EP_n, sum of 1 - max_j o_j
  std::vector<double> step_error_prob;  // per-step 1 - max_j o_j

  std::size_t size() const noexcept { return errors.size(); }

  // `outputs` is the network's probability vector for the predicted example.
  void record(std::span<const double> outputs, int true_label) {
    const int predicted = argmax(outputs);
    const double q = 1.0 - outputs[static_cast<std::size_t>(predicted)];
    errors.push_back((errors.empty() ? 0 : errors.back()) + (predicted != true_label ? 1 : 0));
    step_error_prob.push_back(q);
    error_prob.push_back((error_prob.empty() ? 0.0 : error_prob.back()) + q);
  }
};

inline std::size_t online_step_count(const OnlineStream& stream, const OnlineOptions& opt) {
  const std::size_t n = stream.num_steps();
  return opt.max_steps ? std::min(n, *opt.max_steps) : n;
}

// All rules share each step's c training sessions; the training set grows
// with true labels, so predictions of one rule never affect another.
inline std::vector<VennCurves> run_online_vp(const Dataset& dataset, std::span<const TaxonomyRule> rules,
                                             const MLPConfig& config, const OnlineOptions& opt = {}) {
  for (const TaxonomyRule& r : rules) r.validate(dataset.num_classes());
  const OnlineStream stream(dataset, opt.initial_size, opt.seed);
  const std::size_t steps = online_step_count(stream, opt);

  std::vector<VennCurves> curves;
  for (const TaxonomyRule& r : rules) curves.push_back({r, {}, {}, {}});

  for (std::size_t s = 0; s < steps; ++s) {
    const OnlineStream::Step step = stream.step(s);
    const CandidateOutputs cand =
        train_candidates(step.train, step.next.attributes, config,
                         derive_seed(opt.seed, {salt::kVenn, static_cast<std::uint64_t>(s)}), opt.jobs);
    const std::vector<PredictionResult> results = predict_all(cand, rules);
    for (std::size_t r = 0; r < rules.size(); ++r) curves[r].record(results[r], step.next.label);
    if (opt.progress) opt.progress(s + 1, steps);
  }
  return curves;
}

inline VennCurves run_online_vp(const Dataset& dataset, const TaxonomyRule& rule, const MLPConfig& config,
                                const OnlineOptions& opt = {}) {
  return run_online_vp(dataset, std::span<const TaxonomyRule>(&rule, 1), config, opt).front();
}

inline BaselineCurves run_online_nn(const Dataset& dataset, const MLPConfig& config,
                                    const OnlineOptions& opt = {}) {
  const OnlineStream stream(dataset, opt.initial_size, opt.seed);
  const std::size_t steps = online_step_count(stream, opt);
  BaselineCurves c;
  for (std::size_t s = 0; s < steps; ++s) {
    const OnlineStream::Step step = stream.step(s);
    MLPConfig cfg = config;
    cfg.init_seed = derive_seed(opt.seed, {salt::kBaseline, static_cast<std::uint64_t>(s)});
    const NeuralClassifier clf = fit_classifier(cfg, step.train);
    const Eigen::VectorXd o = clf.predict_proba(step.next.attributes);
    c.record(std::span<const double>(o.data(), static_cast<std::size_t>(o.size())), step.next.label);
    if (opt.progress) opt.progress(s + 1, steps);
  }
  return c;
}

struct PValue {
  double value = 1.0;
  bool degenerate = false;  // zero variance: value is exactly 0 or 1
};

// Two-sided p-value of observing `errors` mistakes when step i errs
// independently with probability q_i. Normal approximation to the
// Poisson-binomial with continuity correction, capped at 1.
inline PValue two_sided_pvalue(long errors, std::span<const double> q) {
  double mean = 0.0, var = 0.0;
  for (double qi : q) {
    if (!(qi >= 0.0 && qi <= 1.0)) throw std::invalid_argument("two_sided_pvalue: q_i outside [0, 1]");
    mean += qi;
    var += qi * (1.0 - qi);
  }
  const double deviation = std::abs(static_cast<double>(errors) - mean);
  if (!(var > 0.0)) return {deviation < 1e-9 ? 1.0 : 0.0, true};
  const double z = (deviation - 0.5) / std::sqrt(var);
  if (z <= 0.0) return {1.0, false};
  return {std::min(1.0, std::erfc(z / std::sqrt(2.0))), false};
}

// ---------------------------------------------------------------------------
// Batch metrics
// ---------------------------------------------------------------------------

struct BatchMetrics {
  double accuracy = 0.0;
  double cross_entropy = 0.0;  // summed over examples
  double brier = 0.0;          // mean over examples
  double reliability = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

namespace detail {

inline void require_probability_columns(const Eigen::MatrixXd& probs, std::span<const int> labels) {
  if (static_cast<std::size_t>(probs.cols()) != labels.size())
    throw std::invalid_argument("metrics: probabilities and labels differ in length");
  for (int y : labels)
    if (y < 0 || y >= probs.rows()) throw std::invalid_argument("metrics: label out of range");
}

}  // namespace detail

// Reliability term of the Brier decomposition over K equal-width bins with
// midpoints r_k: (1/N) sum_k n_k (r_k - phi_k)^2, where every one of the N*c
// outputs is binned and phi_k is the fraction of bin k whose indicator is 1.
inline double reliability(const Eigen::MatrixXd& probs, std::span<const int> labels, int bins) {
  if (bins < 1) throw std::invalid_argument("reliability: need at least one bin");
  detail::require_probability_columns(probs, labels);
  if (labels.empty()) return 0.0;
  std::vector<double> count(static_cast<std::size_t>(bins), 0.0), hits(static_cast<std::size_t>(bins), 0.0);
  for (Eigen::Index i = 0; i < probs.cols(); ++i)
    for (Eigen::Index j = 0; j < probs.rows(); ++j) {
      const double v = probs(j, i);
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("reliability: output outside [0, 1]");
      const auto k = static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(v * bins)));
      count[k] += 1.0;
      if (labels[static_cast<std::size_t>(i)] == j) hits[k] += 1.0;
    }
  double rel = 0.0;
  for (std::size_t k = 0; k < count.size(); ++k) {
    if (count[k] == 0.0) continue;
    const double r = (static_cast<double>(k) + 0.5) / bins;
    const double phi = hits[k] / count[k];
    rel += count[k] * (r - phi) * (r - phi);
  }
  return rel / static_cast<double>(labels.size());
}

inline double brier_score(const Eigen::MatrixXd& probs, std::span<const int> labels) {
  detail::require_probability_columns(probs, labels);
  if (labels.empty()) return 0.0;
  return (probs - one_hot(labels, static_cast<int>(probs.rows()))).squaredNorm() /
         static_cast<double>(labels.size());
}

// probs is c x N, one probability column per test example.
inline BatchMetrics compute_metrics(const Eigen::MatrixXd& probs, std::span<const int> labels, int bins) {
  detail::require_probability_columns(probs, labels);
  BatchMetrics m;
  m.total = labels.size();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto col = probs.col(static_cast<Eigen::Index>(i));
    if (argmax(std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))) == labels[i])
      ++m.correct;
  }
  m.accuracy = m.total ? static_cast<double>(m.correct) / static_cast<double>(m.total) : 0.0;
  m.cross_entropy = cross_entropy(probs, labels);
  m.brier = brier_score(probs, labels);
  m.reliability = reliability(probs, labels, bins);
  return m;
}

// ---------------------------------------------------------------------------
// Batch protocol
// ---------------------------------------------------------------------------

struct BatchOptions {
  int bins = 100;
  std::uint64_t seed = 0;  // training seeds; the split seed lives in SplitPlan
  int jobs = 1;
  std::function<void(std::size_t, std::size_t)> progress;  // (test examples done, total)
};

struct BatchRow {
  std::string method;  // "NN" or the taxonomy name
  BatchMetrics metrics;
};

struct BatchReport {
  std::vector<BatchRow> rows;  // baseline first, then one row per rule
  std::size_t test_examples = 0;
  std::vector<int> labels;                    // pooled test labels
  std::vector<Eigen::MatrixXd> probabilities;  // pooled c x N outputs, one per row
};

// For every repeat: the baseline network is trained on the train split and
// applied to the test split; each test example is then predicted by the Venn
// predictor (shared trainings across rules) using the mean probabilities as
// its output. Metrics are computed on the union of all test sets.
inline BatchReport run_batch(const Dataset& dataset, std::span<const TaxonomyRule> rules,
                             const MLPConfig& config, const SplitPlan& plan, const BatchOptions& opt = {}) {
  for (const TaxonomyRule& r : rules) r.validate(dataset.num_classes());
  const int c = dataset.num_classes();
  const std::size_t test_size = rounded_share(plan.test_fraction, dataset.size());
  const std::size_t total = test_size * static_cast<std::size_t>(plan.num_repeats);

  BatchReport rep;
  rep.test_examples = total;
  rep.probabilities.assign(rules.size() + 1, Eigen::MatrixXd(c, static_cast<Eigen::Index>(total)));
  rep.labels.reserve(total);

  std::size_t done = 0;
  for (int repeat = 0; repeat < plan.num_repeats; ++repeat) {
    const auto [train, test] = split(dataset, plan, repeat);
    const std::size_t offset = rep.labels.size();
    for (const Example& e : test.examples()) rep.labels.push_back(e.label);

    MLPConfig base_cfg = config;
    base_cfg.init_seed = derive_seed(opt.seed, {salt::kBaseline, static_cast<std::uint64_t>(repeat)});
    const NeuralClassifier baseline = fit_classifier(base_cfg, train);
    rep.probabilities[0].middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(test.size())) =
        baseline.predict_proba(test);

    if (rules.empty()) continue;
    // Parallelism is across test examples; each one trains its c candidates serially.
    parallel_for(test.size(), opt.jobs, [&](std::size_t t) {
      const std::uint64_t seed =
          derive_seed(opt.seed, {salt::kVenn, static_cast<std::uint64_t>(repeat), static_cast<std::uint64_t>(t)});
      const CandidateOutputs cand = train_candidates(train, test[t].attributes, config, seed, 1);
      const std::vector<PredictionResult> results = predict_all(cand, rules);
      for (std::size_t r = 0; r < rules.size(); ++r)
        for (int j = 0; j < c; ++j)
          rep.probabilities[r + 1](j, static_cast<Eigen::Index>(offset + t)) =
              results[r].mean_probs[static_cast<std::size_t>(j)];
    });
    done += test.size();
    if (opt.progress) opt.progress(done, total);
  }

  rep.rows.push_back({"NN", compute_metrics(rep.probabilities[0], rep.labels, opt.bins)});
  for (std::size_t r = 0; r < rules.size(); ++r)
    rep.rows.push_back({rules[r].name(), compute_metrics(rep.probabilities[r + 1], rep.labels, opt.bins)});
  return rep;
}

}  // namespace nnvp
