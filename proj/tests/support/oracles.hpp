#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the code path it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "nnvp/mlp.hpp"
#include "nnvp/taxonomy.hpp"

namespace nnvp::testing {

// Straight-line forward pass reading weights element by element.
inline std::vector<double> forward_oracle(const MLPModel& m, const std::vector<double>& x) {
  const int d = m.num_inputs(), h = m.num_hidden(), c = m.num_outputs();
  const double* p = m.parameters().data();
  // layout: W1 (h x d, column-major), b1, W2 (c x h, column-major), b2
  const double* w1 = p;
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + c * h;
  std::vector<double> hidden(h);
  for (int u = 0; u < h; ++u) {
    double a = b1[u];
    for (int i = 0; i < d; ++i) a += w1[i * h + u] * x[i];
    hidden[u] = std::tanh(a);
  }
  std::vector<double> z(c);
  for (int k = 0; k < c; ++k) {
    double a = b2[k];
    for (int u = 0; u < h; ++u) a += w2[u * c + k] * hidden[u];
    z[k] = a;
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) sum += (v = std::exp(v - zmax));
  for (double& v : z) v /= sum;
  return z;
}

// Central finite differences of f at params, step h.
template <class F>
std::vector<double> finite_difference_gradient(F&& f, Eigen::VectorXd params, double h = 1e-5) {
  std::vector<double> g(static_cast<std::size_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + h;
    const double up = f(params);
    params[i] = orig - h;
    const double down = f(params);
    params[i] = orig;
    g[static_cast<std::size_t>(i)] = (up - down) / (2.0 * h);
  }
  return g;
}

// Buckets every column by its category, then reads off the label histogram
// of the bucket holding the last column.
inline std::vector<double> recount_category_distribution(const TaxonomyRule& rule,
                                                         const std::vector<std::vector<double>>& outputs,
                                                         const std::vector<int>& labels, int c) {
  std::map<CategoryKey, std::vector<int>> buckets;
  for (std::size_t i = 0; i < outputs.size(); ++i)
    buckets[category_of(rule, outputs[i])].push_back(labels[i]);
  const auto& members = buckets.at(category_of(rule, outputs.back()));
  std::vector<double> dist(static_cast<std::size_t>(c), 0.0);
  for (int y : members) dist[static_cast<std::size_t>(y)] += 1.0;
  for (double& v : dist) v /= static_cast<double>(members.size());
  return dist;
}

// Exact two-sided binomial p-value: twice the smaller tail, capped at 1.
inline double exact_binomial_pvalue(long errors, long n, double q) {
  auto pmf = [&](long k) {
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                    k * std::log(q) + (n - k) * std::log1p(-q));
  };
  double lower = 0.0, upper = 0.0;
  for (long k = 0; k <= errors; ++k) lower += pmf(k);
  for (long k = errors; k <= n; ++k) upper += pmf(k);
  return std::min(1.0, 2.0 * std::min(lower, upper));
}

// Reliability recomputed bin by bin from interval membership tests.
inline double reliability_oracle(const std::vector<std::vector<double>>& probs,
                                 const std::vector<int>& labels, int bins) {
  double total = 0.0;
  for (int k = 0; k < bins; ++k) {
    const double lo = static_cast<double>(k) / bins;
    const double hi = static_cast<double>(k + 1) / bins;
    double n = 0.0, hits = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i)
      for (std::size_t j = 0; j < probs[i].size(); ++j) {
        const double v = probs[i][j];
        const bool inside = v >= lo && (k == bins - 1 ? v <= hi : v < hi);
        if (!inside) continue;
        n += 1.0;
        if (labels[i] == static_cast<int>(j)) hits += 1.0;
      }
    if (n > 0.0) {
      const double r = (lo + hi) / 2.0;
      total += n * (r - hits / n) * (r - hits / n);
    }
  }
  return total / static_cast<double>(probs.size());
}

// Random probability vector with varied concentration (sometimes peaked,
// sometimes flat) so every taxonomy branch is exercised.
inline std::vector<double> random_probability_vector(int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> scale(0.1, 8.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const double s = scale(rng);
  std::vector<double> v(static_cast<std::size_t>(c));
  double sum = 0.0;
  for (double& x : v) sum += (x = std::exp(s * z(rng)));
  for (double& x : v) x /= sum;
  return v;
}

}  // namespace nnvp::testing
