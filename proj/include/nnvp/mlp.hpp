#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nnvp/dataset.hpp"
#include "nnvp/random.hpp"

namespace nnvp {

// Probabilities are clamped to [kProbabilityFloor, 1] before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

struct MLPConfig {
  int hidden_units = 5;
  int num_restarts = 3;
  double validation_fraction = 0.30;
  int max_epochs = 200;
  int patience = 20;
  std::uint64_t init_seed = 0;

  void validate() const {
    if (hidden_units < 1) throw std::invalid_argument("hidden_units must be >= 1");
    if (num_restarts < 1) throw std::invalid_argument("num_restarts must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw std::invalid_argument("validation_fraction must lie in (0, 1)");
    if (max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
    if (patience < 0) throw std::invalid_argument("patience must be >= 0");
  }
};

// Column-per-example design matrix plus integer labels.
struct Batch {
  Eigen::MatrixXd inputs;  // d x N
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
};

inline Batch to_batch(const Dataset& data) {
  Batch b;
  b.num_classes = data.num_classes();
  b.inputs.resize(static_cast<Eigen::Index>(data.num_attributes()),
                  static_cast<Eigen::Index>(data.size()));
  b.labels.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Example& e = data[i];
    for (std::size_t j = 0; j < e.attributes.size(); ++j)
      b.inputs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = e.attributes[j];
    b.labels.push_back(e.label);
  }
  return b;
}

inline Batch select_columns(const Batch& b, std::span<const std::size_t> columns) {
  Batch out;
  out.num_classes = b.num_classes;
  out.inputs.resize(b.inputs.rows(), static_cast<Eigen::Index>(columns.size()));
  out.labels.reserve(columns.size());
  for (std::size_t k = 0; k < columns.size(); ++k) {
    out.inputs.col(static_cast<Eigen::Index>(k)) = b.inputs.col(static_cast<Eigen::Index>(columns[k]));
    out.labels.push_back(b.labels[columns[k]]);
  }
  return out;
}

// One-hot targets, one column per example.
inline Eigen::MatrixXd one_hot(std::span<const int> labels, int num_classes) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(num_classes, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw std::invalid_argument("one_hot: label out of range");
    t(labels[i], static_cast<Eigen::Index>(i)) = 1.0;
  }
  return t;
}

// Single-hidden-layer network: tanh hidden units, softmax outputs.
//
// All weights live in one flat vector so that the optimizer can treat the
// model as a point in R^P. Layout: input->hidden weights (hidden x inputs,
// column-major), hidden biases, hidden->output weights (outputs x hidden,
// column-major), output biases.
class MLPModel {
 public:
  MLPModel() = default;

  MLPModel(int num_inputs, int num_hidden, int num_outputs)
      : d_(num_inputs), h_(num_hidden), c_(num_outputs) {
    if (d_ < 1 || h_ < 1 || c_ < 2) throw std::invalid_argument("MLPModel: bad dimensions");
    params_ = Eigen::VectorXd::Zero(parameter_count(d_, h_, c_));
  }

  static Eigen::Index parameter_count(int d, int h, int c) {
    return static_cast<Eigen::Index>(h) * d + h + static_cast<Eigen::Index>(c) * h + c;
  }

  // Uniform in +-1/sqrt(fan_in) per layer; biases share their layer's range.
  static MLPModel random(int num_inputs, int num_hidden, int num_outputs, Rng& rng) {
    MLPModel m(num_inputs, num_hidden, num_outputs);
    std::uniform_real_distribution<double> in_dist(-1.0 / std::sqrt(double(num_inputs)),
                                                   1.0 / std::sqrt(double(num_inputs)));
    std::uniform_real_distribution<double> out_dist(-1.0 / std::sqrt(double(num_hidden)),
                                                    1.0 / std::sqrt(double(num_hidden)));
    const Eigen::Index first_layer = static_cast<Eigen::Index>(num_hidden) * num_inputs + num_hidden;
    for (Eigen::Index i = 0; i < m.params_.size(); ++i)
      m.params_[i] = i < first_layer ? in_dist(rng) : out_dist(rng);
    return m;
  }

  int num_inputs() const noexcept { return d_; }
  int num_hidden() const noexcept { return h_; }
  int num_outputs() const noexcept { return c_; }
  Eigen::Index num_parameters() const noexcept { return params_.size(); }

  Eigen::VectorXd& parameters() noexcept { return params_; }
  const Eigen::VectorXd& parameters() const noexcept { return params_; }

  Eigen::Map<Eigen::MatrixXd> input_weights() { return {params_.data(), h_, d_}; }
  Eigen::Map<const Eigen::MatrixXd> input_weights() const { return {params_.data(), h_, d_}; }
  Eigen::Map<Eigen::VectorXd> hidden_biases() { return {params_.data() + off_b1(), h_}; }
  Eigen::Map<const Eigen::VectorXd> hidden_biases() const { return {params_.data() + off_b1(), h_}; }
  Eigen::Map<Eigen::MatrixXd> output_weights() { return {params_.data() + off_w2(), c_, h_}; }
  Eigen::Map<const Eigen::MatrixXd> output_weights() const {
    return {params_.data() + off_w2(), c_, h_};
  }
  Eigen::Map<Eigen::VectorXd> output_biases() { return {params_.data() + off_b2(), c_}; }
  Eigen::Map<const Eigen::VectorXd> output_biases() const { return {params_.data() + off_b2(), c_}; }

  bool all_finite() const { return params_.allFinite(); }

 private:
  Eigen::Index off_b1() const { return static_cast<Eigen::Index>(h_) * d_; }
  Eigen::Index off_w2() const { return off_b1() + h_; }
  Eigen::Index off_b2() const { return off_w2() + static_cast<Eigen::Index>(c_) * h_; }

  int d_ = 0, h_ = 0, c_ = 0;
  Eigen::VectorXd params_;
};

namespace detail {

// Column-wise softmax in place, shifted by the column max for stability.
inline void softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    auto col = z.col(i);
    col.array() -= col.maxCoeff();
    col = col.array().exp().matrix();
    col /= col.sum();
  }
}

struct Activations {
  Eigen::MatrixXd hidden;   // h x N
  Eigen::MatrixXd outputs;  // c x N
};

inline Activations activations(const MLPModel& m, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != m.num_inputs())
    throw std::invalid_argument("forward: input has " + std::to_string(inputs.rows()) +
                                " attributes, model expects " + std::to_string(m.num_inputs()));
  Activations a;
  a.hidden = ((m.input_weights() * inputs).colwise() + m.hidden_biases()).array().tanh().matrix();
  a.outputs = (m.output_weights() * a.hidden).colwise() + m.output_biases();
  softmax_columns(a.outputs);
  return a;
}

}  // namespace detail

// Outputs for every column of `inputs` (d x N); returns c x N.
inline Eigen::MatrixXd forward_batch(const MLPModel& m, const Eigen::MatrixXd& inputs) {
  return detail::activations(m, inputs).outputs;
}

inline Eigen::VectorXd forward(const MLPModel& m, std::span<const double> x) {
  if (static_cast<int>(x.size()) != m.num_inputs())
    throw std::invalid_argument("forward: input has " + std::to_string(x.size()) +
                                " attributes, model expects " + std::to_string(m.num_inputs()));
  const Eigen::MatrixXd in =
      Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  return forward_batch(m, in).col(0);
}

// Summed (not averaged) cross-entropy against arbitrary target columns.
inline double cross_entropy(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
    throw std::invalid_argument("cross_entropy: outputs and targets differ in shape");
  double ce = 0.0;
  for (Eigen::Index i = 0; i < outputs.cols(); ++i)
    for (Eigen::Index j = 0; j < outputs.rows(); ++j)
      if (targets(j, i) != 0.0)
        ce -= targets(j, i) * std::log(std::clamp(outputs(j, i), kProbabilityFloor, 1.0));
  return ce;
}

inline double cross_entropy(const Eigen::MatrixXd& outputs, std::span<const int> labels) {
  if (static_cast<std::size_t>(outputs.cols()) != labels.size())
    throw std::invalid_argument("cross_entropy: outputs and labels differ in length");
  double ce = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    ce -= std::log(std::clamp(outputs(labels[i], static_cast<Eigen::Index>(i)), kProbabilityFloor, 1.0));
  return ce;
}

inline double loss(const MLPModel& m, const Batch& b) {
  return cross_entropy(forward_batch(m, b.inputs), b.labels);
}

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // same layout as MLPModel::parameters()
};

// Backpropagation for the clamped, summed cross-entropy. With softmax outputs
// the output-layer delta is (o - t); examples whose true-class probability
// sits below the clamp floor contribute a constant and hence zero gradient.
inline LossAndGradient loss_and_gradient(const MLPModel& m, const Batch& b) {
  if (b.size() == 0) throw std::invalid_argument("gradient: empty batch");
  if (b.num_classes != m.num_outputs())
    throw std::invalid_argument("gradient: batch has " + std::to_string(b.num_classes) +
                                " classes, model has " + std::to_string(m.num_outputs()));
  const detail::Activations a = detail::activations(m, b.inputs);

  LossAndGradient out;
  Eigen::MatrixXd delta_out = a.outputs;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const double p = a.outputs(b.labels[i], col);
    if (p < kProbabilityFloor) {
      out.loss -= std::log(kProbabilityFloor);
      delta_out.col(col).setZero();
    } else {
      out.loss -= std::log(p);
      delta_out(b.labels[i], col) -= 1.0;
    }
  }
  const Eigen::MatrixXd delta_hidden =
      ((m.output_weights().transpose() * delta_out).array() * (1.0 - a.hidden.array().square()))
          .matrix();

  MLPModel g(m.num_inputs(), m.num_hidden(), m.num_outputs());
  g.input_weights().noalias() = delta_hidden * b.inputs.transpose();
  g.hidden_biases() = delta_hidden.rowwise().sum();
  g.output_weights().noalias() = delta_out * a.hidden.transpose();
  g.output_biases() = delta_out.rowwise().sum();
  out.gradient = std::move(g.parameters());
  return out;
}

inline Eigen::VectorXd gradient(const MLPModel& m, const Batch& b) {
  return loss_and_gradient(m, b).gradient;
}

inline int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace nnvp
