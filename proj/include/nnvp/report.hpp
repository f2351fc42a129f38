#pragma once

#include <charconv>
#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nnvp/evaluation.hpp"
#include "nnvp/mlp.hpp"
#include "nnvp/venn.hpp"

namespace nnvp::report {

using json = nlohmann::json;

// Shortest decimal text that round-trips to the same double.
inline std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline json to_json(const ProbabilityInterval& iv) { return json::array({iv.lower, iv.upper}); }

inline json to_json(const PredictionResult& r, const std::vector<std::string>& class_names) {
  json intervals = json::array();
  for (const auto& iv : r.intervals) intervals.push_back(to_json(iv));
  return {
      {"predicted_class", class_names.at(static_cast<std::size_t>(r.predicted_label))},
      {"predicted_label", r.predicted_label},
      {"classes", class_names},
      {"mean_probabilities", r.mean_probs},
      {"intervals", intervals},
      {"error_interval", to_json(r.error_interval)},
  };
}

inline json to_json(const BatchMetrics& m) {
  return {{"accuracy", m.accuracy}, {"cross_entropy", m.cross_entropy}, {"brier", m.brier},
          {"reliability", m.reliability}, {"correct", m.correct}, {"total", m.total}};
}

inline json to_json(const BatchReport& rep) {
  json rows = json::array();
  for (const BatchRow& r : rep.rows) rows.push_back({{"method", r.method}, {"metrics", to_json(r.metrics)}});
  return {{"test_examples", rep.test_examples}, {"rows", rows}};
}

// Versioned debugging dump; not a stable interchange format.
inline json model_to_json(const MLPModel& m) {
  auto flat = [](const auto& block) {
    std::vector<double> v(static_cast<std::size_t>(block.size()));
    for (Eigen::Index i = 0; i < block.size(); ++i) v[static_cast<std::size_t>(i)] = block.data()[i];
    return v;
  };
  return {{"format", "nnvp-mlp"},
          {"version", 1},
          {"inputs", m.num_inputs()},
          {"hidden", m.num_hidden()},
          {"outputs", m.num_outputs()},
          {"layout", "column-major"},
          {"input_weights", flat(m.input_weights())},
          {"hidden_biases", flat(m.hidden_biases())},
          {"output_weights", flat(m.output_weights())},
          {"output_biases", flat(m.output_biases())}};
}

inline MLPModel model_from_json(const json& j) {
  if (j.at("format") != "nnvp-mlp" || j.at("version") != 1)
    throw std::invalid_argument("model_from_json: unsupported document");
  MLPModel m(j.at("inputs").get<int>(), j.at("hidden").get<int>(), j.at("outputs").get<int>());
  auto fill = [](auto block, const json& values) {
    const auto v = values.get<std::vector<double>>();
    if (v.size() != static_cast<std::size_t>(block.size()))
      throw std::invalid_argument("model_from_json: weight array has the wrong length");
    for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = v[static_cast<std::size_t>(i)];
  };
  fill(m.input_weights(), j.at("input_weights"));
  fill(m.hidden_biases(), j.at("hidden_biases"));
  fill(m.output_weights(), j.at("output_weights"));
  fill(m.output_biases(), j.at("output_biases"));
  return m;
}

inline std::string curves_csv(const VennCurves& c) {
  std::string out = "n,E_n,LEP_n,UEP_n\n";
  for (std::size_t i = 0; i < c.size(); ++i)
    out += std::to_string(i + 1) + ',' + std::to_string(c.errors[i]) + ',' + format_number(c.lower[i]) +
           ',' + format_number(c.upper[i]) + '\n';
  return out;
}

inline std::string curves_csv(const BaselineCurves& c) {
  std::string out = "n,E_n,EP_n\n";
  for (std::size_t i = 0; i < c.size(); ++i)
    out += std::to_string(i + 1) + ',' + std::to_string(c.errors[i]) + ',' + format_number(c.error_prob[i]) +
           '\n';
  return out;
}

// Aligned table with Accuracy / CE / BS / REL columns, one row per method.
inline std::string metrics_table(const BatchReport& rep, const std::string& title) {
  std::string out = title + "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %9s %9s %8s %8s\n", "Method", "Accuracy", "CE", "BS", "REL");
  out += line;
  for (const BatchRow& r : rep.rows) {
    const std::string name = r.method == "NN" ? "Traditional NN" : "NN-VP " + r.method;
    std::snprintf(line, sizeof line, "%-16s %8.2f%% %9.2f %8.4f %8.4f\n", name.c_str(),
                  100.0 * r.metrics.accuracy, r.metrics.cross_entropy, r.metrics.brier,
                  r.metrics.reliability);
    out += line;
  }
  return out;
}

}  // namespace nnvp::report
