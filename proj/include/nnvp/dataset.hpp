#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nnvp/error.hpp"
#include "nnvp/random.hpp"

namespace nnvp {

struct Example {
  std::vector<double> attributes;
  int label = 0;
};

// Classification dataset: d real attributes per example, labels in [0, c).
// Immutable once constructed; derived sets are built with subset()/with().
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<Example> examples, std::size_t num_attributes,
          std::vector<std::string> class_names)
      : examples_(std::move(examples)),
        num_attributes_(num_attributes),
        class_names_(std::move(class_names)) {
    if (num_attributes_ < 1) throw std::invalid_argument("dataset needs at least one attribute");
    if (class_names_.size() < 2) throw std::invalid_argument("dataset needs at least two classes");
    for (std::size_t i = 0; i < examples_.size(); ++i) {
      const Example& e = examples_[i];
      if (e.attributes.size() != num_attributes_)
        throw std::invalid_argument("example " + std::to_string(i) + " has " +
                                    std::to_string(e.attributes.size()) + " attributes, expected " +
                                    std::to_string(num_attributes_));
      if (e.label < 0 || static_cast<std::size_t>(e.label) >= class_names_.size())
        throw std::invalid_argument("example " + std::to_string(i) + " has label " +
                                    std::to_string(e.label) + " outside [0, " +
                                    std::to_string(class_names_.size()) + ")");
    }
  }

  std::size_t size() const noexcept { return examples_.size(); }
  bool empty() const noexcept { return examples_.empty(); }
  std::size_t num_attributes() const noexcept { return num_attributes_; }
  int num_classes() const noexcept { return static_cast<int>(class_names_.size()); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  std::span<const Example> examples() const noexcept { return examples_; }
  const Example& operator[](std::size_t i) const { return examples_[i]; }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(class_names_.size(), 0);
    for (const Example& e : examples_) ++counts[static_cast<std::size_t>(e.label)];
    return counts;
  }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(examples_.size());
    for (const Example& e : examples_) out.push_back(e.label);
    return out;
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    std::vector<Example> picked;
    picked.reserve(indices.size());
    for (std::size_t i : indices) picked.push_back(examples_.at(i));
    return Dataset(std::move(picked), num_attributes_, class_names_);
  }

  // Copy with one more example appended.
  Dataset with(Example extra) const {
    std::vector<Example> all = examples_;
    all.push_back(std::move(extra));
    return Dataset(std::move(all), num_attributes_, class_names_);
  }

 private:
  std::vector<Example> examples_;
  std::size_t num_attributes_ = 0;
  std::vector<std::string> class_names_;
};

// ---------------------------------------------------------------------------
// CSV loading
// ---------------------------------------------------------------------------

// Attributes occupy every column but the last; the label is the final column.
struct CsvSchema {
  bool has_header = false;
  char delimiter = ',';
  // When set, rows must carry exactly this many attribute columns.
  std::optional<std::size_t> num_attributes;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto not_space = [](char ch) { return ch != ' ' && ch != '\t' && ch != '\r' && ch != '\n'; };
  while (!s.empty() && !not_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && !not_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace detail

// Parses CSV text. `source` names the input in error messages. Row numbers in
// errors are 1-based physical line numbers.
inline Dataset parse_csv(std::istream& in, const CsvSchema& schema = {},
                         const std::string& source = "<input>") {
  std::vector<Example> examples;
  std::vector<std::string> class_names;
  std::map<std::string, int, std::less<>> class_index;
  std::optional<std::size_t> width = schema.num_attributes;

  std::string line;
  std::size_t row = 0;
  bool header_pending = schema.has_header;
  while (std::getline(in, line)) {
    ++row;
    const std::string_view content = detail::trim(line);
    if (content.empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto fields = detail::split_fields(content, schema.delimiter);
    if (fields.size() < 2)
      throw DataError(source + ": row " + std::to_string(row) +
                      ": expected at least one attribute and a label");
    const std::size_t d = fields.size() - 1;
    if (!width) width = d;
    if (d != *width)
      throw DataError(source + ": row " + std::to_string(row) + ": expected " +
                      std::to_string(*width + 1) + " columns, found " +
                      std::to_string(fields.size()));

    Example ex;
    ex.attributes.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
      const auto v = detail::parse_double(fields[j]);
      if (!v)
        throw DataError(source + ": row " + std::to_string(row) + ": column " +
                        std::to_string(j + 1) + " is not numeric: '" + std::string(fields[j]) + "'");
      ex.attributes.push_back(*v);
    }
    const std::string_view label = fields.back();
    if (label.empty())
      throw DataError(source + ": row " + std::to_string(row) + ": missing label");
    auto it = class_index.find(label);
    if (it == class_index.end()) {
      it = class_index.emplace(std::string(label), static_cast<int>(class_names.size())).first;
      class_names.emplace_back(label);
    }
    ex.label = it->second;
    examples.push_back(std::move(ex));
  }

  if (examples.empty()) throw DataError(source + ": no data rows");
  if (class_names.size() < 2)
    throw DataError(source + ": need at least two distinct labels, found " +
                    std::to_string(class_names.size()));
  return Dataset(std::move(examples), *width, std::move(class_names));
}

inline Dataset load_csv(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse_csv(in, schema, path);
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

// Per-attribute z-score parameters. Population standard deviation; a
// zero-variance attribute stores std_dev 1 and therefore maps to constant 0.
struct NormalizationStats {
  std::vector<double> means;
  std::vector<double> std_devs;

  void apply_in_place(std::span<double> x) const {
    if (x.size() != means.size())
      throw std::invalid_argument("normalization: attribute count " + std::to_string(x.size()) +
                                  " != " + std::to_string(means.size()));
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - means[j]) / std_devs[j];
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(x.begin(), x.end());
    apply_in_place(out);
    return out;
  }

  std::vector<double> invert(std::span<const double> z) const {
    if (z.size() != means.size())
      throw std::invalid_argument("normalization: attribute count mismatch");
    std::vector<double> out(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] * std_devs[j] + means[j];
    return out;
  }
};

inline NormalizationStats fit_normalization(const Dataset& train) {
  if (train.empty()) throw std::invalid_argument("fit_normalization: empty training set");
  const std::size_t d = train.num_attributes();
  const double n = static_cast<double>(train.size());
  NormalizationStats stats{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (const Example& e : train.examples())
    for (std::size_t j = 0; j < d; ++j) stats.means[j] += e.attributes[j];
  for (double& m : stats.means) m /= n;
  for (const Example& e : train.examples())
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = e.attributes[j] - stats.means[j];
      stats.std_devs[j] += dev * dev;
    }
  for (double& s : stats.std_devs) {
    s = std::sqrt(s / n);
    if (!(s > 0.0)) s = 1.0;
  }
  return stats;
}

inline Dataset apply_normalization(const NormalizationStats& stats, const Dataset& data) {
  if (data.num_attributes() != stats.means.size())
    throw std::invalid_argument("apply_normalization: dataset has " +
                                std::to_string(data.num_attributes()) + " attributes, stats have " +
                                std::to_string(stats.means.size()));
  std::vector<Example> out(data.examples().begin(), data.examples().end());
  for (Example& e : out) stats.apply_in_place(e.attributes);
  return Dataset(std::move(out), data.num_attributes(), data.class_names());
}

inline Dataset invert_normalization(const NormalizationStats& stats, const Dataset& data) {
  std::vector<Example> out;
  out.reserve(data.size());
  for (const Example& e : data.examples()) out.push_back({stats.invert(e.attributes), e.label});
  return Dataset(std::move(out), data.num_attributes(), data.class_names());
}

// ---------------------------------------------------------------------------
// Splitting and streaming
// ---------------------------------------------------------------------------

// round-half-up of fraction * n
inline std::size_t rounded_share(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

struct SplitPlan {
  std::uint64_t seed = 0;
  double test_fraction = 0.10;
  int num_repeats = 10;
};

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

inline SplitIndices split_indices(std::size_t n, const SplitPlan& plan, int repeat_index) {
  if (plan.num_repeats < 1) throw std::invalid_argument("split: num_repeats must be >= 1");
  if (repeat_index < 0 || repeat_index >= plan.num_repeats)
    throw std::invalid_argument("split: repeat_index " + std::to_string(repeat_index) +
                                " out of range");
  if (!(plan.test_fraction > 0.0 && plan.test_fraction < 1.0))
    throw std::invalid_argument("split: test_fraction must lie in (0, 1)");
  const std::size_t test_size = rounded_share(plan.test_fraction, n);
  if (test_size == 0 || test_size >= n)
    throw std::invalid_argument("split: fraction " + std::to_string(plan.test_fraction) + " of " +
                                std::to_string(n) + " examples leaves an empty train or test set");
  auto perm = shuffled_indices(
      n, derive_seed(plan.seed, {salt::kSplit, static_cast<std::uint64_t>(repeat_index)}));
  SplitIndices out;
  out.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(test_size));
  out.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(test_size), perm.end());
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

inline std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitPlan& plan,
                                         int repeat_index) {
  const SplitIndices idx = split_indices(dataset.size(), plan, repeat_index);
  return {dataset.subset(idx.train), dataset.subset(idx.test)};
}

// On-line presentation of a dataset: one seeded shuffle up front, then at
// step n (n = initial_size+1 .. N) the first n-1 examples form the training
// set and example n is predicted.
class OnlineStream {
 public:
  struct Step {
    std::size_t position;  // 1-based index of the predicted example in stream order
    Dataset train;
    Example next;
  };

  OnlineStream(const Dataset& dataset, std::size_t initial_size, std::uint64_t seed)
      : dataset_(&dataset), initial_size_(initial_size) {
    if (initial_size >= dataset.size())
      throw std::invalid_argument("online stream: initial size " + std::to_string(initial_size) +
                                  " must be smaller than the dataset (" +
                                  std::to_string(dataset.size()) + ")");
    if (initial_size == 0) throw std::invalid_argument("online stream: initial size must be >= 1");
    order_ = shuffled_indices(dataset.size(), derive_seed(seed, {salt::kOnlineOrder}));
  }

  std::size_t num_steps() const noexcept { return dataset_->size() - initial_size_; }
  const std::vector<std::size_t>& order() const noexcept { return order_; }

  // step_index in [0, num_steps())
  Step step(std::size_t step_index) const {
    if (step_index >= num_steps()) throw std::out_of_range("online stream: step out of range");
    const std::size_t train_size = initial_size_ + step_index;
    std::span<const std::size_t> prefix(order_.data(), train_size);
    return {train_size + 1, dataset_->subset(prefix), (*dataset_)[order_[train_size]]};
  }

 private:
  const Dataset* dataset_;
  std::size_t initial_size_;
  std::vector<std::size_t> order_;
};

}  // namespace nnvp
