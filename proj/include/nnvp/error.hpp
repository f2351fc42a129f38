#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nnvp {

// Malformed or inconsistent input data (CSV rows, label ranges, dataset shape).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when network training cannot produce a usable model.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch = -1)
      : std::runtime_error(what), epoch_(epoch) {}

  // SCG iteration at which the failure was detected, -1 when not applicable.
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace nnvp
