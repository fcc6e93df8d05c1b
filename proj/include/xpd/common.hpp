#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace xpd {

inline constexpr const char* kToolVersion = "1.0.0";

// Error taxonomy. The CLI maps these onto exit codes 2/3/4.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& values() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double sigmoid(double margin) {
  if (margin >= 0) {
    return 1.0 / (1.0 + std::exp(-margin));
  }
  const double e = std::exp(margin);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Margin of a constant predictor at the given positive rate, clamped to
/// [1e-6, 1 - 1e-6] before the logit.
double base_margin(double positive_rate);

// Worker pool configuration. Every parallel loop writes results by index and
// reduces sequentially afterwards, so outputs do not depend on this value.
void set_worker_count(std::size_t n);
std::size_t worker_count();

/// Runs fn(i) for i in [0, n), splitting the range into contiguous chunks.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace xpd
