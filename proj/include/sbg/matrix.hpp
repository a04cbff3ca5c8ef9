#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "sbg/error.hpp"

namespace sbg {

// Dense row-major matrix of doubles. Embedding tables and propagation
// buffers are all small enough at desk scale that a flat vector is the
// right representation; training math is hand-written loops over rows.
struct Matrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::int64_t r, std::int64_t c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r * c), fill) {}

  double* row(std::int64_t i) { return data.data() + i * cols; }
  const double* row(std::int64_t i) const { return data.data() + i * cols; }

  std::span<double> row_span(std::int64_t i) {
    return {row(i), static_cast<std::size_t>(cols)};
  }
  std::span<const double> row_span(std::int64_t i) const {
    return {row(i), static_cast<std::size_t>(cols)};
  }

  double& at(std::int64_t i, std::int64_t j) { return data[i * cols + j]; }
  double at(std::int64_t i, std::int64_t j) const { return data[i * cols + j]; }

  void set_zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline double norm2(std::span<const double> a) {
  return std::sqrt(dot(a, a));
}

// Order-independent compensated accumulator for metric aggregation.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - compensation_;
    const double t = sum_ + y;
    compensation_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace sbg
