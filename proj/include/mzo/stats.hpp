#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mzo/common.hpp"

namespace mzo {

/// Count, sum and sum of squares; merging is associative.
struct RunningStats {
  std::uint64_t n = 0;
  long double sum = 0.0L;
  long double sum_sq = 0.0L;

  void add(double v) {
    ++n;
    sum += v;
    sum_sq += static_cast<long double>(v) * v;
  }
  void merge(const RunningStats& o) {
    n += o.n;
    sum += o.sum;
    sum_sq += o.sum_sq;
  }
  double mean() const { return n ? static_cast<double>(sum / n) : 0.0; }
  double second_moment() const { return n ? static_cast<double>(sum_sq / n) : 0.0; }
  double variance() const;  // unbiased
  double standard_error() const { return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

/// Componentwise RunningStats over vectors of a fixed length.
struct VectorStats {
  std::vector<RunningStats> coords;

  explicit VectorStats(std::size_t dim = 0) : coords(dim) {}
  void add(const Vector& v);
  void merge(const VectorStats& o);
  Vector mean() const;
  Vector standard_error() const;
  std::uint64_t count() const { return coords.empty() ? 0 : coords.front().n; }
};

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = a + b x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Slope of log y against log x.
LinearFit loglog_fit(std::span<const double> x, std::span<const double> y);

}  // namespace mzo
