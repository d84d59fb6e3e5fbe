#include "mzo/stats.hpp"

#include <algorithm>

namespace mzo {

double RunningStats::variance() const {
  if (n < 2) return 0.0;
  const long double m = sum / n;
  const long double v = (sum_sq - n * m * m) / (n - 1);
  return static_cast<double>(std::max(v, 0.0L));
}

void VectorStats::add(const Vector& v) {
  if (coords.size() != static_cast<std::size_t>(v.size()))
    throw UsageError("VectorStats: dimension mismatch");
  for (Eigen::Index i = 0; i < v.size(); ++i) coords[static_cast<std::size_t>(i)].add(v[i]);
}

void VectorStats::merge(const VectorStats& o) {
  if (coords.empty()) coords.resize(o.coords.size());
  if (coords.size() != o.coords.size()) throw UsageError("VectorStats: dimension mismatch");
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i].merge(o.coords[i]);
}

Vector VectorStats::mean() const {
  Vector m(static_cast<Eigen::Index>(coords.size()));
  for (std::size_t i = 0; i < coords.size(); ++i) m[static_cast<Eigen::Index>(i)] = coords[i].mean();
  return m;
}

Vector VectorStats::standard_error() const {
  Vector s(static_cast<Eigen::Index>(coords.size()));
  for (std::size_t i = 0; i < coords.size(); ++i) s[static_cast<Eigen::Index>(i)] = coords[i].standard_error();
  return s;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("linear_fit: need two or more matching points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.r_squared = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 0.0;
  return f;
}

LinearFit loglog_fit(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) lx[i] = std::log(x[i]);
  for (std::size_t i = 0; i < y.size(); ++i) ly[i] = std::log(y[i]);
  return linear_fit(lx, ly);
}

}  // namespace mzo
