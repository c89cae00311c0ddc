#pragma once

#include "dds/types.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace dds {

// log sum_i exp(v_i), shifted by the max so it never overflows.
template <typename Derived>
double logsumexp(const Eigen::DenseBase<Derived>& v) {
  require(v.size() > 0, "logsumexp: empty input");
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.derived().array() - m).exp().sum());
}

// Column-wise log N(x; 0, var * I).
template <typename Derived>
RowVector log_normal_iso(const Eigen::MatrixBase<Derived>& x, double var) {
  const double d = static_cast<double>(x.rows());
  return (-0.5 / var) * x.colwise().squaredNorm().array() -
         0.5 * d * std::log(2.0 * std::numbers::pi * var);
}

inline double log_normal_1d(double x, double mean, double var) {
  const double z = x - mean;
  return -0.5 * z * z / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

// Numerically stable log(sigmoid(z)).
inline double log_sigmoid(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Linear-interpolation quantile (sorted-order statistics, type 7).
double quantile(std::vector<double> values, double q);

double mean(const std::vector<double>& values);

}  // namespace dds
