#pragma once

#include "dds/autodiff.hpp"
#include "dds/dataset.hpp"
#include "dds/types.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dds {

class RngStream;

// Unnormalized density gamma = Z * pi. All evaluations are batched: `x` holds
// one state per column and results are returned per column.
class TargetDensity {
 public:
  virtual ~TargetDensity() = default;

  virtual int dim() const = 0;
  virtual std::string name() const = 0;
  virtual RowVector log_gamma(const Matrix& x) const = 0;
  virtual Matrix grad_log_gamma(const Matrix& x) const = 0;
  virtual std::optional<double> exact_log_z() const { return std::nullopt; }

  double log_gamma(const Vector& x) const { return log_gamma(Matrix(x))(0); }
  Vector grad_log_gamma(const Vector& x) const { return grad_log_gamma(Matrix(x)).col(0); }
};

using TargetPtr = std::shared_ptr<const TargetDensity>;

TargetPtr gaussian_target(Vector mu, double sigma2);
TargetPtr funnel_target();
TargetPtr mixture_target(std::vector<Vector> means, std::vector<double> weights, double sigma2);
TargetPtr logistic_regression_target(Dataset data, double sigma_w2 = 1.0, bool intercept = true);

struct BrownianObservations {
  static constexpr int kSteps = 30;
  Vector values = Vector::Zero(kSteps);
  std::vector<bool> observed = std::vector<bool>(kSteps, false);

  // Observed indices {1..10} and {20..30} (1-based).
  static std::vector<bool> default_mask();
};

// State: x_1..x_30, log(innovation scale), log(observation scale).
TargetPtr brownian_target(const BrownianObservations& obs);
// Linear-Gaussian reduction with both scales held fixed (state x_1..x_30).
TargetPtr brownian_fixed_scales_target(const BrownianObservations& obs, double innovation_scale,
                                       double observation_scale);
// Log marginal likelihood of the observations under fixed scales (Kalman filter).
double brownian_kalman_log_evidence(const BrownianObservations& obs, double innovation_scale,
                                    double observation_scale);
BrownianObservations synthetic_brownian_observations(RngStream& rng, double innovation_scale,
                                                     double observation_scale);

struct LgcpParams {
  int grid_side = 8;
  double variance = 1.91;
  double length_scale = 1.0 / 33.0;
  // Defaults derived from the other fields when left unset.
  std::optional<double> mean;
  std::optional<double> area;

  double resolved_mean() const;
  double resolved_area() const;
};

Matrix lgcp_covariance(const LgcpParams& params);
TargetPtr lgcp_target(const LgcpParams& params, Vector counts);
Vector synthetic_lgcp_counts(const LgcpParams& params, RngStream& rng);

// log gamma on a tape: value per column, gradient from the target.
inline Matrix target_log_gamma(const TargetDensity& target, const Matrix& x) {
  return target.log_gamma(x);
}
ad::Var target_log_gamma(const TargetDensity& target, const ad::Var& x);

}  // namespace dds
