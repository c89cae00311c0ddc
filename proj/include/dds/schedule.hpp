#pragma once

#include "dds/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>

namespace dds {

inline constexpr double kAlphaClip = 1e-6;

// Per-step noise fractions alpha_1..alpha_K of the discretized OU process,
// with the derived lambda_k = 1 - sqrt(1 - alpha_k) and
// kappa_k = sqrt(1 - alpha_k) * lambda_k. Indices are 1-based.
class NoiseSchedule {
 public:
  NoiseSchedule(std::string kind, Vector alphas, double sigma, double horizon, double alpha_max,
                double offset);

  const std::string& kind() const { return kind_; }
  int steps() const { return static_cast<int>(alphas_.size()); }
  double sigma() const { return sigma_; }
  double horizon() const { return horizon_; }
  double alpha_max() const { return alpha_max_; }
  double offset() const { return offset_; }

  double alpha(int k) const { return alphas_[k - 1]; }
  double lambda(int k) const { return lambdas_[k - 1]; }
  double kappa(int k) const { return kappas_[k - 1]; }
  // Euler-Maruyama step size beta_k * delta = -log(1 - alpha_k) / 2.
  double em_beta_delta(int k) const;
  // prod_{i <= k} sqrt(1 - alpha_i); equals 1 at k = 0.
  double signal_scale(int k) const;
  // Uniform grid spacing T / K.
  double delta() const { return horizon_ / static_cast<double>(steps()); }

  const Vector& alphas() const { return alphas_; }
  const Vector& lambdas() const { return lambdas_; }
  const Vector& kappas() const { return kappas_; }

  NoiseSchedule with_sigma(double sigma) const;

 private:
  std::string kind_;
  Vector alphas_;
  Vector lambdas_;
  Vector kappas_;
  double sigma_;
  double horizon_;
  double alpha_max_;
  double offset_;
};

// sqrt(alpha_k) proportional to cos^2(pi/2 * (1 - k/K + s) / (1 + s)), rescaled so
// that sum_k alpha_k = alpha_max * T, then clipped into (kAlphaClip, 1 - kAlphaClip).
// Throws if any rescaled alpha_k reaches 1.
NoiseSchedule cosine_schedule(int steps, double alpha_max, double horizon, double offset = 0.008,
                              double sigma = 1.0);
NoiseSchedule uniform_schedule(int steps, double alpha_max, double horizon, double sigma = 1.0);

// Unclipped cosine weights after normalization.
Vector cosine_alphas_unclipped(int steps, double alpha_max, double horizon, double offset);

void to_json(nlohmann::json& j, const NoiseSchedule& schedule);
NoiseSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace dds
