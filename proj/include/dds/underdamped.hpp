#pragma once

#include "dds/dds.hpp"

#include <memory>

namespace dds {

// Position y and momentum n, one column per sample; mass matrix M = mass * I.
struct PhaseState {
  Matrix y;
  Matrix n;
};

// Exact flow over time tau of dy = n / mass dt, dn = -y / sigma^2 dt.
PhaseState harmonic_flow(const PhaseState& s, double tau, double sigma, double mass);
// Phi^{-1} = flip o Phi o flip with flip(y, n) = (y, -n).
PhaseState harmonic_flow_inverse(const PhaseState& s, double tau, double sigma, double mass);
// |y|^2 / (2 sigma^2) + |n|^2 / (2 mass), per column.
RowVector hamiltonian(const PhaseState& s, double sigma, double mass);

// Phi^{-1}, then n' <- sqrt(1 - alpha) n' + sqrt(alpha mass) eps.
PhaseState underdamped_ref_step(const PhaseState& s, double alpha, double sigma, double mass,
                                double tau, const Matrix& eps);

struct PhaseStepOutput {
  PhaseState next;
  RowVector cost;
  RowVector stochastic;
};

// Phi^{-1}, then n <- sqrt(1 - alpha) (n' + 2 lambda mass f) + sqrt(alpha mass) eps, with
// f = drift(j, [y; n'], score(y)).
PhaseStepOutput underdamped_dds_step(const DriftFn& drift, int j, const PhaseState& s, double alpha,
                                     double sigma, double mass, double tau, const Matrix& eps,
                                     const TargetDensity& target);

struct UnderdampedConfig {
  double mass = 1.0;
  // Hamiltonian sub-step; <= 0 selects delta = T / K.
  double tau = 0.0;
};

class UnderdampedSampler : public PathSampler {
 public:
  UnderdampedSampler(NoiseSchedule schedule, UnderdampedConfig config, TargetPtr target);

  std::string method() const override { return "udmp"; }
  int steps() const override { return schedule_.steps(); }
  int state_dim() const override { return target_->dim(); }
  int network_input_dim() const override { return 2 * target_->dim(); }
  const TargetDensity& target() const override { return *target_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  double mass() const { return config_.mass; }
  double tau() const { return tau_; }

  TapeBatch simulate_tape(ad::Tape& tape, const DriftNetwork& net, const NetParams<ad::Var>& params,
                          long batch, RngStream& rng) const override;
  // Records states, momenta n_k, rotated momenta n'_k and noises.
  BatchResult simulate(const DriftFn& drift, long batch, RngStream& rng,
                       Trajectory* record = nullptr) const override;

  // Momentum-transition log density ratio recomputed along a recorded trajectory.
  RowVector log_rnd(const Trajectory& traj, const DriftFn& drift) const;

  template <typename T, typename Drift>
  PathOutcome<T> simulate_path(const Drift& drift, T y, T n, RngStream& rng, Trajectory* record) const;

 private:
  NoiseSchedule schedule_;
  UnderdampedConfig config_;
  TargetPtr target_;
  double tau_;
};

// ---------------------------------------------------------------------------

template <typename T, typename Drift>
PathOutcome<T> UnderdampedSampler::simulate_path(const Drift& drift, T y, T n, RngStream& rng,
                                                 Trajectory* record) const {
  const Eigen::Index d = ad::value(y).rows();
  const Eigen::Index cols = ad::value(y).cols();
  const double sigma = schedule_.sigma();
  const double m = config_.mass;
  const double sm = std::sqrt(m);
  const double w = tau_ / (sm * sigma);
  const double cw = std::cos(w);
  const double sw = std::sin(w);
  T cost = ad::constant_like(y, Matrix::Zero(1, cols));
  RowVector stochastic = RowVector::Zero(cols);
  if (record) {
    record->states.assign(1, ad::value(y));
    record->momenta.assign(1, ad::value(n));
    record->rotated.clear();
    record->noises.clear();
  }
  const int k_total = schedule_.steps();
  for (int k = 0; k < k_total; ++k) {
    const int j = k_total - k;
    const double alpha = schedule_.alpha(j);
    const double keep = std::sqrt(1.0 - alpha);
    const double kick = 2.0 * keep * (1.0 - keep) * m;  // drift coefficient on f
    const double noise = std::sqrt(alpha * m);
    const Matrix eps = sample_std_normal(rng, d, cols);

    T y_next = cw * y + (-(sigma / sm) * sw) * n;
    T n_rot = ((sm / sigma) * sw) * y + cw * n;
    const Matrix score = target_->grad_log_gamma(ad::value(y_next));
    const T f = drift(j, ad::concat_rows(y_next, n_rot), score);
    n = (keep * n_rot + kick * f) + Matrix(noise * eps);
    y = std::move(y_next);
    cost = cost + (kick * kick / (2.0 * noise * noise)) * ad::col_sqnorm(f);
    stochastic += (kick / noise) * ad::col_dot(ad::value(f), eps);
    if (record) {
      record->states.push_back(ad::value(y));
      record->rotated.push_back(ad::value(n_rot));
      record->momenta.push_back(ad::value(n));
      record->noises.push_back(eps);
    }
  }
  if (record) {
    record->girsanov_cost = ad::value(cost);
    record->stochastic_term = stochastic;
  }
  return {std::move(y), std::move(cost), std::move(stochastic)};
}

}  // namespace dds
