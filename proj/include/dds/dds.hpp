#pragma once

#include "dds/autodiff.hpp"
#include "dds/driftnet.hpp"
#include "dds/numerics.hpp"
#include "dds/rng.hpp"
#include "dds/sampler.hpp"
#include "dds/schedule.hpp"
#include "dds/targets.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace dds {

enum class Integrator {
  // sqrt(1 - a) y + sigma^2 a f + sigma sqrt(a) eps, cost a sigma^2 |f|^2 / 2.
  Exponential,
  // sqrt(1 - a) y + 2 sigma^2 lambda f + sigma sqrt(a) eps.
  ExponentialLambda,
  // Euler-Maruyama with b = beta delta = -log(1 - a) / 2.
  EulerMaruyama,
};

std::string integrator_name(Integrator integrator);
Integrator integrator_from_name(const std::string& name);

// One transition y' = decay y + drift f + noise eps. Against the matching
// uncontrolled transition the log density ratio of a step is
// cost |f|^2 + cross f^T eps, with cost = drift^2 / (2 noise^2) and cross = drift / noise.
struct StepCoefficients {
  int label = 0;  // time index fed to the network
  double decay = 1.0;
  double drift = 0.0;
  double noise = 0.0;

  double cost() const { return drift * drift / (2.0 * noise * noise); }
  double cross() const { return drift / noise; }
};

// A discretized overdamped controlled diffusion, in simulation order.
struct DiffusionPlan {
  std::string method;
  double sigma = 1.0;
  // Variance of the isotropic Gaussian start; 0 means a point mass at the origin.
  double initial_var = 1.0;
  // Variance of the reference process marginal at the final step.
  double terminal_var = 1.0;
  std::vector<StepCoefficients> steps;

  int size() const { return static_cast<int>(steps.size()); }
};

StepCoefficients dds_coefficients(const NoiseSchedule& schedule, int j, Integrator integrator);
// Step k (0-based) of the reverse pass uses j = K - k.
DiffusionPlan dds_plan(const NoiseSchedule& schedule, Integrator integrator = Integrator::Exponential);

struct StepOutput {
  Matrix next;
  RowVector cost;
  RowVector stochastic;
};

// Exact OU transition sqrt(1 - alpha) y + sigma sqrt(alpha) eps.
Matrix reference_step(const Matrix& y, double alpha, double sigma, const Matrix& eps);
StepOutput dds_step(const DriftFn& drift, int j, const Matrix& y, double alpha, double sigma,
                    const Matrix& eps, const TargetDensity& target);
Matrix em_reference_step(const Matrix& y, double alpha, double sigma, const Matrix& eps);
StepOutput em_step(const DriftFn& drift, int j, const Matrix& y, double alpha, double sigma,
                   const Matrix& eps, const TargetDensity& target);
// Generic controlled transition under the given coefficients.
StepOutput controlled_step(const DriftFn& drift, const StepCoefficients& c, const Matrix& y,
                           const Matrix& eps, const TargetDensity& target);

Matrix initial_states(const DiffusionPlan& plan, int dim, long batch, RngStream& rng);

template <typename T>
struct PathOutcome {
  T terminal;
  T cost;
  RowVector stochastic;
};

// Simulates the plan from `y`. The drift is called as drift(label, y, score),
// with the score computed from the value of y (never differentiated).
template <typename T, typename Drift>
PathOutcome<T> simulate_plan(const DiffusionPlan& plan, const TargetDensity& target,
                             const Drift& drift, T y, RngStream& rng, Trajectory* record) {
  const Eigen::Index d = ad::value(y).rows();
  const Eigen::Index n = ad::value(y).cols();
  T cost = ad::constant_like(y, Matrix::Zero(1, n));
  RowVector stochastic = RowVector::Zero(n);
  if (record) {
    record->states.assign(1, ad::value(y));
    record->noises.clear();
  }
  for (const auto& c : plan.steps) {
    const Matrix eps = sample_std_normal(rng, d, n);
    const Matrix score = target.grad_log_gamma(ad::value(y));
    const T f = drift(c.label, y, score);
    y = (c.decay * y + c.drift * f) + Matrix(c.noise * eps);
    cost = cost + c.cost() * ad::col_sqnorm(f);
    stochastic += c.cross() * ad::col_dot(ad::value(f), eps);
    if (record) {
      record->states.push_back(ad::value(y));
      record->noises.push_back(eps);
    }
  }
  if (record) {
    record->girsanov_cost = ad::value(cost);
    record->stochastic_term = stochastic;
  }
  return {std::move(y), std::move(cost), std::move(stochastic)};
}

// log(q / p_ref)(y_{0:K}) recomputed along a recorded trajectory.
RowVector log_rnd(const Trajectory& traj, const DriftFn& drift, const DiffusionPlan& plan,
                  const TargetDensity& target);

// Per-sample log gamma(y_K) - log N(y_K; 0, terminal_var) - log_rnd.
RowVector log_weights(const DiffusionPlan& plan, const TargetDensity& target, const Matrix& terminal,
                      const RowVector& cost, const RowVector& stochastic);

// Mean over the batch of cost + log N(y_K; 0, terminal_var) - log gamma(y_K).
ad::Var kl_loss(const DiffusionPlan& plan, const TargetDensity& target, const ad::Var& terminal,
                const ad::Var& cost);
double kl_loss(const DiffusionPlan& plan, const TargetDensity& target, const Matrix& terminal,
               const RowVector& cost);

// Overdamped sampler for DDS, its lambda form and the EM ablation (and PIS, via its plan).
class OverdampedSampler : public PathSampler {
 public:
  OverdampedSampler(DiffusionPlan plan, TargetPtr target);

  std::string method() const override { return plan_.method; }
  int steps() const override { return plan_.size(); }
  int state_dim() const override { return target_->dim(); }
  const TargetDensity& target() const override { return *target_; }
  const DiffusionPlan& plan() const { return plan_; }

  TapeBatch simulate_tape(ad::Tape& tape, const DriftNetwork& net, const NetParams<ad::Var>& params,
                          long batch, RngStream& rng) const override;
  BatchResult simulate(const DriftFn& drift, long batch, RngStream& rng,
                       Trajectory* record = nullptr) const override;

 private:
  DiffusionPlan plan_;
  TargetPtr target_;
};

std::unique_ptr<OverdampedSampler> make_dds_sampler(const NoiseSchedule& schedule, TargetPtr target,
                                                    Integrator integrator = Integrator::Exponential);

// Optimal drift for a N(mu, s2 I) target after accumulated signal scale a:
// grad log phi(x) = -(x - a mu) / (a^2 s2 + sigma^2 (1 - a^2)) + x / sigma^2.
Matrix gaussian_value_gradient(const Matrix& x, const Vector& mu, double s2, double sigma,
                               double a);

// Continuous-time oracle for a N(mu, I) target with sigma = beta = 1:
// grad log phi_t = mu exp(-t).
Vector analytic_gaussian_drift(const Vector& mu, double t);

// Discrete optimum of the rescaled drift for a N(mu, I) target and sigma = 1:
// f(j, x) = mu * prod_{i < j} sqrt(1 - alpha_i).
Vector analytic_gaussian_drift(const Vector& mu, const NoiseSchedule& schedule, int j);

}  // namespace dds
