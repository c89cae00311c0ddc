#include "dds/dds.hpp"

#include <cmath>

namespace dds {

std::string integrator_name(Integrator integrator) {
  switch (integrator) {
    case Integrator::Exponential: return "exponential";
    case Integrator::ExponentialLambda: return "exponential-lambda";
    case Integrator::EulerMaruyama: return "euler-maruyama";
  }
  return "unknown";
}

Integrator integrator_from_name(const std::string& name) {
  if (name == "exponential") return Integrator::Exponential;
  if (name == "exponential-lambda") return Integrator::ExponentialLambda;
  if (name == "euler-maruyama" || name == "em") return Integrator::EulerMaruyama;
  throw InvalidArgument("unknown integrator '" + name + "'");
}

StepCoefficients dds_coefficients(const NoiseSchedule& schedule, int j, Integrator integrator) {
  const double a = schedule.alpha(j);
  const double s = schedule.sigma();
  StepCoefficients c;
  c.label = j;
  switch (integrator) {
    case Integrator::Exponential:
      c.decay = std::sqrt(1.0 - a);
      c.drift = s * s * a;
      c.noise = s * std::sqrt(a);
      break;
    case Integrator::ExponentialLambda:
      c.decay = std::sqrt(1.0 - a);
      c.drift = 2.0 * s * s * schedule.lambda(j);
      c.noise = s * std::sqrt(a);
      break;
    case Integrator::EulerMaruyama: {
      const double b = schedule.em_beta_delta(j);
      if (b >= 1.0)
        throw InvalidArgument("euler-maruyama: beta*delta = " + std::to_string(b) +
                              " at step " + std::to_string(j) + " is not below 1");
      c.decay = 1.0 - b;
      c.drift = 2.0 * s * s * b;
      c.noise = s * std::sqrt(2.0 * b);
      break;
    }
  }
  return c;
}

DiffusionPlan dds_plan(const NoiseSchedule& schedule, Integrator integrator) {
  DiffusionPlan plan;
  plan.method = integrator == Integrator::EulerMaruyama ? "em" : "dds";
  if (integrator == Integrator::ExponentialLambda) plan.method = "dds-lambda";
  plan.sigma = schedule.sigma();
  plan.initial_var = schedule.sigma() * schedule.sigma();
  // The EM scheme keeps the stationary-reference assumption it fails to honour.
  plan.terminal_var = plan.initial_var;
  const int k_total = schedule.steps();
  for (int k = 0; k < k_total; ++k) plan.steps.push_back(dds_coefficients(schedule, k_total - k, integrator));
  return plan;
}

Matrix reference_step(const Matrix& y, double alpha, double sigma, const Matrix& eps) {
  require(alpha > 0.0 && alpha < 1.0, "reference_step: alpha must lie in (0, 1)");
  return std::sqrt(1.0 - alpha) * y + sigma * std::sqrt(alpha) * eps;
}

Matrix em_reference_step(const Matrix& y, double alpha, double sigma, const Matrix& eps) {
  require(alpha > 0.0 && alpha < 1.0, "em_reference_step: alpha must lie in (0, 1)");
  const double b = -0.5 * std::log1p(-alpha);
  if (b >= 1.0) throw InvalidArgument("em_reference_step: beta*delta is not below 1");
  return (1.0 - b) * y + sigma * std::sqrt(2.0 * b) * eps;
}

StepOutput controlled_step(const DriftFn& drift, const StepCoefficients& c, const Matrix& y,
                           const Matrix& eps, const TargetDensity& target) {
  const Matrix f = drift(c.label, y, target.grad_log_gamma(y));
  if (!f.allFinite()) throw NonFiniteError("non-finite drift output");
  StepOutput out;
  out.next = (c.decay * y + c.drift * f) + Matrix(c.noise * eps);
  out.cost = c.cost() * f.colwise().squaredNorm();
  out.stochastic = c.cross() * f.cwiseProduct(eps).colwise().sum();
  return out;
}

namespace {

StepCoefficients single_step(double alpha, double sigma, int j, Integrator integrator) {
  require(alpha > 0.0 && alpha < 1.0, "step: alpha must lie in (0, 1)");
  const NoiseSchedule one("single", Vector::Constant(1, alpha), sigma, 1.0, alpha, 0.0);
  StepCoefficients c = dds_coefficients(one, 1, integrator);
  c.label = j;
  return c;
}

}  // namespace

StepOutput dds_step(const DriftFn& drift, int j, const Matrix& y, double alpha, double sigma,
                    const Matrix& eps, const TargetDensity& target) {
  return controlled_step(drift, single_step(alpha, sigma, j, Integrator::Exponential), y, eps, target);
}

StepOutput em_step(const DriftFn& drift, int j, const Matrix& y, double alpha, double sigma,
                   const Matrix& eps, const TargetDensity& target) {
  return controlled_step(drift, single_step(alpha, sigma, j, Integrator::EulerMaruyama), y, eps,
                         target);
}

Matrix initial_states(const DiffusionPlan& plan, int dim, long batch, RngStream& rng) {
  require(batch >= 1, "batch size must be >= 1");
  if (plan.initial_var == 0.0) return Matrix::Zero(dim, batch);
  return std::sqrt(plan.initial_var) * sample_std_normal(rng, dim, batch);
}

RowVector log_rnd(const Trajectory& traj, const DriftFn& drift, const DiffusionPlan& plan,
                  const TargetDensity& target) {
  const auto k_total = static_cast<std::size_t>(plan.size());
  if (traj.noises.size() != k_total || traj.states.size() != k_total + 1)
    throw InvalidArgument("log_rnd: trajectory is missing stored states or noises");
  RowVector total = RowVector::Zero(traj.states.front().cols());
  for (std::size_t k = 0; k < k_total; ++k) {
    const auto& c = plan.steps[k];
    const Matrix& y = traj.states[k];
    const Matrix f = drift(c.label, y, target.grad_log_gamma(y));
    total += c.cost() * f.colwise().squaredNorm() + c.cross() * f.cwiseProduct(traj.noises[k]).colwise().sum();
  }
  return total;
}

RowVector log_weights(const DiffusionPlan& plan, const TargetDensity& target, const Matrix& terminal,
                      const RowVector& cost, const RowVector& stochastic) {
  RowVector lw = target.log_gamma(terminal) - log_normal_iso(terminal, plan.terminal_var);
  return lw - cost - stochastic;
}

ad::Var kl_loss(const DiffusionPlan& plan, const TargetDensity& target, const ad::Var& terminal,
                const ad::Var& cost) {
  const double d = static_cast<double>(terminal.rows());
  const double n = static_cast<double>(terminal.cols());
  const double var = plan.terminal_var;
  ad::Var log_ref = ad::add_scalar((-0.5 / var) * ad::col_sqnorm(terminal),
                                   -0.5 * d * std::log(2.0 * std::numbers::pi * var));
  ad::Var terms = (cost + log_ref) - target_log_gamma(target, terminal);
  return (1.0 / n) * ad::sum(terms);
}

double kl_loss(const DiffusionPlan& plan, const TargetDensity& target, const Matrix& terminal,
               const RowVector& cost) {
  const RowVector terms = cost + log_normal_iso(terminal, plan.terminal_var) - target.log_gamma(terminal);
  return terms.mean();
}

OverdampedSampler::OverdampedSampler(DiffusionPlan plan, TargetPtr target)
    : plan_(std::move(plan)), target_(std::move(target)) {
  require(target_ != nullptr, "sampler: target is null");
  require(plan_.size() >= 1, "sampler: plan has no steps");
  for (const auto& c : plan_.steps)
    require(c.noise > 0.0 && std::isfinite(c.decay) && std::isfinite(c.drift),
            "sampler: invalid step coefficients");
}

TapeBatch OverdampedSampler::simulate_tape(ad::Tape& tape, const DriftNetwork& net,
                                           const NetParams<ad::Var>& params, long batch,
                                           RngStream& rng) const {
  const ad::Var y0 = tape.constant(initial_states(plan_, state_dim(), batch, rng));
  auto drift = [&](int j, const ad::Var& y, const Matrix& score) {
    return net.forward(params, j, y, score);
  };
  auto path = simulate_plan(plan_, *target_, drift, y0, rng, nullptr);
  // Per-sample loss terms; the batch mean is formed by the caller.
  const double d = static_cast<double>(state_dim());
  const double var = plan_.terminal_var;
  ad::Var log_ref = ad::add_scalar((-0.5 / var) * ad::col_sqnorm(path.terminal),
                                   -0.5 * d * std::log(2.0 * std::numbers::pi * var));
  TapeBatch out;
  out.loss_terms = (path.cost + log_ref) - target_log_gamma(*target_, path.terminal);
  out.log_weights = log_weights(plan_, *target_, path.terminal.value(), path.cost.value(), path.stochastic);
  return out;
}

BatchResult OverdampedSampler::simulate(const DriftFn& drift, long batch, RngStream& rng,
                                        Trajectory* record) const {
  Matrix y0 = initial_states(plan_, state_dim(), batch, rng);
  auto checked = [&](int j, const Matrix& y, const Matrix& score) {
    Matrix f = drift(j, y, score);
    if (!f.allFinite()) throw NonFiniteError("non-finite drift output");
    return f;
  };
  auto path = simulate_plan(plan_, *target_, checked, std::move(y0), rng, record);
  BatchResult out;
  out.log_weights = log_weights(plan_, *target_, path.terminal, path.cost, path.stochastic);
  out.samples = std::move(path.terminal);
  return out;
}

std::unique_ptr<OverdampedSampler> make_dds_sampler(const NoiseSchedule& schedule, TargetPtr target,
                                                    Integrator integrator) {
  return std::make_unique<OverdampedSampler>(dds_plan(schedule, integrator), std::move(target));
}

Matrix gaussian_value_gradient(const Matrix& x, const Vector& mu, double s2, double sigma,
                               double a) {
  require(mu.size() == x.rows(), "gaussian_value_gradient: dimension mismatch");
  const double v = a * a * s2 + sigma * sigma * (1.0 - a * a);
  return (-(x.colwise() - a * mu) / v) + x / (sigma * sigma);
}

Vector analytic_gaussian_drift(const Vector& mu, double t) {
  require(t >= 0.0, "analytic_gaussian_drift: t must be non-negative");
  return mu * std::exp(-t);
}

Vector analytic_gaussian_drift(const Vector& mu, const NoiseSchedule& schedule, int j) {
  require(schedule.sigma() == 1.0, "analytic_gaussian_drift: requires sigma = 1");
  require(j >= 1 && j <= schedule.steps(), "analytic_gaussian_drift: step outside [1, K]");
  return mu * schedule.signal_scale(j - 1);
}

}  // namespace dds
