#include "dds/underdamped.hpp"

#include <cmath>

namespace dds {

PhaseState harmonic_flow(const PhaseState& s, double tau, double sigma, double mass) {
  require(tau >= 0.0, "harmonic_flow: tau must be non-negative");
  require(sigma > 0.0 && mass > 0.0, "harmonic_flow: sigma and mass must be positive");
  const double sm = std::sqrt(mass);
  const double w = tau / (sm * sigma);
  const double c = std::cos(w);
  const double sn = std::sin(w);
  return {c * s.y + ((sigma / sm) * sn) * s.n, (-(sm / sigma) * sn) * s.y + c * s.n};
}

PhaseState harmonic_flow_inverse(const PhaseState& s, double tau, double sigma, double mass) {
  require(tau >= 0.0, "harmonic_flow_inverse: tau must be non-negative");
  require(sigma > 0.0 && mass > 0.0, "harmonic_flow_inverse: sigma and mass must be positive");
  const double sm = std::sqrt(mass);
  const double w = tau / (sm * sigma);
  const double c = std::cos(w);
  const double sn = std::sin(w);
  return {c * s.y + (-(sigma / sm) * sn) * s.n, ((sm / sigma) * sn) * s.y + c * s.n};
}

RowVector hamiltonian(const PhaseState& s, double sigma, double mass) {
  return s.y.colwise().squaredNorm() / (2.0 * sigma * sigma) + s.n.colwise().squaredNorm() / (2.0 * mass);
}

PhaseState underdamped_ref_step(const PhaseState& s, double alpha, double sigma, double mass,
                                double tau, const Matrix& eps) {
  require(alpha > 0.0 && alpha < 1.0, "underdamped_ref_step: alpha must lie in (0, 1)");
  PhaseState r = harmonic_flow_inverse(s, tau, sigma, mass);
  r.n = std::sqrt(1.0 - alpha) * r.n + Matrix(std::sqrt(alpha * mass) * eps);
  return r;
}

PhaseStepOutput underdamped_dds_step(const DriftFn& drift, int j, const PhaseState& s, double alpha,
                                     double sigma, double mass, double tau, const Matrix& eps,
                                     const TargetDensity& target) {
  require(alpha > 0.0 && alpha < 1.0, "underdamped_dds_step: alpha must lie in (0, 1)");
  PhaseState r = harmonic_flow_inverse(s, tau, sigma, mass);
  const double keep = std::sqrt(1.0 - alpha);
  const double kick = 2.0 * keep * (1.0 - keep) * mass;
  const double noise = std::sqrt(alpha * mass);
  const Matrix f = drift(j, ad::concat_rows(r.y, r.n), target.grad_log_gamma(r.y));
  if (!f.allFinite()) throw NonFiniteError("non-finite drift output");
  PhaseStepOutput out;
  out.next.y = r.y;
  out.next.n = (keep * r.n + kick * f) + Matrix(noise * eps);
  out.cost = (kick * kick / (2.0 * noise * noise)) * f.colwise().squaredNorm();
  out.stochastic = (kick / noise) * f.cwiseProduct(eps).colwise().sum();
  return out;
}

UnderdampedSampler::UnderdampedSampler(NoiseSchedule schedule, UnderdampedConfig config,
                                       TargetPtr target)
    : schedule_(std::move(schedule)), config_(config), target_(std::move(target)) {
  require(target_ != nullptr, "udmp: target is null");
  require(config_.mass > 0.0, "udmp: mass must be positive");
  tau_ = config_.tau > 0.0 ? config_.tau : schedule_.delta();
}

TapeBatch UnderdampedSampler::simulate_tape(ad::Tape& tape, const DriftNetwork& net,
                                            const NetParams<ad::Var>& params, long batch,
                                            RngStream& rng) const {
  require(batch >= 1, "batch size must be >= 1");
  const int d = state_dim();
  const double sigma = schedule_.sigma();
  const ad::Var y0 = tape.constant(sigma * sample_std_normal(rng, d, batch));
  const ad::Var n0 = tape.constant(std::sqrt(config_.mass) * sample_std_normal(rng, d, batch));
  auto drift = [&](int j, const ad::Var& input, const Matrix& score) {
    return net.forward(params, j, input, score);
  };
  auto path = simulate_path(drift, y0, n0, rng, nullptr);
  const double var = sigma * sigma;
  ad::Var log_ref = ad::add_scalar((-0.5 / var) * ad::col_sqnorm(path.terminal),
                                   -0.5 * d * std::log(2.0 * std::numbers::pi * var));
  TapeBatch out;
  out.loss_terms = (path.cost + log_ref) - target_log_gamma(*target_, path.terminal);
  out.log_weights = target_->log_gamma(path.terminal.value()) - log_normal_iso(path.terminal.value(), var) -
                    path.cost.value() - path.stochastic;
  return out;
}

BatchResult UnderdampedSampler::simulate(const DriftFn& drift, long batch, RngStream& rng,
                                         Trajectory* record) const {
  require(batch >= 1, "batch size must be >= 1");
  const int d = state_dim();
  const double sigma = schedule_.sigma();
  Matrix y0 = sigma * sample_std_normal(rng, d, batch);
  Matrix n0 = std::sqrt(config_.mass) * sample_std_normal(rng, d, batch);
  auto checked = [&](int j, const Matrix& input, const Matrix& score) {
    Matrix f = drift(j, input, score);
    if (!f.allFinite()) throw NonFiniteError("non-finite drift output");
    return f;
  };
  auto path = simulate_path(checked, std::move(y0), std::move(n0), rng, record);
  BatchResult out;
  out.log_weights = target_->log_gamma(path.terminal) - log_normal_iso(path.terminal, sigma * sigma) -
                    path.cost - path.stochastic;
  out.samples = std::move(path.terminal);
  return out;
}

RowVector UnderdampedSampler::log_rnd(const Trajectory& traj, const DriftFn& drift) const {
  const auto k_total = static_cast<std::size_t>(steps());
  if (traj.noises.size() != k_total || traj.rotated.size() != k_total ||
      traj.states.size() != k_total + 1)
    throw InvalidArgument("udmp log_rnd: trajectory is missing stored states or noises");
  const double m = config_.mass;
  RowVector total = RowVector::Zero(traj.states.front().cols());
  for (std::size_t k = 0; k < k_total; ++k) {
    const int j = static_cast<int>(k_total - k);
    const double alpha = schedule_.alpha(j);
    const double keep = std::sqrt(1.0 - alpha);
    const double kick = 2.0 * keep * (1.0 - keep) * m;
    const double noise = std::sqrt(alpha * m);
    const Matrix& y = traj.states[k + 1];
    const Matrix f = drift(j, ad::concat_rows(y, traj.rotated[k]), target_->grad_log_gamma(y));
    total += (kick * kick / (2.0 * noise * noise)) * f.colwise().squaredNorm() +
             (kick / noise) * f.cwiseProduct(traj.noises[k]).colwise().sum();
  }
  return total;
}

}  // namespace dds
