#include "dds/pis.hpp"

#include <cmath>

namespace dds {

namespace {

StepCoefficients pis_coefficients(int j, double delta, double sigma) {
  StepCoefficients c;
  c.label = j;
  c.decay = 1.0;
  c.drift = delta;
  c.noise = sigma * std::sqrt(delta);
  return c;
}

}  // namespace

DiffusionPlan pis_plan(const PisConfig& config) {
  require(config.steps >= 1, "pis: K must be >= 1");
  require(config.sigma > 0.0 && config.horizon > 0.0, "pis: sigma and T must be positive");
  Vector deltas;
  if (config.grid == "uniform")
    deltas = Vector::Constant(config.steps, config.delta());
  else if (config.grid == "cosine")
    deltas = cosine_alphas_unclipped(config.steps, 1.0, config.horizon, config.offset);
  else
    throw InvalidArgument("pis: unknown grid '" + config.grid + "'");

  DiffusionPlan plan;
  plan.method = "pis";
  plan.sigma = config.sigma;
  plan.initial_var = 0.0;
  plan.terminal_var = config.sigma * config.sigma * deltas.sum();
  for (int k = 0; k < config.steps; ++k) {
    const int j = config.steps - k;
    plan.steps.push_back(pis_coefficients(j, deltas[j - 1], config.sigma));
  }
  return plan;
}

StepOutput pis_step(const DriftFn& drift, int j, const Matrix& y, double delta, double sigma,
                    const Matrix& eps, const TargetDensity& target) {
  require(delta > 0.0 && sigma > 0.0, "pis_step: delta and sigma must be positive");
  return controlled_step(drift, pis_coefficients(j, delta, sigma), y, eps, target);
}

std::unique_ptr<OverdampedSampler> make_pis_sampler(const PisConfig& config, TargetPtr target) {
  return std::make_unique<OverdampedSampler>(pis_plan(config), std::move(target));
}

}  // namespace dds
