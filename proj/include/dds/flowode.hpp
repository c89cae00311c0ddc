#pragma once

#include "dds/driftnet.hpp"
#include "dds/rng.hpp"
#include "dds/sampler.hpp"
#include "dds/schedule.hpp"
#include "dds/targets.hpp"

namespace dds {

// Drift of the probability flow ODE as a function of (step label, state);
// labels run from K down to 0.
using FlowField = std::function<Matrix(int, const Matrix&)>;

// Binds the target score into a network drift: x -> drift(j, x, grad log gamma(x)).
FlowField flow_field(const DriftFn& drift, const TargetPtr& target);

// Heun step of dy = h f dt over one grid cell with h = sigma^2 alpha_j / 2:
// y~ = y + h f(j, y); y' = y + h/2 [f(j, y) + f(j - 1, y~)].
Matrix heun_step(const FlowField& f, int j, const Matrix& y, const NoiseSchedule& schedule);

// Per-column divergence of f(j, .) by central differences along each coordinate.
RowVector exact_divergence(const FlowField& f, int j, const Matrix& y, double h = 1e-5);

struct DivergenceEstimate {
  RowVector mean;
  // Standard error of `mean` over the probes (zero for one probe).
  RowVector se;
};

// Hutchinson estimate (1/P) sum_p v_p^T J v_p with Rademacher v_p and
// finite-difference Jacobian-vector products.
DivergenceEstimate hutchinson_divergence(const FlowField& f, int j, const Matrix& y, int n_probes,
                                         RngStream& rng, double h = 1e-5);

struct FlowOptions {
  // Exact divergence by default up to this dimension, Hutchinson above.
  int exact_max_dim = 16;
  // Forces the divergence mode when set: true = exact, false = Hutchinson.
  std::optional<bool> exact;
  int probes = 1;
};

struct FlowResult {
  Matrix initial;
  Matrix samples;
  RowVector log_density;     // log q(y_K) = log N(y_0; 0, sigma^2 I) - l
  RowVector log_density_se;  // probe standard error of log_density
  RowVector log_weights;     // log gamma(y_K) - log q(y_K)
  LogZReport report;
  int probes = 0;
};

// Probes are drawn from an rng substream so that exact and Hutchinson runs
// from equal rng states integrate identical paths.
FlowResult flow_sample_and_logdensity(const FlowField& f, const NoiseSchedule& schedule,
                                      const TargetDensity& target, long n, RngStream& rng,
                                      const FlowOptions& options = {});

}  // namespace dds
