#pragma once

#include "dds/autodiff.hpp"
#include "dds/driftnet.hpp"
#include "dds/targets.hpp"
#include "dds/types.hpp"

#include <string>
#include <vector>

namespace dds {

class RngStream;

// Recorded batch of paths; every matrix has one column per sample.
struct Trajectory {
  std::vector<Matrix> states;   // y_0 .. y_K
  std::vector<Matrix> noises;   // eps used to move from y_k to y_{k+1}
  std::vector<Matrix> momenta;  // underdamped only: n_0 .. n_K
  std::vector<Matrix> rotated;  // underdamped only: n'_k after the Hamiltonian flow
  RowVector girsanov_cost;      // sum of quadratic drift terms
  RowVector stochastic_term;    // sum of drift-noise cross terms
};

// Importance-sampling summary of per-sample log weights.
struct LogZReport {
  Vector log_weights;
  double elbo = 0.0;
  double elbo_se = 0.0;
  double ln_z_is = 0.0;
  // Delta-method standard error of ln_z_is.
  double ln_z_is_se = 0.0;
  long samples = 0;
};

LogZReport summarize_log_weights(const Eigen::Ref<const Vector>& log_weights);

// Output of one batch simulated without a tape.
struct BatchResult {
  RowVector log_weights;
  Matrix samples;
};

// Output of one batch simulated on a tape.
struct TapeBatch {
  ad::Var loss_terms;  // 1 x N: cost + log N_ref(y_K) - log gamma(y_K)
  RowVector log_weights;
};

// A discretized controlled diffusion whose drift is a DriftNetwork.
class PathSampler {
 public:
  virtual ~PathSampler() = default;

  virtual std::string method() const = 0;
  virtual int steps() const = 0;
  virtual int state_dim() const = 0;
  virtual int network_input_dim() const { return state_dim(); }
  virtual const TargetDensity& target() const = 0;

  virtual TapeBatch simulate_tape(ad::Tape& tape, const DriftNetwork& net,
                                  const NetParams<ad::Var>& params, long batch,
                                  RngStream& rng) const = 0;
  virtual BatchResult simulate(const DriftFn& drift, long batch, RngStream& rng,
                               Trajectory* record = nullptr) const = 0;

  DriftArchitecture default_architecture() const;
};

LogZReport estimate_log_z(const PathSampler& sampler, const DriftFn& drift, long n_samples,
                          RngStream& rng);

}  // namespace dds
