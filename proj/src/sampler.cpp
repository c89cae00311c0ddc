#include "dds/sampler.hpp"

#include "dds/numerics.hpp"
#include "dds/rng.hpp"

#include <cmath>

namespace dds {

LogZReport summarize_log_weights(const Eigen::Ref<const Vector>& log_weights) {
  const Eigen::Index n = log_weights.size();
  require(n >= 2, "log-Z estimate needs at least 2 samples");
  if (!log_weights.allFinite()) throw NonFiniteError("non-finite log importance weight");
  LogZReport r;
  r.log_weights = log_weights;
  r.samples = n;
  const double nd = static_cast<double>(n);
  r.elbo = log_weights.mean();
  r.elbo_se = std::sqrt((log_weights.array() - r.elbo).square().sum() / (nd - 1.0) / nd);
  r.ln_z_is = logsumexp(log_weights) - std::log(nd);
  const Eigen::ArrayXd w = (log_weights.array() - log_weights.maxCoeff()).exp();
  const double wm = w.mean();
  const double wsd = std::sqrt((w - wm).square().sum() / (nd - 1.0));
  r.ln_z_is_se = wsd / (wm * std::sqrt(nd));
  return r;
}

DriftArchitecture PathSampler::default_architecture() const {
  DriftArchitecture a;
  a.state_dim = state_dim();
  a.input_dim = network_input_dim();
  a.steps = steps();
  return a;
}

LogZReport estimate_log_z(const PathSampler& sampler, const DriftFn& drift, long n_samples,
                          RngStream& rng) {
  require(n_samples >= 2, "estimate_log_z: n_samples must be >= 2");
  const BatchResult batch = sampler.simulate(drift, n_samples, rng);
  return summarize_log_weights(batch.log_weights.transpose());
}

}  // namespace dds
