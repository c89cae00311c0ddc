#include "dds/flowode.hpp"

#include "dds/numerics.hpp"

#include <cmath>

namespace dds {

FlowField flow_field(const DriftFn& drift, const TargetPtr& target) {
  return [drift, target](int j, const Matrix& y) { return drift(j, y, target->grad_log_gamma(y)); };
}

namespace {

Matrix eval_checked(const FlowField& f, int j, const Matrix& y) {
  Matrix v = f(j, y);
  if (!v.allFinite()) throw NonFiniteError("non-finite flow drift");
  return v;
}

}  // namespace

Matrix heun_step(const FlowField& f, int j, const Matrix& y, const NoiseSchedule& schedule) {
  require(j >= 1 && j <= schedule.steps(), "heun_step: step outside [1, K]");
  const double h = 0.5 * schedule.sigma() * schedule.sigma() * schedule.alpha(j);
  const Matrix f0 = eval_checked(f, j, y);
  const Matrix pred = y + h * f0;
  const Matrix f1 = eval_checked(f, j - 1, pred);
  return y + (0.5 * h) * (f0 + f1);
}

RowVector exact_divergence(const FlowField& f, int j, const Matrix& y, double h) {
  RowVector div = RowVector::Zero(y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    Matrix plus = y, minus = y;
    plus.row(i).array() += h;
    minus.row(i).array() -= h;
    div += (eval_checked(f, j, plus).row(i) - eval_checked(f, j, minus).row(i)) / (2.0 * h);
  }
  return div;
}

DivergenceEstimate hutchinson_divergence(const FlowField& f, int j, const Matrix& y, int n_probes,
                                         RngStream& rng, double h) {
  require(n_probes >= 1, "hutchinson_divergence: need at least one probe");
  Matrix values(n_probes, y.cols());
  for (int p = 0; p < n_probes; ++p) {
    const Matrix v = sample_rademacher(rng, y.rows(), y.cols());
    const Matrix jv = (eval_checked(f, j, y + h * v) - eval_checked(f, j, y - h * v)) / (2.0 * h);
    values.row(p) = jv.cwiseProduct(v).colwise().sum();
  }
  DivergenceEstimate out;
  out.mean = values.colwise().mean();
  out.se = RowVector::Zero(y.cols());
  if (n_probes > 1) {
    const double p = static_cast<double>(n_probes);
    out.se = ((values.rowwise() - out.mean).colwise().squaredNorm() / (p - 1.0) / p).cwiseSqrt();
  }
  return out;
}

FlowResult flow_sample_and_logdensity(const FlowField& f, const NoiseSchedule& schedule,
                                      const TargetDensity& target, long n, RngStream& rng,
                                      const FlowOptions& options) {
  require(n >= 2, "flow: need at least 2 samples");
  const int d = target.dim();
  const bool exact = options.exact.value_or(d <= options.exact_max_dim);
  require(exact || options.probes >= 1, "flow: probe count must be >= 1");
  RngStream probe_rng = rng.substream(rng.stream() ^ 0x5bd1e995ULL);
  const double sigma = schedule.sigma();

  FlowResult out;
  out.probes = exact ? 0 : options.probes;
  out.initial = sigma * sample_std_normal(rng, d, n);
  Matrix y = out.initial;
  RowVector ell = RowVector::Zero(n);
  RowVector ell_var = RowVector::Zero(n);

  auto divergence = [&](int j, const Matrix& x, double w) {
    if (exact) {
      ell += w * exact_divergence(f, j, x);
      return;
    }
    const auto est = hutchinson_divergence(f, j, x, options.probes, probe_rng);
    ell += w * est.mean;
    ell_var += (w * w) * est.se.array().square().matrix();
  };

  for (int j = schedule.steps(); j >= 1; --j) {
    const double h = 0.5 * sigma * sigma * schedule.alpha(j);
    const Matrix f0 = eval_checked(f, j, y);
    const Matrix pred = y + h * f0;
    const Matrix f1 = eval_checked(f, j - 1, pred);
    divergence(j, y, 0.5 * h);
    divergence(j - 1, pred, 0.5 * h);
    y = y + (0.5 * h) * (f0 + f1);
  }

  out.log_density = log_normal_iso(out.initial, sigma * sigma) - ell;
  out.log_density_se = ell_var.cwiseSqrt();
  out.log_weights = target.log_gamma(y) - out.log_density;
  out.samples = std::move(y);
  out.report = summarize_log_weights(out.log_weights.transpose());
  return out;
}

}  // namespace dds
