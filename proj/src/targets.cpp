#include "dds/targets.hpp"

#include "dds/numerics.hpp"
#include "dds/rng.hpp"

#include <cmath>
#include <numbers>

namespace dds {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

class GaussianTarget final : public TargetDensity {
 public:
  GaussianTarget(Vector mu, double sigma2) : mu_(std::move(mu)), sigma2_(sigma2) {}

  int dim() const override { return static_cast<int>(mu_.size()); }
  std::string name() const override { return "gaussian"; }
  RowVector log_gamma(const Matrix& x) const override {
    return (-0.5 / sigma2_) * (x.colwise() - mu_).colwise().squaredNorm();
  }
  Matrix grad_log_gamma(const Matrix& x) const override {
    return (x.colwise() - mu_) * (-1.0 / sigma2_);
  }
  std::optional<double> exact_log_z() const override {
    return 0.5 * static_cast<double>(mu_.size()) * std::log(2.0 * std::numbers::pi * sigma2_);
  }

 private:
  Vector mu_;
  double sigma2_;
};

// x_1 ~ N(0, 9), x_{2:10} | x_1 ~ N(0, exp(x_1) I).
class FunnelTarget final : public TargetDensity {
 public:
  static constexpr int kDim = 10;
  static constexpr double kScaleVar = 9.0;

  int dim() const override { return kDim; }
  std::string name() const override { return "funnel"; }
  RowVector log_gamma(const Matrix& x) const override {
    check(x);
    RowVector out(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double x1 = x(0, j);
      const double rest = x.col(j).tail(kDim - 1).squaredNorm();
      out[j] = log_normal_1d(x1, 0.0, kScaleVar) - 0.5 * rest * std::exp(-x1) -
               0.5 * (kDim - 1) * (x1 + kLog2Pi);
    }
    return out;
  }
  Matrix grad_log_gamma(const Matrix& x) const override {
    check(x);
    Matrix g(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double x1 = x(0, j);
      const double inv_var = std::exp(-x1);
      const double rest = x.col(j).tail(kDim - 1).squaredNorm();
      g(0, j) = -x1 / kScaleVar - 0.5 * (kDim - 1) + 0.5 * rest * inv_var;
      g.col(j).tail(kDim - 1) = -inv_var * x.col(j).tail(kDim - 1);
    }
    return g;
  }
  std::optional<double> exact_log_z() const override { return 0.0; }

 private:
  static void check(const Matrix& x) { require(x.rows() == kDim, "funnel: expected 10 rows"); }
};

class MixtureTarget final : public TargetDensity {
 public:
  MixtureTarget(std::vector<Vector> means, std::vector<double> weights, double sigma2)
      : means_(std::move(means)), sigma2_(sigma2) {
    log_weights_.reserve(weights.size());
    for (double w : weights) log_weights_.push_back(std::log(w));
    log_norm_ = -0.5 * static_cast<double>(means_.front().size()) *
                std::log(2.0 * std::numbers::pi * sigma2_);
  }

  int dim() const override { return static_cast<int>(means_.front().size()); }
  std::string name() const override { return "mixture"; }
  RowVector log_gamma(const Matrix& x) const override {
    const Matrix t = component_terms(x);
    const RowVector m = t.colwise().maxCoeff();
    return m + (t.rowwise() - m).array().exp().colwise().sum().log().matrix();
  }
  Matrix grad_log_gamma(const Matrix& x) const override {
    const Matrix terms = component_terms(x);
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double lse = logsumexp(terms.col(j));
      for (std::size_t c = 0; c < means_.size(); ++c) {
        const double r = std::exp(terms(static_cast<Eigen::Index>(c), j) - lse);
        g.col(j) -= (r / sigma2_) * (x.col(j) - means_[c]);
      }
    }
    return g;
  }
  std::optional<double> exact_log_z() const override {
    return logsumexp(Eigen::Map<const Vector>(log_weights_.data(),
                                              static_cast<Eigen::Index>(log_weights_.size())));
  }

 private:
  // Rows: components, columns: samples.
  Matrix component_terms(const Matrix& x) const {
    require(x.rows() == dim(), "mixture: dimension mismatch");
    Matrix t(static_cast<Eigen::Index>(means_.size()), x.cols());
    for (std::size_t c = 0; c < means_.size(); ++c)
      t.row(static_cast<Eigen::Index>(c)) =
          log_weights_[c] + log_norm_ -
          (0.5 / sigma2_) * (x.colwise() - means_[c]).colwise().squaredNorm().array();
    return t;
  }

  std::vector<Vector> means_;
  std::vector<double> log_weights_;
  double sigma2_;
  double log_norm_;
};

class LogisticRegressionTarget final : public TargetDensity {
 public:
  LogisticRegressionTarget(Dataset data, double sigma_w2, bool intercept)
      : labels_(std::move(data.labels)), sigma_w2_(sigma_w2) {
    if (intercept) {
      design_.resize(data.features.rows(), data.features.cols() + 1);
      design_.col(0).setOnes();
      design_.rightCols(data.features.cols()) = data.features;
    } else {
      design_ = std::move(data.features);
    }
  }

  int dim() const override { return static_cast<int>(design_.cols()); }
  std::string name() const override { return "logistic_regression"; }
  RowVector log_gamma(const Matrix& x) const override {
    require(x.rows() == dim(), "logistic regression: dimension mismatch");
    const Matrix z = design_ * x;
    RowVector out = log_normal_iso(x, sigma_w2_);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      double ll = 0.0;
      for (Eigen::Index i = 0; i < z.rows(); ++i)
        ll += labels_[i] > 0.5 ? log_sigmoid(z(i, j)) : log_sigmoid(-z(i, j));
      out[j] += ll;
    }
    return out;
  }
  Matrix grad_log_gamma(const Matrix& x) const override {
    require(x.rows() == dim(), "logistic regression: dimension mismatch");
    Matrix resid = design_ * x;
    for (Eigen::Index j = 0; j < resid.cols(); ++j)
      for (Eigen::Index i = 0; i < resid.rows(); ++i) resid(i, j) = labels_[i] - sigmoid(resid(i, j));
    return design_.transpose() * resid - x / sigma_w2_;
  }

 private:
  Matrix design_;
  Vector labels_;
  double sigma_w2_;
};

class BrownianTarget final : public TargetDensity {
 public:
  static constexpr int kSteps = BrownianObservations::kSteps;
  static constexpr double kLogScalePriorVar = 4.0;

  BrownianTarget(BrownianObservations obs, std::optional<double> inn, std::optional<double> noise)
      : obs_(std::move(obs)), fixed_inn_(inn), fixed_obs_(noise) {}

  int dim() const override { return fixed() ? kSteps : kSteps + 2; }
  std::string name() const override { return fixed() ? "brownian_fixed" : "brownian"; }

  RowVector log_gamma(const Matrix& x) const override {
    require(x.rows() == dim(), "brownian: dimension mismatch");
    RowVector out(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) out[j] = evaluate(x.col(j), nullptr);
    return out;
  }
  Matrix grad_log_gamma(const Matrix& x) const override {
    require(x.rows() == dim(), "brownian: dimension mismatch");
    Matrix g(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Vector gj(x.rows());
      evaluate(x.col(j), &gj);
      g.col(j) = gj;
    }
    return g;
  }

 private:
  bool fixed() const { return fixed_inn_.has_value(); }

  double evaluate(const Eigen::Ref<const Vector>& s, Vector* grad) const {
    double log_inn, log_obs;
    double lp = 0.0;
    if (fixed()) {
      log_inn = std::log(*fixed_inn_);
      log_obs = std::log(*fixed_obs_);
    } else {
      log_inn = s[kSteps];
      log_obs = s[kSteps + 1];
      lp += log_normal_1d(log_inn, 0.0, kLogScalePriorVar) +
            log_normal_1d(log_obs, 0.0, kLogScalePriorVar);
    }
    const double var_inn = std::exp(2.0 * log_inn);
    const double var_obs = std::exp(2.0 * log_obs);
    if (grad) grad->setZero();
    double d_log_inn = 0.0;
    double d_log_obs = 0.0;
    for (int i = 0; i < kSteps; ++i) {
      const double prev = i == 0 ? 0.0 : s[i - 1];
      const double e = s[i] - prev;
      lp += -0.5 * e * e / var_inn - log_inn - 0.5 * kLog2Pi;
      d_log_inn += e * e / var_inn - 1.0;
      if (grad) {
        (*grad)[i] -= e / var_inn;
        if (i > 0) (*grad)[i - 1] += e / var_inn;
      }
      if (obs_.observed[static_cast<std::size_t>(i)]) {
        const double r = obs_.values[i] - s[i];
        lp += -0.5 * r * r / var_obs - log_obs - 0.5 * kLog2Pi;
        d_log_obs += r * r / var_obs - 1.0;
        if (grad) (*grad)[i] += r / var_obs;
      }
    }
    if (grad && !fixed()) {
      (*grad)[kSteps] = d_log_inn - log_inn / kLogScalePriorVar;
      (*grad)[kSteps + 1] = d_log_obs - log_obs / kLogScalePriorVar;
    }
    return lp;
  }

  BrownianObservations obs_;
  std::optional<double> fixed_inn_;
  std::optional<double> fixed_obs_;
};

class LgcpTarget final : public TargetDensity {
 public:
  LgcpTarget(const LgcpParams& params, Vector counts)
      : counts_(std::move(counts)), mean_(params.resolved_mean()), area_(params.resolved_area()) {
    const Matrix cov = lgcp_covariance(params);
    chol_.compute(cov);
    if (chol_.info() != Eigen::Success) throw InvalidArgument("lgcp: covariance is not positive definite");
    const Matrix l = chol_.matrixL();
    // Also rejects numerically singular factors that LLT lets through.
    if ((l.diagonal().array() <= 0.0).any() || !l.allFinite())
      throw InvalidArgument("lgcp: covariance is not positive definite");
    half_log_det_ = l.diagonal().array().log().sum();
    require(counts_.size() == cov.rows(), "lgcp: counts length must equal grid_side^2");
  }

  int dim() const override { return static_cast<int>(counts_.size()); }
  std::string name() const override { return "lgcp"; }
  RowVector log_gamma(const Matrix& x) const override {
    require(x.rows() == dim(), "lgcp: dimension mismatch");
    const Matrix centred = x.array() - mean_;
    const Matrix z = chol_.matrixL().solve(centred);
    const double d = static_cast<double>(dim());
    RowVector prior = -0.5 * z.colwise().squaredNorm().array() - half_log_det_ - 0.5 * d * kLog2Pi;
    RowVector lik = counts_.transpose() * x - area_ * x.array().exp().matrix().colwise().sum();
    return prior + lik;
  }
  Matrix grad_log_gamma(const Matrix& x) const override {
    require(x.rows() == dim(), "lgcp: dimension mismatch");
    const Matrix centred = x.array() - mean_;
    Matrix g = -chol_.solve(centred);
    g.colwise() += counts_;
    g -= area_ * x.array().exp().matrix();
    return g;
  }

 private:
  Vector counts_;
  double mean_;
  double area_;
  Eigen::LLT<Matrix> chol_;
  double half_log_det_ = 0.0;
};

}  // namespace

TargetPtr gaussian_target(Vector mu, double sigma2) {
  require(sigma2 > 0.0, "gaussian_target: variance must be positive");
  require(mu.size() >= 1, "gaussian_target: empty mean");
  return std::make_shared<GaussianTarget>(std::move(mu), sigma2);
}

TargetPtr funnel_target() { return std::make_shared<FunnelTarget>(); }

TargetPtr mixture_target(std::vector<Vector> means, std::vector<double> weights, double sigma2) {
  require(!means.empty(), "mixture_target: empty component list");
  require(means.size() == weights.size(), "mixture_target: one weight per component required");
  require(sigma2 > 0.0, "mixture_target: variance must be positive");
  for (const auto& m : means)
    require(m.size() == means.front().size() && m.size() >= 1,
            "mixture_target: component means must share a dimension");
  for (double w : weights) require(w > 0.0, "mixture_target: weights must be positive");
  return std::make_shared<MixtureTarget>(std::move(means), std::move(weights), sigma2);
}

TargetPtr logistic_regression_target(Dataset data, double sigma_w2, bool intercept) {
  require(data.size() > 0, "logistic_regression_target: empty dataset");
  require(data.features.rows() == data.labels.size(),
          "logistic_regression_target: feature/label count mismatch");
  require(sigma_w2 > 0.0, "logistic_regression_target: prior variance must be positive");
  for (Eigen::Index i = 0; i < data.labels.size(); ++i)
    require(data.labels[i] == 0.0 || data.labels[i] == 1.0,
            "logistic_regression_target: label outside {0, 1}");
  return std::make_shared<LogisticRegressionTarget>(std::move(data), sigma_w2, intercept);
}

std::vector<bool> BrownianObservations::default_mask() {
  std::vector<bool> mask(kSteps, false);
  for (int i = 1; i <= kSteps; ++i) mask[static_cast<std::size_t>(i - 1)] = i <= 10 || i >= 20;
  return mask;
}

namespace {
void check_observations(const BrownianObservations& obs) {
  require(obs.values.size() == BrownianObservations::kSteps &&
              obs.observed.size() == static_cast<std::size_t>(BrownianObservations::kSteps),
          "brownian_target: observations and mask must both have length 30");
  require(obs.values.allFinite(), "brownian_target: non-finite observation");
}
}  // namespace

TargetPtr brownian_target(const BrownianObservations& obs) {
  check_observations(obs);
  return std::make_shared<BrownianTarget>(obs, std::nullopt, std::nullopt);
}

TargetPtr brownian_fixed_scales_target(const BrownianObservations& obs, double innovation_scale,
                                       double observation_scale) {
  check_observations(obs);
  require(innovation_scale > 0.0 && observation_scale > 0.0, "brownian: scales must be positive");
  return std::make_shared<BrownianTarget>(obs, innovation_scale, observation_scale);
}

double brownian_kalman_log_evidence(const BrownianObservations& obs, double innovation_scale,
                                    double observation_scale) {
  check_observations(obs);
  const double q = innovation_scale * innovation_scale;
  const double r = observation_scale * observation_scale;
  double m = 0.0;
  double p = 0.0;
  double log_ev = 0.0;
  for (int i = 0; i < BrownianObservations::kSteps; ++i) {
    p += q;  // predict: x_i = x_{i-1} + N(0, q), x_0 = 0
    if (!obs.observed[static_cast<std::size_t>(i)]) continue;
    const double s = p + r;
    log_ev += log_normal_1d(obs.values[i], m, s);
    const double gain = p / s;
    m += gain * (obs.values[i] - m);
    p *= 1.0 - gain;
  }
  return log_ev;
}

BrownianObservations synthetic_brownian_observations(RngStream& rng, double innovation_scale,
                                                     double observation_scale) {
  BrownianObservations obs;
  obs.observed = BrownianObservations::default_mask();
  double x = 0.0;
  for (int i = 0; i < BrownianObservations::kSteps; ++i) {
    x += innovation_scale * rng.std_normal();
    const double y = x + observation_scale * rng.std_normal();
    obs.values[i] = obs.observed[static_cast<std::size_t>(i)] ? y : 0.0;
  }
  return obs;
}

double LgcpParams::resolved_mean() const {
  return mean.value_or(std::log(126.0) - 0.5 * variance);
}

double LgcpParams::resolved_area() const {
  return area.value_or(1.0 / static_cast<double>(grid_side * grid_side));
}

Matrix lgcp_covariance(const LgcpParams& params) {
  require(params.grid_side >= 2, "lgcp: grid_side must be >= 2");
  require(params.variance > 0.0 && params.length_scale > 0.0, "lgcp: kernel parameters must be positive");
  const int m = params.grid_side;
  const int d = m * m;
  Matrix cov(d, d);
  const double scale = static_cast<double>(m) * params.length_scale;
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      const double dx = static_cast<double>(a / m - b / m) / m;
      const double dy = static_cast<double>(a % m - b % m) / m;
      cov(a, b) = params.variance * std::exp(-std::hypot(dx, dy) / scale);
    }
  }
  return cov;
}

TargetPtr lgcp_target(const LgcpParams& params, Vector counts) {
  require(counts.allFinite() && (counts.array() >= 0.0).all(), "lgcp: counts must be non-negative");
  return std::make_shared<LgcpTarget>(params, std::move(counts));
}

Vector synthetic_lgcp_counts(const LgcpParams& params, RngStream& rng) {
  const Matrix cov = lgcp_covariance(params);
  const Matrix l = cov.llt().matrixL();
  const Vector x = (l * sample_std_normal(rng, cov.rows())).array() + params.resolved_mean();
  Vector counts(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    // Poisson by inversion; intensities stay small for the shipped grids.
    const double rate = params.resolved_area() * std::exp(x[i]);
    double u = rng.uniform_open0();
    double p = std::exp(-rate);
    double cdf = p;
    int k = 0;
    while (u > cdf && k < 100000) {
      ++k;
      p *= rate / k;
      cdf += p;
    }
    counts[i] = k;
  }
  return counts;
}

ad::Var target_log_gamma(const TargetDensity& target, const ad::Var& x) {
  return ad::row_function(x, target.log_gamma(x.value()), target.grad_log_gamma(x.value()));
}

}  // namespace dds
