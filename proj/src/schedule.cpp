#include "dds/schedule.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>

namespace dds {

NoiseSchedule::NoiseSchedule(std::string kind, Vector alphas, double sigma, double horizon,
                             double alpha_max, double offset)
    : kind_(std::move(kind)),
      alphas_(std::move(alphas)),
      sigma_(sigma),
      horizon_(horizon),
      alpha_max_(alpha_max),
      offset_(offset) {
  require(alphas_.size() >= 1, "schedule: at least one step required");
  require(sigma_ > 0.0, "schedule: sigma must be positive");
  require(horizon_ > 0.0, "schedule: horizon must be positive");
  for (Eigen::Index k = 0; k < alphas_.size(); ++k)
    require(alphas_[k] > 0.0 && alphas_[k] < 1.0, "schedule: alpha_k must lie in (0, 1)");
  const Eigen::ArrayXd keep = (1.0 - alphas_.array()).sqrt();
  lambdas_ = (1.0 - keep).matrix();
  kappas_ = (keep * (1.0 - keep)).matrix();
}

double NoiseSchedule::em_beta_delta(int k) const { return -0.5 * std::log1p(-alpha(k)); }

double NoiseSchedule::signal_scale(int k) const {
  double a = 1.0;
  for (int i = 1; i <= k; ++i) a *= std::sqrt(1.0 - alpha(i));
  return a;
}

NoiseSchedule NoiseSchedule::with_sigma(double sigma) const {
  return NoiseSchedule(kind_, alphas_, sigma, horizon_, alpha_max_, offset_);
}

Vector cosine_alphas_unclipped(int steps, double alpha_max, double horizon, double offset) {
  require(steps >= 1, "cosine_schedule: K must be >= 1");
  require(alpha_max > 0.0 && horizon > 0.0, "cosine_schedule: alpha_max and T must be positive");
  require(offset >= 0.0, "cosine_schedule: s must be non-negative");
  Vector alphas(steps);
  const double k_total = static_cast<double>(steps);
  for (int k = 1; k <= steps; ++k) {
    const double c = std::cos(0.5 * std::numbers::pi * (1.0 - k / k_total + offset) / (1.0 + offset));
    const double root = c * c;
    alphas[k - 1] = root * root;
  }
  alphas *= alpha_max * horizon / alphas.sum();
  return alphas;
}

NoiseSchedule cosine_schedule(int steps, double alpha_max, double horizon, double offset,
                              double sigma) {
  Vector alphas = cosine_alphas_unclipped(steps, alpha_max, horizon, offset);
  if ((alphas.array() >= 1.0).any())
    throw InvalidArgument("cosine_schedule: alpha_max * T = " + std::to_string(alpha_max * horizon) +
                          " pushes alpha_k to 1 or above");
  alphas = alphas.cwiseMax(kAlphaClip).cwiseMin(1.0 - kAlphaClip);
  return NoiseSchedule("cosine", std::move(alphas), sigma, horizon, alpha_max, offset);
}

NoiseSchedule uniform_schedule(int steps, double alpha_max, double horizon, double sigma) {
  require(steps >= 1, "uniform_schedule: K must be >= 1");
  require(alpha_max > 0.0 && horizon > 0.0, "uniform_schedule: alpha_max and T must be positive");
  const double a = alpha_max * horizon / static_cast<double>(steps);
  if (a >= 1.0)
    throw InvalidArgument("uniform_schedule: per-step alpha " + std::to_string(a) + " is not below 1");
  return NoiseSchedule("uniform", Vector::Constant(steps, a), sigma, horizon, alpha_max, 0.0);
}

void to_json(nlohmann::json& j, const NoiseSchedule& schedule) {
  const Vector& a = schedule.alphas();
  j = nlohmann::json{{"kind", schedule.kind()},
                     {"K", schedule.steps()},
                     {"alpha_max", schedule.alpha_max()},
                     {"T", schedule.horizon()},
                     {"s", schedule.offset()},
                     {"sigma", schedule.sigma()},
                     {"alphas", std::vector<double>(a.data(), a.data() + a.size())}};
}

NoiseSchedule schedule_from_json(const nlohmann::json& j) {
  const auto values = j.at("alphas").get<std::vector<double>>();
  const int k = j.at("K").get<int>();
  require(static_cast<int>(values.size()) == k, "schedule json: K does not match alphas length");
  Vector alphas = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  return NoiseSchedule(j.at("kind").get<std::string>(), std::move(alphas), j.value("sigma", 1.0),
                       j.at("T").get<double>(), j.at("alpha_max").get<double>(),
                       j.at("s").get<double>());
}

}  // namespace dds
