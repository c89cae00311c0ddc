#include "dds/adam.hpp"

#include <cmath>

namespace dds {

AdamState::AdamState(Eigen::Index n_params, AdamConfig cfg)
    : config(cfg),
      first_moment(Vector::Zero(n_params)),
      second_moment(Vector::Zero(n_params)) {
  require(config.learning_rate > 0.0, "adam: learning rate must be positive");
  require(config.beta1 >= 0.0 && config.beta1 < 1.0, "adam: beta1 outside [0, 1)");
  require(config.beta2 >= 0.0 && config.beta2 < 1.0, "adam: beta2 outside [0, 1)");
  require(config.decay > 0.0 && config.decay_every >= 1, "adam: invalid decay schedule");
}

double AdamState::current_learning_rate() const {
  return config.learning_rate *
         std::pow(config.decay, static_cast<double>(step / config.decay_every));
}

void adam_step(AdamState& state, Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grads) {
  require(params.size() == grads.size() && params.size() == state.first_moment.size(),
          "adam_step: shape mismatch between parameters, gradients and state");
  const AdamConfig& c = state.config;
  const double lr = state.current_learning_rate();
  ++state.step;
  state.first_moment = c.beta1 * state.first_moment + (1.0 - c.beta1) * grads;
  state.second_moment =
      c.beta2 * state.second_moment + (1.0 - c.beta2) * grads.cwiseProduct(grads);
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  params.array() -= lr * (state.first_moment.array() / bc1) /
                    ((state.second_moment.array() / bc2).sqrt() + c.epsilon);
}

}  // namespace dds
