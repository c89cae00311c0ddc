#pragma once

#include "dds/types.hpp"

namespace dds {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Multiplicative learning-rate decay applied every `decay_every` steps (1 = none).
  double decay = 1.0;
  long decay_every = 1;
};

struct AdamState {
  explicit AdamState(Eigen::Index n_params, AdamConfig config = {});

  AdamConfig config;
  Vector first_moment;
  Vector second_moment;
  long step = 0;

  double current_learning_rate() const;
};

// In-place bias-corrected Adam update of `params`.
void adam_step(AdamState& state, Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grads);

}  // namespace dds
