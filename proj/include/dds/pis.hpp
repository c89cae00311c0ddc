#pragma once

#include "dds/dds.hpp"

#include <memory>
#include <string>

namespace dds {

struct PisConfig {
  double sigma = 1.0;
  double horizon = 1.0;
  int steps = 64;
  // "uniform" (delta = T / K) or "cosine" (cosine weights on delta, summing to T).
  std::string grid = "uniform";
  double offset = 0.008;

  double delta() const { return horizon / static_cast<double>(steps); }
};

// Steps y' = y + delta u + sigma sqrt(delta) eps from y_0 = 0; terminal reference N(0, sigma^2 T I).
DiffusionPlan pis_plan(const PisConfig& config);

StepOutput pis_step(const DriftFn& drift, int j, const Matrix& y, double delta, double sigma,
                    const Matrix& eps, const TargetDensity& target);

std::unique_ptr<OverdampedSampler> make_pis_sampler(const PisConfig& config, TargetPtr target);

}  // namespace dds
