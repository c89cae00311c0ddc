#pragma once

#include "dds/adam.hpp"
#include "dds/driftnet.hpp"
#include "dds/sampler.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace dds {

struct TrainConfig {
  long iterations = 3000;
  long batch = 300;
  // Paths per tape; bounds memory. Each chunk draws from its own noise stream.
  long chunk = 100;
  AdamConfig adam;
  std::uint64_t seed = 0;
  // Threads evaluating chunks. The gradient is reduced in chunk order either way.
  int workers = 1;
  bool early_stop = true;
  long plateau_window = 200;
  double plateau_tolerance = 1e-3;
};

struct IterationRecord {
  long iteration = 0;
  double loss = 0.0;
  double elbo = 0.0;
  double ln_z_is = 0.0;
  double se = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  std::vector<double> losses;
  long iterations_run = 0;
  bool stopped_early = false;
};

// Stream ids used for training noise; evaluation should draw from other ids.
std::uint64_t training_stream(long iteration, long chunk);
inline constexpr std::uint64_t kEvaluationStream = 0x4000000000000000ULL;

// Loss and gradient of one batch, without updating the network.
struct BatchGradient {
  double loss = 0.0;
  Vector gradient;
  RowVector log_weights;
};
BatchGradient batch_gradient(const PathSampler& sampler, const DriftNetwork& net, long batch,
                             long chunk, std::uint64_t seed, long iteration, int workers = 1);

// Minimizes the batch KL loss with Adam. Throws DivergedError on a non-finite
// loss, gradient or drift, carrying the failing iteration.
TrainResult train(const PathSampler& sampler, DriftNetwork& net, const TrainConfig& config,
                  const std::function<void(const IterationRecord&)>& on_iteration = {});

}  // namespace dds
