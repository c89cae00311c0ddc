#include "dds/train.hpp"

#include "dds/rng.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace dds {

std::uint64_t training_stream(long iteration, long chunk) {
  return (static_cast<std::uint64_t>(iteration) + 1) << 20 | static_cast<std::uint64_t>(chunk);
}

namespace {

struct ChunkResult {
  double loss = 0.0;
  Vector gradient;
  RowVector log_weights;
};

ChunkResult run_chunk(const PathSampler& sampler, const DriftNetwork& net, long size, double scale,
                      RngStream rng) {
  ad::Tape tape;
  const auto params = net.tape_params(tape);
  TapeBatch b = sampler.simulate_tape(tape, net, params, size, rng);
  const ad::Var loss = scale * ad::sum(b.loss_terms);
  tape.backward(loss);
  return {loss.value()(0, 0), net.gather_gradient(params), std::move(b.log_weights)};
}

}  // namespace

BatchGradient batch_gradient(const PathSampler& sampler, const DriftNetwork& net, long batch,
                             long chunk, std::uint64_t seed, long iteration, int workers) {
  require(batch >= 1, "batch size must be >= 1");
  chunk = chunk <= 0 ? batch : std::min(chunk, batch);
  const long n_chunks = (batch + chunk - 1) / chunk;
  const double scale = 1.0 / static_cast<double>(batch);
  std::vector<ChunkResult> results(static_cast<std::size_t>(n_chunks));
  std::vector<std::exception_ptr> errors(results.size());

  auto work = [&](long c) {
    try {
      const long size = std::min(chunk, batch - c * chunk);
      results[c] = run_chunk(sampler, net, size, scale,
                             RngStream(seed, training_stream(iteration, c)));
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (workers <= 1 || n_chunks == 1) {
    for (long c = 0; c < n_chunks; ++c) work(c);
  } else {
    std::vector<std::jthread> pool;
    const long w = std::min<long>(workers, n_chunks);
    for (long t = 0; t < w; ++t)
      pool.emplace_back([&, t] {
        for (long c = t; c < n_chunks; c += w) work(c);
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  BatchGradient out;
  out.gradient = Vector::Zero(net.parameter_count());
  out.log_weights.resize(batch);
  Eigen::Index pos = 0;
  for (const auto& r : results) {
    out.loss += r.loss;
    out.gradient += r.gradient;
    out.log_weights.segment(pos, r.log_weights.size()) = r.log_weights;
    pos += r.log_weights.size();
  }
  return out;
}

TrainResult train(const PathSampler& sampler, DriftNetwork& net, const TrainConfig& config,
                  const std::function<void(const IterationRecord&)>& on_iteration) {
  require(config.batch >= 1, "train: batch size must be >= 1");
  require(config.iterations >= 0, "train: iteration budget must be non-negative");
  require(net.architecture().input_dim == sampler.network_input_dim() &&
              net.architecture().steps == sampler.steps(),
          "train: network architecture does not match the sampler");
  AdamState adam(net.parameter_count(), config.adam);
  TrainResult result;
  const long window = config.plateau_window;

  for (long it = 0; it < config.iterations; ++it) {
    BatchGradient g;
    try {
      g = batch_gradient(sampler, net, config.batch, config.chunk, config.seed, it, config.workers);
    } catch (const NonFiniteError& e) {
      throw DivergedError(e.what(), it);
    }
    if (!std::isfinite(g.loss)) throw DivergedError("non-finite loss", it);
    if (!g.gradient.allFinite()) throw DivergedError("non-finite gradient", it);
    adam_step(adam, net.parameters(), g.gradient);
    if (!net.parameters().allFinite()) throw DivergedError("non-finite parameters", it);

    result.losses.push_back(g.loss);
    result.iterations_run = it + 1;
    if (on_iteration) {
      IterationRecord rec;
      rec.iteration = it;
      rec.loss = g.loss;
      rec.grad_norm = g.gradient.norm();
      if (g.log_weights.size() >= 2 && g.log_weights.allFinite()) {
        const LogZReport r = summarize_log_weights(g.log_weights.transpose());
        rec.elbo = r.elbo;
        rec.ln_z_is = r.ln_z_is;
        rec.se = r.elbo_se;
      }
      on_iteration(rec);
    }

    if (config.early_stop && window > 0 && result.iterations_run >= 2 * window) {
      const auto end = result.losses.end();
      double cur = 0.0, prev = 0.0;
      for (auto p = end - window; p != end; ++p) cur += *p;
      for (auto p = end - 2 * window; p != end - window; ++p) prev += *p;
      cur /= static_cast<double>(window);
      prev /= static_cast<double>(window);
      if (std::abs(cur - prev) / std::max(std::abs(prev), 1.0) < config.plateau_tolerance) {
        result.stopped_early = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace dds
