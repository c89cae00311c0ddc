#pragma once

#include "dds/types.hpp"

#include <array>
#include <cstdint>
#include <optional>

namespace dds {

// Counter-based generator (Philox4x32-10). A stream is identified by
// (seed, stream id); the counter advances by one block per draw.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  // Independent substream keyed on the same seed.
  RngStream substream(std::uint64_t stream) const { return RngStream(seed_, stream); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64();
  // Uniform on (0, 1].
  double uniform_open0();
  double std_normal();
  // +1 or -1 with equal probability.
  double rademacher();

 private:
  std::array<std::uint32_t, 4> next_block();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  std::optional<double> spare_;
};

Vector sample_std_normal(RngStream& rng, Eigen::Index n);
Matrix sample_std_normal(RngStream& rng, Eigen::Index rows, Eigen::Index cols);
Matrix sample_rademacher(RngStream& rng, Eigen::Index rows, Eigen::Index cols);

}  // namespace dds
