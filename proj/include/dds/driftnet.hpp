#pragma once

#include "dds/autodiff.hpp"
#include "dds/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace dds {

struct DriftArchitecture {
  int state_dim = 1;
  // Rows of the network input: state_dim, or 2 * state_dim with momentum.
  int input_dim = 1;
  std::vector<int> hidden = {64, 64};
  int embedding_dim = 64;
  int steps = 64;
  double score_clip = 1e2;
  double output_clip = 1e4;

  bool operator==(const DriftArchitecture&) const = default;
};

void to_json(nlohmann::json& j, const DriftArchitecture& arch);
void from_json(const nlohmann::json& j, DriftArchitecture& arch);

// Sinusoidal features [sin(w_j k/K), cos(w_j k/K)], w_j geometric in [1, 100].
Vector time_embedding(int k, int steps, int dim);

// One dense block of the flat parameter vector.
struct ParamBlock {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index offset = 0;
};

template <typename T>
struct NetParams {
  std::vector<T> blocks;
};

// Drift f(k, x) = clip(NN1(emb(k), x) + NN2(emb(k)) .* clip(score, +-c_in), +-c_out).
// The score input is a constant: no gradient ever flows through it.
class DriftNetwork {
 public:
  DriftNetwork(DriftArchitecture arch, std::uint64_t init_seed);
  DriftNetwork(DriftArchitecture arch, Vector params);

  const DriftArchitecture& architecture() const { return arch_; }
  const Vector& parameters() const { return params_; }
  Vector& parameters() { return params_; }
  Eigen::Index parameter_count() const { return params_.size(); }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  NetParams<Matrix> matrix_params() const;
  NetParams<ad::Var> tape_params(ad::Tape& tape) const;
  // Flat gradient of the tape leaves created by tape_params().
  Vector gather_gradient(const NetParams<ad::Var>& leaves) const;

  const Vector& embedding(int k) const;

  template <typename T>
  T forward(const NetParams<T>& p, int k, const T& input, const Matrix& score) const;

  // Tape-free evaluation with the current parameters.
  Matrix operator()(int k, const Matrix& input, const Matrix& score) const;

 private:
  void build_layout();
  static void check_finite(const Matrix& m, const char* what);

  DriftArchitecture arch_;
  std::vector<ParamBlock> blocks_;
  Vector params_;
  std::vector<Vector> embeddings_;
  std::size_t nn2_first_block_ = 0;
};

// Tape-free drift callable: (step, network input, score) -> drift.
using DriftFn = std::function<Matrix(int, const Matrix&, const Matrix&)>;

DriftFn as_drift_fn(const DriftNetwork& net);
DriftFn zero_drift(int dim);

void save_checkpoint(const DriftNetwork& net, const std::filesystem::path& path,
                     const nlohmann::json& extra);
DriftNetwork load_checkpoint(const std::filesystem::path& path, nlohmann::json* header = nullptr);

// ---------------------------------------------------------------------------

template <typename T>
T DriftNetwork::forward(const NetParams<T>& p, int k, const T& input, const Matrix& score) const {
  check_finite(ad::value(input), "drift input");
  check_finite(score, "score");
  require(ad::value(input).rows() == arch_.input_dim, "drift: input has wrong row count");
  require(score.rows() == arch_.state_dim && score.cols() == ad::value(input).cols(),
          "drift: score shape mismatch");
  const Matrix& emb = embedding(k);
  const auto& b = p.blocks;
  const std::size_t n_hidden = arch_.hidden.size();

  // NN1: first layer splits into embedding and state weights (blocks 0, 1, 2).
  T h = ad::tanh(ad::add_col(ad::matmul(b[1], input), ad::matmul(b[0], emb) + b[2]));
  std::size_t idx = 3;
  for (std::size_t l = 1; l < n_hidden; ++l, idx += 2)
    h = ad::tanh(ad::add_col(ad::matmul(b[idx], h), b[idx + 1]));
  T nn1 = ad::add_col(ad::matmul(b[idx], h), b[idx + 1]);

  // NN2: time-only gate.
  idx = nn2_first_block_;
  T g = ad::tanh(ad::matmul(b[idx], emb) + b[idx + 1]);
  idx += 2;
  for (std::size_t l = 1; l < n_hidden; ++l, idx += 2)
    g = ad::tanh(ad::matmul(b[idx], g) + b[idx + 1]);
  T gate = ad::matmul(b[idx], g) + b[idx + 1];

  const Matrix clipped_score = ad::clip(score, -arch_.score_clip, arch_.score_clip);
  T pre = nn1 + ad::mul_col(clipped_score, gate);
  check_finite(ad::value(pre), "drift output");
  return ad::clip(pre, -arch_.output_clip, arch_.output_clip);
}

}  // namespace dds
