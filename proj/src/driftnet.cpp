#include "dds/driftnet.hpp"

#include "dds/rng.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace dds {

void to_json(nlohmann::json& j, const DriftArchitecture& a) {
  j = nlohmann::json{{"state_dim", a.state_dim},       {"input_dim", a.input_dim},
                     {"hidden", a.hidden},             {"embedding_dim", a.embedding_dim},
                     {"steps", a.steps},               {"score_clip", a.score_clip},
                     {"output_clip", a.output_clip}};
}

void from_json(const nlohmann::json& j, DriftArchitecture& a) {
  a.state_dim = j.at("state_dim").get<int>();
  a.input_dim = j.at("input_dim").get<int>();
  a.hidden = j.at("hidden").get<std::vector<int>>();
  a.embedding_dim = j.at("embedding_dim").get<int>();
  a.steps = j.at("steps").get<int>();
  a.score_clip = j.at("score_clip").get<double>();
  a.output_clip = j.at("output_clip").get<double>();
}

Vector time_embedding(int k, int steps, int dim) {
  require(steps >= 1 && k >= 0 && k <= steps, "time_embedding: step index outside [0, K]");
  require(dim >= 2 && dim % 2 == 0, "time_embedding: dimension must be even and >= 2");
  const int half = dim / 2;
  const double t = static_cast<double>(k) / static_cast<double>(steps);
  Vector e(dim);
  for (int j = 0; j < half; ++j) {
    const double w = half == 1 ? 1.0 : std::pow(100.0, static_cast<double>(j) / (half - 1));
    e[j] = std::sin(w * t);
    e[half + j] = std::cos(w * t);
  }
  return e;
}

void DriftNetwork::build_layout() {
  const auto& a = arch_;
  require(a.state_dim >= 1 && a.input_dim >= a.state_dim, "drift network: invalid dimensions");
  require(!a.hidden.empty(), "drift network: at least one hidden layer required");
  for (int h : a.hidden) require(h >= 1, "drift network: hidden sizes must be positive");
  require(a.steps >= 1, "drift network: steps must be >= 1");
  require(a.score_clip > 0.0 && a.output_clip > 0.0, "drift network: clip bounds must be positive");

  Eigen::Index offset = 0;
  auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
    blocks_.push_back({std::move(name), rows, cols, offset});
    offset += rows * cols;
  };
  const auto& h = a.hidden;
  add("nn1.w_emb", h[0], a.embedding_dim);
  add("nn1.w_in", h[0], a.input_dim);
  add("nn1.b0", h[0], 1);
  for (std::size_t l = 1; l < h.size(); ++l) {
    add("nn1.w" + std::to_string(l), h[l], h[l - 1]);
    add("nn1.b" + std::to_string(l), h[l], 1);
  }
  add("nn1.w_out", a.state_dim, h.back());
  add("nn1.b_out", a.state_dim, 1);
  nn2_first_block_ = blocks_.size();
  add("nn2.w0", h[0], a.embedding_dim);
  add("nn2.b0", h[0], 1);
  for (std::size_t l = 1; l < h.size(); ++l) {
    add("nn2.w" + std::to_string(l), h[l], h[l - 1]);
    add("nn2.b" + std::to_string(l), h[l], 1);
  }
  add("nn2.w_out", a.state_dim, h.back());
  add("nn2.b_out", a.state_dim, 1);

  embeddings_.clear();
  for (int k = 0; k <= a.steps; ++k) embeddings_.push_back(time_embedding(k, a.steps, a.embedding_dim));
}

DriftNetwork::DriftNetwork(DriftArchitecture arch, std::uint64_t init_seed) : arch_(std::move(arch)) {
  build_layout();
  const auto& last = blocks_.back();
  params_ = Vector::Zero(last.offset + last.rows * last.cols);
  RngStream rng(init_seed, 0x1417);
  for (const auto& b : blocks_) {
    // Output layers and all biases stay at zero.
    const bool output = b.name.ends_with("_out");
    if (output || b.cols == 1) continue;
    // Glorot bound uses the layer's full fan-in (embedding + input for the first NN1 layer).
    Eigen::Index fan_in = b.cols;
    if (b.name == "nn1.w_emb" || b.name == "nn1.w_in")
      fan_in = arch_.embedding_dim + arch_.input_dim;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + b.rows));
    for (Eigen::Index i = 0; i < b.rows * b.cols; ++i)
      params_[b.offset + i] = bound * (2.0 * rng.uniform_open0() - 1.0);
  }
}

DriftNetwork::DriftNetwork(DriftArchitecture arch, Vector params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  build_layout();
  const auto& last = blocks_.back();
  require(params_.size() == last.offset + last.rows * last.cols,
          "drift network: parameter vector does not match architecture");
}

NetParams<Matrix> DriftNetwork::matrix_params() const {
  NetParams<Matrix> p;
  p.blocks.reserve(blocks_.size());
  for (const auto& b : blocks_)
    p.blocks.emplace_back(Eigen::Map<const Matrix>(params_.data() + b.offset, b.rows, b.cols));
  return p;
}

NetParams<ad::Var> DriftNetwork::tape_params(ad::Tape& tape) const {
  NetParams<ad::Var> p;
  p.blocks.reserve(blocks_.size());
  for (const auto& b : blocks_)
    p.blocks.push_back(
        tape.variable(Eigen::Map<const Matrix>(params_.data() + b.offset, b.rows, b.cols)));
  return p;
}

Vector DriftNetwork::gather_gradient(const NetParams<ad::Var>& leaves) const {
  Vector g = Vector::Zero(params_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Matrix& gi = leaves.blocks[i].grad();
    if (gi.size() == 0) continue;
    Eigen::Map<Matrix>(g.data() + blocks_[i].offset, blocks_[i].rows, blocks_[i].cols) = gi;
  }
  return g;
}

const Vector& DriftNetwork::embedding(int k) const {
  require(k >= 0 && k <= arch_.steps, "drift network: step index outside [0, K]");
  return embeddings_[static_cast<std::size_t>(k)];
}

void DriftNetwork::check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NonFiniteError(std::string("drift network: non-finite ") + what);
}

Matrix DriftNetwork::operator()(int k, const Matrix& input, const Matrix& score) const {
  return forward(matrix_params(), k, input, score);
}

DriftFn as_drift_fn(const DriftNetwork& net) {
  auto params = std::make_shared<NetParams<Matrix>>(net.matrix_params());
  return [&net, params](int k, const Matrix& input, const Matrix& score) {
    return net.forward(*params, k, input, score);
  };
}

DriftFn zero_drift(int dim) {
  return [dim](int, const Matrix& input, const Matrix&) { return Matrix::Zero(dim, input.cols()); };
}

namespace {
constexpr const char* kCheckpointFormat = "dds-lab-checkpoint";
}

void save_checkpoint(const DriftNetwork& net, const std::filesystem::path& path,
                     const nlohmann::json& extra) {
  nlohmann::json header = extra.is_object() ? extra : nlohmann::json::object();
  header["format"] = kCheckpointFormat;
  header["version"] = 1;
  header["architecture"] = net.architecture();
  header["n_params"] = net.parameter_count();
  header["payload"] = "float64-le";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
  out << header.dump() << '\n';
  const Vector& p = net.parameters();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(p[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
  }
  if (!out) throw Error("failed writing checkpoint '" + path.string() + "'");
}

DriftNetwork load_checkpoint(const std::filesystem::path& path, nlohmann::json* header_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  const auto header = nlohmann::json::parse(line);
  if (header.value("format", "") != kCheckpointFormat)
    throw Error("'" + path.string() + "' is not a checkpoint");
  const auto arch = header.at("architecture").get<DriftArchitecture>();
  const auto n = header.at("n_params").get<Eigen::Index>();
  Vector params(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    char buf[8];
    if (!in.read(buf, 8)) throw Error("truncated checkpoint payload in '" + path.string() + "'");
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    params[i] = std::bit_cast<double>(bits);
  }
  if (header_out) *header_out = header;
  return DriftNetwork(arch, std::move(params));
}

}  // namespace dds
