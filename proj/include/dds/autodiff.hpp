#pragma once

#include "dds/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

// Reverse-mode automatic differentiation over dense matrices.
//
// Every node holds a whole matrix so an unrolled K-step trajectory over a
// batch costs O(K) nodes rather than O(K * batch * dim). Operations on a
// plain `Matrix` with the same names are provided alongside so sampler code
// can be written once as a template and run with or without a tape.
namespace dds::ad {

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  MatMulConst,
  Add,
  Sub,
  Scale,
  AddConst,
  AddScalar,
  AddColBroadcast,
  MulColConst,
  CwiseMul,
  Tanh,
  Sigmoid,
  Exp,
  Log,
  Clip,
  ColSqNorm,
  ColDotConst,
  Sum,
  ConcatRows,
  RowScaled,
};

const char* op_name(Op op);

struct Node {
  Op op = Op::Leaf;
  int lhs = -1;
  int rhs = -1;
  bool needs_grad = false;
  double s0 = 0.0;
  double s1 = 0.0;
  Matrix value;
  Matrix grad;
  // Constant operand or cached local partials, depending on `op`.
  Matrix aux;
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf whose gradient is accumulated by backward().
  Var variable(Matrix value);
  // Leaf that never receives a gradient.
  Var constant(Matrix value);

  Var push(Op op, Matrix value, int lhs, int rhs = -1, Matrix aux = {}, double s0 = 0.0,
           double s1 = 0.0);

  // Seeds d(root)/d(root) = 1; root must be 1x1.
  void backward(const Var& root);

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  void accumulate(int id, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(int id, const Expr& g);

  std::vector<Node> nodes_;
};

// --- Var operations -------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var matmul(const Var& a, const Matrix& constant);
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(double s, const Var& a);
inline Var operator*(const Var& a, double s) { return s * a; }
Var operator+(const Var& a, const Matrix& constant);
Var add_scalar(const Var& a, double s);
// x + b 1^T, with b a column.
Var add_col(const Var& x, const Var& b);
// constant .* (g 1^T), with g a column.
Var mul_col(const Matrix& constant, const Var& g);
Var cwise_mul(const Var& a, const Var& b);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var clip(const Var& a, double lo, double hi);
// Row vector of per-column squared norms.
Var col_sqnorm(const Var& a);
// Row vector of per-column dot products with a constant.
Var col_dot(const Var& a, const Matrix& constant);
Var sum(const Var& a);
Var concat_rows(const Var& a, const Var& b);
// Row vector f(x) whose Jacobian is diagonal per column: df_j/dx_{ij} = partials(i, j).
Var row_function(const Var& x, RowVector value, Matrix partials);

inline const Matrix& value(const Var& v) { return v.value(); }
// Constant on the same tape as `like`.
inline Var constant_like(const Var& like, Matrix v) { return like.tape()->constant(std::move(v)); }

// --- Matrix counterparts (no tape) ----------------------------------------

inline Matrix matmul(const Matrix& a, const Matrix& b) { return a * b; }
inline Matrix add_scalar(const Matrix& a, double s) { return a.array() + s; }
inline Matrix add_col(const Matrix& x, const Matrix& b) { return x.colwise() + b.col(0); }
inline Matrix mul_col(const Matrix& constant, const Matrix& g) {
  return constant.array().colwise() * g.col(0).array();
}
inline Matrix cwise_mul(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b); }
// Vectorized through exp; Eigen only vectorizes tanh for float.
Matrix tanh(const Matrix& a);
inline Matrix sigmoid(const Matrix& a) { return (1.0 + (-a.array()).exp()).inverse(); }
inline Matrix exp(const Matrix& a) { return a.array().exp(); }
inline Matrix log(const Matrix& a) { return a.array().log(); }
inline Matrix clip(const Matrix& a, double lo, double hi) {
  return a.cwiseMax(lo).cwiseMin(hi);
}
inline Matrix col_sqnorm(const Matrix& a) { return a.colwise().squaredNorm(); }
inline Matrix col_dot(const Matrix& a, const Matrix& c) {
  return a.cwiseProduct(c).colwise().sum();
}
inline Matrix sum(const Matrix& a) { return Matrix::Constant(1, 1, a.sum()); }
Matrix concat_rows(const Matrix& a, const Matrix& b);

inline const Matrix& value(const Matrix& m) { return m; }
inline Matrix constant_like(const Matrix&, Matrix v) { return v; }

// Gradient of a scalar program f at x.
Vector gradient(const std::function<Var(Tape&, const Var&)>& f, const Vector& x);

}  // namespace dds::ad
