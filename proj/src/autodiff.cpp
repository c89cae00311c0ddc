#include "dds/autodiff.hpp"

#include <string>
#include <utility>

namespace dds::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::MatMulConst: return "matmul_const";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Scale: return "scale";
    case Op::AddConst: return "add_const";
    case Op::AddScalar: return "add_scalar";
    case Op::AddColBroadcast: return "add_col";
    case Op::MulColConst: return "mul_col";
    case Op::CwiseMul: return "cwise_mul";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Clip: return "clip";
    case Op::ColSqNorm: return "col_sqnorm";
    case Op::ColDotConst: return "col_dot";
    case Op::Sum: return "sum";
    case Op::ConcatRows: return "concat_rows";
    case Op::RowScaled: return "row_function";
  }
  return "unknown";
}

const Matrix& Var::value() const { return tape_->node(id_).value; }
const Matrix& Var::grad() const { return tape_->node(id_).grad; }

Var Tape::variable(Matrix value) {
  Node n;
  n.op = Op::Leaf;
  n.needs_grad = true;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::push(Op op, Matrix value, int lhs, int rhs, Matrix aux, double s0, double s1) {
  if (!value.allFinite())
    throw NonFiniteError(std::string("non-finite value in forward pass at op '") + op_name(op) +
                         "'");
  Node n;
  n.op = op;
  n.lhs = lhs;
  n.rhs = rhs;
  n.needs_grad = (lhs >= 0 && nodes_[lhs].needs_grad) || (rhs >= 0 && nodes_[rhs].needs_grad);
  n.s0 = s0;
  n.s1 = s1;
  n.value = std::move(value);
  n.aux = std::move(aux);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

template <typename Expr>
void Tape::accumulate_expr(int id, const Expr& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::accumulate(int id, const Matrix& g) { accumulate_expr(id, g); }

void Tape::backward(const Var& root) {
  require(root.tape() == this, "backward: variable belongs to another tape");
  require(root.rows() == 1 && root.cols() == 1, "backward: root must be a scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[root.id()].grad = Matrix::Ones(1, 1);

  for (int id = static_cast<int>(root.id()); id >= 0; --id) {
    // Copy out what we need: accumulate() may touch other nodes but never this one.
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.size() == 0 || n.op == Op::Leaf) continue;
    const Matrix& g = n.grad;
    const int a = n.lhs;
    const int b = n.rhs;
    switch (n.op) {
      case Op::MatMul:
        if (nodes_[a].needs_grad) accumulate_expr(a, g * nodes_[b].value.transpose());
        if (nodes_[b].needs_grad) accumulate_expr(b, nodes_[a].value.transpose() * g);
        break;
      case Op::MatMulConst:
        accumulate_expr(a, g * n.aux.transpose());
        break;
      case Op::Add:
        accumulate(a, g);
        accumulate(b, g);
        break;
      case Op::Sub:
        accumulate(a, g);
        accumulate_expr(b, -g);
        break;
      case Op::Scale:
        accumulate_expr(a, n.s0 * g);
        break;
      case Op::AddConst:
      case Op::AddScalar:
        accumulate(a, g);
        break;
      case Op::AddColBroadcast:
        accumulate(a, g);
        if (nodes_[b].needs_grad) accumulate_expr(b, g.rowwise().sum());
        break;
      case Op::MulColConst:
        accumulate_expr(a, g.cwiseProduct(n.aux).rowwise().sum());
        break;
      case Op::CwiseMul:
        if (nodes_[a].needs_grad) accumulate_expr(a, g.cwiseProduct(nodes_[b].value));
        if (nodes_[b].needs_grad) accumulate_expr(b, g.cwiseProduct(nodes_[a].value));
        break;
      case Op::Tanh:
        accumulate_expr(a, (g.array() * (1.0 - n.value.array().square())).matrix());
        break;
      case Op::Sigmoid:
        accumulate_expr(a, (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
        break;
      case Op::Exp:
        accumulate_expr(a, g.cwiseProduct(n.value));
        break;
      case Op::Log:
        accumulate_expr(a, g.cwiseQuotient(nodes_[a].value));
        break;
      case Op::Clip: {
        const auto& x = nodes_[a].value.array();
        accumulate_expr(a, ((x > n.s0 && x < n.s1).cast<double>() * g.array()).matrix());
        break;
      }
      case Op::ColSqNorm:
        accumulate_expr(a, (nodes_[a].value.array().rowwise() * (2.0 * g.row(0).array())).matrix());
        break;
      case Op::ColDotConst:
        accumulate_expr(a, (n.aux.array().rowwise() * g.row(0).array()).matrix());
        break;
      case Op::Sum:
        accumulate_expr(a, Matrix::Constant(nodes_[a].value.rows(), nodes_[a].value.cols(),
                                             g(0, 0)));
        break;
      case Op::ConcatRows: {
        const Eigen::Index ra = nodes_[a].value.rows();
        const Eigen::Index rb = nodes_[b].value.rows();
        if (nodes_[a].needs_grad) accumulate_expr(a, g.topRows(ra));
        if (nodes_[b].needs_grad) accumulate_expr(b, g.bottomRows(rb));
        break;
      }
      case Op::RowScaled:
        accumulate_expr(a, (n.aux.array().rowwise() * g.row(0).array()).matrix());
        break;
      case Op::Leaf:
        break;
      default:
        throw Error(std::string("backward: unsupported op '") + op_name(n.op) + "'");
    }
  }
}

namespace {

Tape& tape_of(const Var& a) {
  require(a.tape() != nullptr, "autodiff: variable is not attached to a tape");
  return *a.tape();
}

void same_tape(const Var& a, const Var& b) {
  require(a.tape() == b.tape(), "autodiff: operands live on different tapes");
}

void same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument(std::string("autodiff: shape mismatch in ") + op);
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  same_tape(a, b);
  require(a.cols() == b.rows(), "autodiff: shape mismatch in matmul");
  return tape_of(a).push(Op::MatMul, a.value() * b.value(), a.id(), b.id());
}

Var matmul(const Var& a, const Matrix& constant) {
  require(a.cols() == constant.rows(), "autodiff: shape mismatch in matmul");
  return tape_of(a).push(Op::MatMulConst, a.value() * constant, a.id(), -1, constant);
}

Var operator+(const Var& a, const Var& b) {
  same_tape(a, b);
  same_shape(a.value(), b.value(), "add");
  return tape_of(a).push(Op::Add, a.value() + b.value(), a.id(), b.id());
}

Var operator-(const Var& a, const Var& b) {
  same_tape(a, b);
  same_shape(a.value(), b.value(), "sub");
  return tape_of(a).push(Op::Sub, a.value() - b.value(), a.id(), b.id());
}

Var operator*(double s, const Var& a) {
  return tape_of(a).push(Op::Scale, s * a.value(), a.id(), -1, {}, s);
}

Var operator+(const Var& a, const Matrix& constant) {
  same_shape(a.value(), constant, "add_const");
  return tape_of(a).push(Op::AddConst, a.value() + constant, a.id());
}

Var add_scalar(const Var& a, double s) {
  return tape_of(a).push(Op::AddScalar, (a.value().array() + s).matrix(), a.id(), -1, {}, s);
}

Var add_col(const Var& x, const Var& b) {
  same_tape(x, b);
  require(b.cols() == 1 && b.rows() == x.rows(), "autodiff: shape mismatch in add_col");
  return tape_of(x).push(Op::AddColBroadcast, x.value().colwise() + b.value().col(0), x.id(),
                         b.id());
}

Var mul_col(const Matrix& constant, const Var& g) {
  require(g.cols() == 1 && g.rows() == constant.rows(), "autodiff: shape mismatch in mul_col");
  Matrix v = constant.array().colwise() * g.value().col(0).array();
  return tape_of(g).push(Op::MulColConst, std::move(v), g.id(), -1, constant);
}

Var cwise_mul(const Var& a, const Var& b) {
  same_tape(a, b);
  same_shape(a.value(), b.value(), "cwise_mul");
  return tape_of(a).push(Op::CwiseMul, a.value().cwiseProduct(b.value()), a.id(), b.id());
}

Var tanh(const Var& a) { return tape_of(a).push(Op::Tanh, ad::tanh(a.value()), a.id()); }

Var sigmoid(const Var& a) {
  return tape_of(a).push(Op::Sigmoid, ad::sigmoid(a.value()), a.id());
}

Var exp(const Var& a) { return tape_of(a).push(Op::Exp, ad::exp(a.value()), a.id()); }

Var log(const Var& a) { return tape_of(a).push(Op::Log, ad::log(a.value()), a.id()); }

Var clip(const Var& a, double lo, double hi) {
  return tape_of(a).push(Op::Clip, ad::clip(a.value(), lo, hi), a.id(), -1, {}, lo, hi);
}

Var col_sqnorm(const Var& a) {
  return tape_of(a).push(Op::ColSqNorm, ad::col_sqnorm(a.value()), a.id());
}

Var col_dot(const Var& a, const Matrix& constant) {
  same_shape(a.value(), constant, "col_dot");
  return tape_of(a).push(Op::ColDotConst, ad::col_dot(a.value(), constant), a.id(), -1, constant);
}

Var sum(const Var& a) { return tape_of(a).push(Op::Sum, ad::sum(a.value()), a.id()); }

Matrix tanh(const Matrix& a) {
  const auto x = a.array();
  Matrix out(a.rows(), a.cols());
  auto e = out.array();
  e = (2.0 * x.cwiseMin(20.0)).exp();
  // Series near zero, where e - 1 cancels.
  e = (x.abs() < 0.01)
          .select(x * (1.0 + x.square() * (-1.0 / 3 + x.square() * (2.0 / 15 - x.square() * (17.0 / 315)))),
                  (e - 1.0) / (e + 1.0));
  return out;
}

Matrix concat_rows(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "concat_rows: column mismatch");
  Matrix out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

Var concat_rows(const Var& a, const Var& b) {
  same_tape(a, b);
  return tape_of(a).push(Op::ConcatRows, ad::concat_rows(a.value(), b.value()), a.id(), b.id());
}

Var row_function(const Var& x, RowVector value, Matrix partials) {
  require(value.size() == x.cols(), "row_function: value length must equal column count");
  same_shape(x.value(), partials, "row_function");
  return tape_of(x).push(Op::RowScaled, Matrix(std::move(value)), x.id(), -1,
                         std::move(partials));
}

Vector gradient(const std::function<Var(Tape&, const Var&)>& f, const Vector& x) {
  Tape tape;
  const Var input = tape.variable(x);
  const Var out = f(tape, input);
  tape.backward(out);
  if (input.grad().size() == 0) return Vector::Zero(x.size());
  return input.grad().col(0);
}

}  // namespace dds::ad
