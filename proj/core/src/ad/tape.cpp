#include "gpssm/ad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gpssm/ad/linalg.hpp"
#include "gpssm/error.hpp"

namespace gpssm::ad {

namespace {

std::string shape_str(const Array& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

bool is_scalar(const Array& a) { return a.rows() == 1 && a.cols() == 1; }

void check_elementwise(Op op, const Array& a, const Array& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return;
  if (is_scalar(a) || is_scalar(b)) return;
  throw ShapeError(std::string(op_name(op)) + ": shapes " + shape_str(a) + " and " +
                   shape_str(b) + " do not match");
}

template <typename F>
Array binary(const Array& a, const Array& b, F&& f) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return f(a.array(), b.array()).matrix();
  if (is_scalar(a)) {
    const Array full = Array::Constant(b.rows(), b.cols(), a(0, 0));
    return f(full.array(), b.array()).matrix();
  }
  const Array full = Array::Constant(a.rows(), a.cols(), b(0, 0));
  return f(a.array(), full.array()).matrix();
}

// Reduces an adjoint to the shape of an operand that may have been broadcast.
Array unbroadcast(const Array& adj, const Array& operand) {
  if (adj.rows() == operand.rows() && adj.cols() == operand.cols()) return adj;
  return Array::Constant(1, 1, adj.sum());
}

// `value_of(id)` returns the current value of node `id`.
template <typename ValueOf>
Array compute(const Node& node, ValueOf&& value_of, double* jitter_used) {
  const auto in = [&](int k) -> const Array& { return value_of(node.inputs[k]); };
  const OpAttr& at = node.attr;
  switch (node.op) {
    case Op::Leaf:
    case Op::Constant:
      return node.value;
    case Op::Add:
      check_elementwise(node.op, in(0), in(1));
      return binary(in(0), in(1), [](const auto& x, const auto& y) { return x + y; });
    case Op::Sub:
      check_elementwise(node.op, in(0), in(1));
      return binary(in(0), in(1), [](const auto& x, const auto& y) { return x - y; });
    case Op::Mul:
      check_elementwise(node.op, in(0), in(1));
      return binary(in(0), in(1), [](const auto& x, const auto& y) { return x * y; });
    case Op::Div:
      check_elementwise(node.op, in(0), in(1));
      return binary(in(0), in(1), [](const auto& x, const auto& y) { return x / y; });
    case Op::Neg:
      return -in(0);
    case Op::Scale:
      return in(0) * at.scalar;
    case Op::Shift:
      return (in(0).array() + at.scalar).matrix();
    case Op::Exp:
      return in(0).array().exp().matrix();
    case Op::Log:
      return in(0).array().log().matrix();
    case Op::Sqrt:
      return in(0).array().sqrt().matrix();
    case Op::Square:
      return in(0).array().square().matrix();
    case Op::MatMul:
      if (in(0).cols() != in(1).rows()) {
        throw ShapeError("matmul: " + shape_str(in(0)) + " times " + shape_str(in(1)));
      }
      return in(0) * in(1);
    case Op::Transpose:
      return in(0).transpose();
    case Op::Sum:
      return Array::Constant(1, 1, in(0).sum());
    case Op::RowSum:
      return in(0).rowwise().sum();
    case Op::ColSum:
      return in(0).colwise().sum();
    case Op::Cholesky:
      return cholesky_lower(in(0), at.jitter, jitter_used);
    case Op::TriSolve:
      return lower_solve(in(0), in(1), at.transpose);
    case Op::Slice:
      if (at.row < 0 || at.col < 0 || at.row + at.rows > in(0).rows() ||
          at.col + at.cols > in(0).cols()) {
        throw ShapeError("slice out of range for " + shape_str(in(0)));
      }
      return in(0).block(at.row, at.col, at.rows, at.cols);
    case Op::HConcat: {
      Eigen::Index cols = 0;
      const Eigen::Index rows = in(0).rows();
      for (int id : node.inputs) {
        if (value_of(id).rows() != rows) throw ShapeError("hconcat: row mismatch");
        cols += value_of(id).cols();
      }
      Array out(rows, cols);
      Eigen::Index c = 0;
      for (int id : node.inputs) {
        out.middleCols(c, value_of(id).cols()) = value_of(id);
        c += value_of(id).cols();
      }
      return out;
    }
    case Op::VConcat: {
      Eigen::Index rows = 0;
      const Eigen::Index cols = in(0).cols();
      for (int id : node.inputs) {
        if (value_of(id).cols() != cols) throw ShapeError("vconcat: column mismatch");
        rows += value_of(id).rows();
      }
      Array out(rows, cols);
      Eigen::Index r = 0;
      for (int id : node.inputs) {
        out.middleRows(r, value_of(id).rows()) = value_of(id);
        r += value_of(id).rows();
      }
      return out;
    }
    case Op::DiagPart:
      if (in(0).rows() != in(0).cols()) throw ShapeError("diag_part: not square");
      return in(0).diagonal();
    case Op::DiagMatrix:
      if (in(0).cols() != 1) throw ShapeError("diag_matrix: expects a column vector");
      return in(0).col(0).asDiagonal();
    case Op::SqDist: {
      const Array& x = in(0);
      const Array& z = in(1);
      if (x.cols() != z.cols()) throw ShapeError("sq_dist: dimension mismatch");
      Array out(x.rows(), z.rows());
      for (Eigen::Index j = 0; j < z.rows(); ++j) {
        out.col(j) = (x.rowwise() - z.row(j)).rowwise().squaredNorm();
      }
      return out;
    }
  }
  throw Error("unknown op");
}

void accumulate(Array& slot, const Array& contribution) {
  if (slot.size() == 0) {
    slot = contribution;
  } else {
    slot += contribution;
  }
}

// Propagates the adjoint of node `id` into its inputs.
template <typename ValueOf>
void backprop_node(const Node& node, ValueOf&& value_of, std::vector<Array>& adj, int id) {
  const Array& g = adj[id];
  const Array& out = value_of(id);
  const auto in = [&](int k) -> const Array& { return value_of(node.inputs[k]); };
  const auto acc = [&](int k, const Array& c) { accumulate(adj[node.inputs[k]], c); };
  const auto broadcast_to = [](const Array& operand, const Array& shape_of) -> Array {
    if (operand.rows() == shape_of.rows() && operand.cols() == shape_of.cols()) return operand;
    return Array::Constant(shape_of.rows(), shape_of.cols(), operand(0, 0));
  };

  switch (node.op) {
    case Op::Leaf:
    case Op::Constant:
      return;
    case Op::Add:
      acc(0, unbroadcast(g, in(0)));
      acc(1, unbroadcast(g, in(1)));
      return;
    case Op::Sub:
      acc(0, unbroadcast(g, in(0)));
      acc(1, unbroadcast(-g, in(1)));
      return;
    case Op::Mul: {
      const Array a = broadcast_to(in(0), g);
      const Array b = broadcast_to(in(1), g);
      acc(0, unbroadcast((g.array() * b.array()).matrix(), in(0)));
      acc(1, unbroadcast((g.array() * a.array()).matrix(), in(1)));
      return;
    }
    case Op::Div: {
      const Array a = broadcast_to(in(0), g);
      const Array b = broadcast_to(in(1), g);
      acc(0, unbroadcast((g.array() / b.array()).matrix(), in(0)));
      acc(1, unbroadcast((-g.array() * a.array() / b.array().square()).matrix(), in(1)));
      return;
    }
    case Op::Neg:
      acc(0, -g);
      return;
    case Op::Scale:
      acc(0, g * node.attr.scalar);
      return;
    case Op::Shift:
      acc(0, g);
      return;
    case Op::Exp:
      acc(0, (g.array() * out.array()).matrix());
      return;
    case Op::Log:
      acc(0, (g.array() / in(0).array()).matrix());
      return;
    case Op::Sqrt:
      acc(0, (0.5 * g.array() / out.array()).matrix());
      return;
    case Op::Square:
      acc(0, (2.0 * g.array() * in(0).array()).matrix());
      return;
    case Op::MatMul:
      acc(0, g * in(1).transpose());
      acc(1, in(0).transpose() * g);
      return;
    case Op::Transpose:
      acc(0, g.transpose());
      return;
    case Op::Sum:
      acc(0, Array::Constant(in(0).rows(), in(0).cols(), g(0, 0)));
      return;
    case Op::RowSum:
      acc(0, g.col(0).replicate(1, in(0).cols()));
      return;
    case Op::ColSum:
      acc(0, g.row(0).replicate(in(0).rows(), 1));
      return;
    case Op::Cholesky: {
      // A_bar = L^{-T} sym(Phi(L^T L_bar)) L^{-1}, Phi = lower triangle with
      // halved diagonal. Symmetric because the forward factors sym(A).
      const Array& lower = out;
      const Array lbar = g.triangularView<Eigen::Lower>();
      Array phi = (lower.transpose() * lbar).triangularView<Eigen::Lower>();
      phi.diagonal() *= 0.5;
      const Array sym = 0.5 * (phi + phi.transpose());
      const Array left = lower_solve(lower, sym, true);                               // L^{-T} S
      const Array abar = lower_solve(lower, left.transpose(), true).transpose();  // (L^{-T} S) L^{-1}
      acc(0, 0.5 * (abar + abar.transpose()));
      return;
    }
    case Op::TriSolve: {
      const Array& lower = in(0);
      const bool trans = node.attr.transpose;
      const Array bbar = lower_solve(lower, g, !trans);
      Array lbar = trans ? Array(-out * bbar.transpose()) : Array(-bbar * out.transpose());
      lbar = lbar.triangularView<Eigen::Lower>();
      acc(0, lbar);
      acc(1, bbar);
      return;
    }
    case Op::Slice: {
      Array full = Array::Zero(in(0).rows(), in(0).cols());
      full.block(node.attr.row, node.attr.col, node.attr.rows, node.attr.cols) = g;
      acc(0, full);
      return;
    }
    case Op::HConcat: {
      Eigen::Index c = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const Eigen::Index w = value_of(node.inputs[k]).cols();
        acc(static_cast<int>(k), g.middleCols(c, w));
        c += w;
      }
      return;
    }
    case Op::VConcat: {
      Eigen::Index r = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const Eigen::Index h = value_of(node.inputs[k]).rows();
        acc(static_cast<int>(k), g.middleRows(r, h));
        r += h;
      }
      return;
    }
    case Op::DiagPart: {
      Array full = Array::Zero(in(0).rows(), in(0).cols());
      full.diagonal() = g.col(0);
      acc(0, full);
      return;
    }
    case Op::DiagMatrix:
      acc(0, g.diagonal());
      return;
    case Op::SqDist: {
      const Array& x = in(0);
      const Array& z = in(1);
      const Eigen::VectorXd rs = g.rowwise().sum();
      const Eigen::RowVectorXd cs = g.colwise().sum();
      acc(0, 2.0 * (rs.asDiagonal() * x - g * z));
      acc(1, 2.0 * (cs.transpose().asDiagonal() * z - g.transpose() * x));
      return;
    }
  }
}

template <typename ValueOf>
GradientMap backprop(const Tape& tape, ValueOf&& value_of, Var output, std::span<const Var> wrt) {
  const Array& out = value_of(output.id());
  if (!is_scalar(out)) {
    throw ShapeError("gradient: output must be scalar, got " + shape_str(out));
  }
  std::vector<Array> adj(static_cast<std::size_t>(output.id()) + 1);
  adj[output.id()] = Array::Ones(1, 1);
  for (int id = output.id(); id >= 0; --id) {
    if (adj[id].size() == 0) continue;
    backprop_node(tape.node(id), value_of, adj, id);
  }
  GradientMap grads;
  for (const Var& v : wrt) {
    if (v.tape() != &tape || tape.node(v.id()).op != Op::Leaf) {
      throw Error("gradient: requested variable is not a leaf of this tape");
    }
    const Array& value = value_of(v.id());
    if (v.id() <= output.id() && adj[v.id()].size() != 0) {
      grads[v.id()] = adj[v.id()];
    } else {
      grads[v.id()] = Array::Zero(value.rows(), value.cols());
    }
  }
  return grads;
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Scale: return "scale";
    case Op::Shift: return "shift";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Square: return "square";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Sum: return "sum";
    case Op::RowSum: return "row_sum";
    case Op::ColSum: return "col_sum";
    case Op::Cholesky: return "cholesky";
    case Op::TriSolve: return "tri_solve";
    case Op::Slice: return "slice";
    case Op::HConcat: return "hconcat";
    case Op::VConcat: return "vconcat";
    case Op::DiagPart: return "diag_part";
    case Op::DiagMatrix: return "diag_matrix";
    case Op::SqDist: return "sq_dist";
  }
  return "?";
}

}  // namespace gpssm::ad

namespace gpssm::ad {

const Array& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Array& v = value();
  if (v.size() != 1) throw ShapeError("scalar(): value is " + shape_str(v));
  return v(0, 0);
}

Var Tape::leaf(Array value) {
  if (checked_ && !value.allFinite()) throw NumericError("leaf: non-finite value");
  Node node;
  node.op = Op::Leaf;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  leaves_.push_back(id);
  return {this, id};
}

Var Tape::constant(Array value) {
  if (checked_ && !value.allFinite()) throw NumericError("constant: non-finite value");
  Node node;
  node.op = Op::Constant;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(double value) { return constant(Array::Constant(1, 1, value)); }

Var Tape::push(Op op, std::vector<int> inputs, OpAttr attr) {
  Node node;
  node.op = op;
  node.inputs = std::move(inputs);
  node.attr = attr;
  for (int id : node.inputs) {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) throw Error("push: dangling input");
  }
  double jitter = attr.jitter;
  node.value = compute(
      node, [this](int id) -> const Array& { return nodes_[id].value; }, &jitter);
  if (op == Op::Cholesky) node.attr.jitter = jitter;
  if (checked_ && !node.value.allFinite()) {
    throw NumericError(std::string("non-finite value produced by ") + std::string(op_name(op)));
  }
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

std::vector<Array> Tape::replay(const LeafValues& overrides) const {
  std::vector<Array> values;
  values.reserve(nodes_.size());
  const auto value_of = [&values](int id) -> const Array& { return values[id]; };
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (node.op == Op::Leaf) {
      const auto it = overrides.find(static_cast<int>(id));
      if (it == overrides.end()) {
        values.push_back(node.value);
      } else {
        if (it->second.rows() != node.value.rows() || it->second.cols() != node.value.cols()) {
          throw ShapeError("replay: leaf " + std::to_string(id) + " declared " +
                           shape_str(node.value) + ", supplied " + shape_str(it->second));
        }
        values.push_back(it->second);
      }
    } else if (node.op == Op::Constant) {
      values.push_back(node.value);
    } else {
      double jitter = node.attr.jitter;
      values.push_back(compute(node, value_of, &jitter));
    }
    if (checked_ && !values.back().allFinite()) {
      throw NumericError(std::string("replay: non-finite value produced by ") +
                         std::string(op_name(node.op)));
    }
  }
  for (const auto& [id, value] : overrides) {
    if (id < 0 || id >= static_cast<int>(nodes_.size()) || nodes_[id].op != Op::Leaf) {
      throw Error("replay: override for non-leaf node " + std::to_string(id));
    }
  }
  return values;
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw Error("operands live on different tapes");
  return *a.tape();
}

Var unary(Op op, Var a, OpAttr attr = {}) { return a.tape()->push(op, {a.id()}, attr); }

Var binary_op(Op op, Var a, Var b) { return same_tape(a, b).push(op, {a.id(), b.id()}); }

}  // namespace

Var operator+(Var a, Var b) { return binary_op(Op::Add, a, b); }
Var operator-(Var a, Var b) { return binary_op(Op::Sub, a, b); }
Var operator*(Var a, Var b) { return binary_op(Op::Mul, a, b); }
Var operator/(Var a, Var b) { return binary_op(Op::Div, a, b); }
Var operator-(Var a) { return unary(Op::Neg, a); }
Var operator+(Var a, double c) { return unary(Op::Shift, a, {.scalar = c}); }
Var operator+(double c, Var a) { return a + c; }
Var operator-(Var a, double c) { return a + (-c); }
Var operator-(double c, Var a) { return (-a) + c; }
Var operator*(Var a, double c) { return unary(Op::Scale, a, {.scalar = c}); }
Var operator*(double c, Var a) { return a * c; }
Var operator/(Var a, double c) { return a * (1.0 / c); }

Var exp(Var a) { return unary(Op::Exp, a); }
Var log(Var a) { return unary(Op::Log, a); }
Var sqrt(Var a) { return unary(Op::Sqrt, a); }
Var square(Var a) { return unary(Op::Square, a); }

Var matmul(Var a, Var b) { return binary_op(Op::MatMul, a, b); }
Var transpose(Var a) { return unary(Op::Transpose, a); }

Var sum(Var a) { return unary(Op::Sum, a); }
Var row_sum(Var a) { return unary(Op::RowSum, a); }
Var col_sum(Var a) { return unary(Op::ColSum, a); }

Var cholesky(Var a, double base_jitter) {
  return unary(Op::Cholesky, a, {.jitter = base_jitter});
}

Var tri_solve(Var lower, Var b, bool transpose) {
  return same_tape(lower, b).push(Op::TriSolve, {lower.id(), b.id()}, {.transpose = transpose});
}

Var slice(Var a, int row, int col, int rows, int cols) {
  return unary(Op::Slice, a, {.row = row, .col = col, .rows = rows, .cols = cols});
}

Var col(Var a, int j) { return slice(a, 0, j, static_cast<int>(a.rows()), 1); }

namespace {

Var concat(Op op, std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  std::vector<int> ids;
  ids.reserve(parts.size());
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    ids.push_back(p.id());
  }
  return parts.front().tape()->push(op, std::move(ids));
}

}  // namespace

Var hconcat(std::span<const Var> parts) { return concat(Op::HConcat, parts); }
Var vconcat(std::span<const Var> parts) { return concat(Op::VConcat, parts); }

Var diag_part(Var a) { return unary(Op::DiagPart, a); }
Var diag_matrix(Var v) { return unary(Op::DiagMatrix, v); }
Var sq_dist(Var x, Var z) { return binary_op(Op::SqDist, x, z); }

Var repeat_rows(Var row, Eigen::Index n) {
  if (row.rows() != 1) throw ShapeError("repeat_rows: expects a single row");
  if (n == 1) return row;
  return matmul(row.tape()->constant(Array::Ones(n, 1)), row);
}

Var repeat_cols(Var column, Eigen::Index m) {
  if (column.cols() != 1) throw ShapeError("repeat_cols: expects a single column");
  if (m == 1) return column;
  return matmul(column, column.tape()->constant(Array::Ones(1, m)));
}

Var logdet_from_cholesky(Var lower) { return 2.0 * sum(log(diag_part(lower))); }

Array eval(const Tape& tape, const LeafValues& leaves, Var output) {
  return tape.replay(leaves)[output.id()];
}

GradientMap gradient(const Tape& tape, Var output, std::span<const Var> wrt) {
  return backprop(tape, [&tape](int id) -> const Array& { return tape.value(id); }, output, wrt);
}

GradientMap gradient(const Tape& tape, const LeafValues& leaves, Var output,
                     std::span<const Var> wrt) {
  const std::vector<Array> values = tape.replay(leaves);
  return backprop(tape, [&values](int id) -> const Array& { return values[id]; }, output, wrt);
}

double fd_check(const Tape& tape, const LeafValues& leaves, Var output,
                std::span<const Var> wrt, double eps) {
  const GradientMap grads = gradient(tape, leaves, output, wrt);
  LeafValues point = leaves;
  for (const Var& v : wrt) {
    if (!point.contains(v.id())) point[v.id()] = tape.value(v.id());
  }
  double worst = 0.0;
  for (const Var& v : wrt) {
    const Array base = point[v.id()];
    const Array& ad = grads.at(v.id());
    for (Eigen::Index i = 0; i < base.size(); ++i) {
      Array plus = base;
      Array minus = base;
      plus.data()[i] += eps;
      minus.data()[i] -= eps;
      point[v.id()] = plus;
      const double f_plus = tape.replay(point)[output.id()](0, 0);
      point[v.id()] = minus;
      const double f_minus = tape.replay(point)[output.id()](0, 0);
      const double fd = (f_plus - f_minus) / (2.0 * eps);
      worst = std::max(worst, std::abs(ad.data()[i] - fd) / (std::abs(fd) + 1e-8));
    }
    point[v.id()] = base;
  }
  return worst;
}

}  // namespace gpssm::ad
