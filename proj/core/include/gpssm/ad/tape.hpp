#pragma once

// Reverse-mode automatic differentiation over dense 64-bit matrices.
//
// A Tape records a topologically ordered list of primitive operations. Every
// intermediate value is kept, so a gradient can be computed directly after
// recording, and the tape can be replayed on new leaf values (used by the
// finite-difference checker). Arrays are rank <= 2: scalars are 1x1 and
// vectors are n x 1 columns.
//
// Broadcasting is limited to scalar-tensor and matching-shape elementwise
// operations. Row/column broadcasts are expressed as products with constant
// ones vectors (see `repeat_rows`).

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

namespace gpssm::ad {

using Array = Eigen::MatrixXd;
using LeafId = int;
using LeafValues = std::map<LeafId, Array>;
using GradientMap = std::map<LeafId, Array>;

enum class Op : std::uint8_t {
  Leaf,
  Constant,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Scale,
  Shift,
  Exp,
  Log,
  Sqrt,
  Square,
  MatMul,
  Transpose,
  Sum,
  RowSum,
  ColSum,
  Cholesky,
  TriSolve,
  Slice,
  HConcat,
  VConcat,
  DiagPart,
  DiagMatrix,
  SqDist,
};

std::string_view op_name(Op op);

struct OpAttr {
  double scalar = 0.0;
  // Slice extents.
  int row = 0;
  int col = 0;
  int rows = 0;
  int cols = 0;
  // TriSolve: solve with the transpose of the lower factor.
  bool transpose = false;
  // Cholesky: absolute diagonal jitter used when the node was recorded.
  double jitter = 0.0;
};

struct Node {
  Op op = Op::Constant;
  std::vector<int> inputs;
  OpAttr attr;
  Array value;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  [[nodiscard]] Tape* tape() const { return tape_; }
  [[nodiscard]] int id() const { return id_; }
  [[nodiscard]] bool valid() const { return tape_ != nullptr; }
  [[nodiscard]] const Array& value() const;
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
  [[nodiscard]] double scalar() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// In checked mode every recorded value is tested for NaN/Inf.
  explicit Tape(bool checked = true) : checked_(checked) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// A differentiable input.
  Var leaf(Array value);
  /// A non-differentiable input (data, reparameterization noise, masks).
  Var constant(Array value);
  Var constant(double value);

  [[nodiscard]] const Array& value(int id) const { return nodes_[id].value; }
  [[nodiscard]] const Node& node(int id) const { return nodes_[id]; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] bool checked() const { return checked_; }
  [[nodiscard]] const std::vector<LeafId>& leaves() const { return leaves_; }

  /// Recompute every node from the recorded primitives. Leaves listed in
  /// `overrides` take the supplied value; all other inputs keep their
  /// recorded values. Identical inputs give bit-identical outputs.
  [[nodiscard]] std::vector<Array> replay(const LeafValues& overrides) const;

  Var push(Op op, std::vector<int> inputs, OpAttr attr = {});

 private:
  std::vector<Node> nodes_;
  std::vector<LeafId> leaves_;
  bool checked_;
};

// Elementwise arithmetic. Either operand may be 1x1 (scalar broadcast).
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double c);
Var operator+(double c, Var a);
Var operator-(Var a, double c);
Var operator-(double c, Var a);
Var operator*(Var a, double c);
Var operator*(double c, Var a);
Var operator/(Var a, double c);

Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);

Var matmul(Var a, Var b);
Var transpose(Var a);

/// Sum of all entries (1x1).
Var sum(Var a);
/// n x m -> n x 1.
Var row_sum(Var a);
/// n x m -> 1 x m.
Var col_sum(Var a);

/// Lower Cholesky factor of the symmetric part of `a`. If the factorization
/// fails, jitter of 1e-6 * mean(diag) is added and escalated by x10 up to
/// 1e-2 * mean(diag) before a NumericError is thrown. `base_jitter` is added
/// unconditionally (absolute).
Var cholesky(Var a, double base_jitter = 0.0);
/// Solves L X = B (or L^T X = B when `transpose`), reading only the lower
/// triangle of L.
Var tri_solve(Var lower, Var b, bool transpose = false);

Var slice(Var a, int row, int col, int rows, int cols);
Var col(Var a, int j);
Var hconcat(std::span<const Var> parts);
Var vconcat(std::span<const Var> parts);
/// n x n -> n x 1.
Var diag_part(Var a);
/// n x 1 -> n x n.
Var diag_matrix(Var v);
/// Pairwise squared Euclidean distances between rows: (n x d, m x d) -> n x m.
Var sq_dist(Var x, Var z);

/// Repeats a 1 x m row n times (n x m), via a product with a ones column.
Var repeat_rows(Var row, Eigen::Index n);
/// Repeats an n x 1 column m times (n x m).
Var repeat_cols(Var column, Eigen::Index m);
/// 2 * sum(log(diag(chol))) for a lower Cholesky factor.
Var logdet_from_cholesky(Var lower);

/// Value of `output` after replaying the tape with `leaves`.
Array eval(const Tape& tape, const LeafValues& leaves, Var output);

/// Reverse-mode gradient of a scalar `output` using the recorded values.
GradientMap gradient(const Tape& tape, Var output, std::span<const Var> wrt);

/// Reverse-mode gradient after replaying the tape on `leaves`.
GradientMap gradient(const Tape& tape, const LeafValues& leaves, Var output,
                     std::span<const Var> wrt);

/// Maximum over all entries of the `wrt` leaves of
/// |AD - central FD| / (|FD| + 1e-8).
double fd_check(const Tape& tape, const LeafValues& leaves, Var output,
                std::span<const Var> wrt, double eps = 1e-5);

}  // namespace gpssm::ad
