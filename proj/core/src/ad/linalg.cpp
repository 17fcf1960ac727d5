#include "gpssm/ad/linalg.hpp"

#include <Eigen/Cholesky>
#include <array>
#include <cmath>
#include <string>

#include "gpssm/error.hpp"

namespace gpssm::ad {

namespace {

bool try_factor(const Eigen::MatrixXd& sym, double jitter, Eigen::MatrixXd& out) {
  Eigen::MatrixXd shifted = sym;
  shifted.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) return false;
  out = llt.matrixL();
  return out.allFinite() && (out.diagonal().array() > 0.0).all();
}

}  // namespace

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a, double start_jitter,
                               double* jitter_used) {
  if (a.rows() != a.cols()) {
    throw ShapeError("cholesky: matrix is " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + ", expected square");
  }
  if (!a.allFinite()) throw NumericError("cholesky: non-finite input");
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::MatrixXd lower;
  if (a.rows() == 0) {
    if (jitter_used) *jitter_used = start_jitter;
    return lower.setZero(0, 0);
  }
  if (try_factor(sym, start_jitter, lower)) {
    if (jitter_used) *jitter_used = start_jitter;
    return lower;
  }
  double scale = sym.diagonal().mean();
  if (!(scale > 0.0)) scale = 1.0;
  constexpr std::array<double, 5> kLadder{1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
  for (double rel : kLadder) {
    const double jitter = rel * scale;
    if (jitter <= start_jitter) continue;
    if (try_factor(sym, jitter, lower)) {
      if (jitter_used) *jitter_used = jitter;
      return lower;
    }
  }
  throw NumericError("cholesky: matrix not positive definite after jitter escalation to " +
                     std::to_string(1e-2 * scale));
}

Eigen::MatrixXd lower_solve(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& b,
                            bool transpose) {
  if (lower.rows() != lower.cols() || lower.rows() != b.rows()) {
    throw ShapeError("tri_solve: factor " + std::to_string(lower.rows()) + "x" +
                     std::to_string(lower.cols()) + " incompatible with rhs " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const auto tri = lower.triangularView<Eigen::Lower>();
  if (transpose) return tri.transpose().solve(b);
  return tri.solve(b);
}

Eigen::MatrixXd cholesky_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("cholesky_solve: A has " + std::to_string(a.rows()) + " rows, B has " +
                     std::to_string(b.rows()));
  }
  const Eigen::MatrixXd lower = cholesky_lower(a, 0.0);
  return lower_solve(lower, lower_solve(lower, b, false), true);
}

}  // namespace gpssm::ad
