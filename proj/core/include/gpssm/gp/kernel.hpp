#pragma once

#include <Eigen/Core>

#include "gpssm/ad/binder.hpp"
#include "gpssm/ad/tape.hpp"

namespace gpssm::gp {

/// Squared-exponential kernel with automatic relevance determination:
/// k(x, x') = s^2 exp(-0.5 sum_i (x_i - x'_i)^2 / l_i^2).
/// Stored in log space so optimization is unconstrained.
struct Kernel {
  double log_variance = 0.0;
  Eigen::RowVectorXd log_lengthscales;

  static Kernel se_ard(double variance, const Eigen::RowVectorXd& lengthscales);
  static Kernel se_ard(double variance, double lengthscale, int input_dim);

  [[nodiscard]] double variance() const;
  [[nodiscard]] Eigen::RowVectorXd lengthscales() const;
  [[nodiscard]] int input_dim() const { return static_cast<int>(log_lengthscales.size()); }
};

/// Kernel hyperparameters placed on a tape.
struct KernelVars {
  ad::Var log_variance;
  ad::Var log_lengthscales;  // 1 x d
};

KernelVars bind(ad::Binder& binder, const Kernel& kernel, const std::string& prefix);

/// Gram matrix K(X, X2) on a tape; X is n x d, X2 is m x d.
ad::Var kernel_matrix(const KernelVars& kernel, ad::Var x, ad::Var x2);
/// Diagonal of K(X, X) as an n x 1 column (constant signal variance).
ad::Var kernel_diag(const KernelVars& kernel, Eigen::Index n);

/// Numeric Gram matrix; throws ShapeError when column counts disagree with
/// the lengthscale count.
Eigen::MatrixXd kernel_matrix(const Kernel& kernel, const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& x2);

/// Scalar evaluation k(a, b) for two row vectors.
double kernel_value(const Kernel& kernel, const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b);

/// Prior mean function of a GP.
struct MeanFunction {
  enum class Kind { Zero, Constant, Identity, Linear };
  Kind kind = Kind::Zero;
  double constant = 0.0;
  /// For Identity: the input column returned as the mean.
  int input_index = 0;
  /// For Linear: m(x) = x . weights (fixed, not learned).
  Eigen::VectorXd weights;

  static MeanFunction zero() { return {}; }
  static MeanFunction constant_value(double c) { return {Kind::Constant, c, 0, {}}; }
  static MeanFunction identity(int index) { return {Kind::Identity, 0.0, index, {}}; }
  static MeanFunction linear(Eigen::VectorXd w) { return {Kind::Linear, 0.0, 0, std::move(w)}; }

  /// Mean at every row of `x` (n x 1).
  [[nodiscard]] Eigen::VectorXd evaluate(const Eigen::MatrixXd& x) const;
};

/// Mean at every row of `x` on a tape (n x 1).
ad::Var mean_values(const MeanFunction& mean, ad::Var x);

}  // namespace gpssm::gp
