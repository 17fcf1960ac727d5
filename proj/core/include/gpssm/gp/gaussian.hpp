#pragma once

#include <Eigen/Core>

#include "gpssm/ad/tape.hpp"

namespace gpssm::gp {

/// Multivariate normal with either a full (d x d) or diagonal (d) covariance.
class Gaussian {
 public:
  Gaussian() = default;

  static Gaussian full(Eigen::VectorXd mean, Eigen::MatrixXd covariance);
  static Gaussian diagonal(Eigen::VectorXd mean, Eigen::VectorXd variance);

  [[nodiscard]] Eigen::Index dim() const { return mean_.size(); }
  [[nodiscard]] bool is_diagonal() const { return diagonal_; }
  [[nodiscard]] const Eigen::VectorXd& mean() const { return mean_; }
  /// Dense covariance (diagonal variant expanded).
  [[nodiscard]] Eigen::MatrixXd covariance() const;
  /// Marginal variances.
  [[nodiscard]] Eigen::VectorXd variance() const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;  // d x d, or d x 1 when diagonal
  bool diagonal_ = true;
};

/// Closed-form KL(q || p). Throws ShapeError on dimension mismatch.
double gaussian_kl(const Gaussian& q, const Gaussian& p);

/// KL(N(mq, Lq Lq^T) || N(mp, Lp Lp^T)) from lower Cholesky factors (d x 1
/// means, d x d factors).
ad::Var gaussian_kl(ad::Var mean_q, ad::Var chol_q, ad::Var mean_p, ad::Var chol_p);

/// Elementwise KL between diagonal Gaussians, summed over every entry.
/// All operands have the same shape (or are 1x1).
ad::Var diagonal_gaussian_kl(ad::Var mean_q, ad::Var var_q, ad::Var mean_p, ad::Var var_p);

/// Gaussian log-density log N(x; mean, var), elementwise, summed.
ad::Var diagonal_log_density(ad::Var x, ad::Var mean, ad::Var var);

}  // namespace gpssm::gp
