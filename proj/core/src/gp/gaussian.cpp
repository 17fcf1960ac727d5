#include "gpssm/gp/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "gpssm/error.hpp"

namespace gpssm::gp {

Gaussian Gaussian::full(Eigen::VectorXd mean, Eigen::MatrixXd covariance) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw ShapeError("Gaussian::full: covariance shape does not match mean");
  }
  Gaussian g;
  g.mean_ = std::move(mean);
  g.cov_ = std::move(covariance);
  g.diagonal_ = false;
  return g;
}

Gaussian Gaussian::diagonal(Eigen::VectorXd mean, Eigen::VectorXd variance) {
  if (variance.size() != mean.size()) {
    throw ShapeError("Gaussian::diagonal: variance length does not match mean");
  }
  if ((variance.array() < 0.0).any()) throw NumericError("Gaussian::diagonal: negative variance");
  Gaussian g;
  g.mean_ = std::move(mean);
  g.cov_ = std::move(variance);
  g.diagonal_ = true;
  return g;
}

Eigen::MatrixXd Gaussian::covariance() const {
  if (diagonal_) return cov_.col(0).asDiagonal();
  return cov_;
}

Eigen::VectorXd Gaussian::variance() const {
  if (diagonal_) return cov_.col(0);
  return cov_.diagonal();
}

double gaussian_kl(const Gaussian& q, const Gaussian& p) {
  if (q.dim() != p.dim()) {
    throw ShapeError("gaussian_kl: dimensions " + std::to_string(q.dim()) + " and " +
                     std::to_string(p.dim()) + " differ");
  }
  ad::Tape tape;
  if (q.is_diagonal() && p.is_diagonal()) {
    return diagonal_gaussian_kl(tape.constant(q.mean()), tape.constant(q.variance()),
                                tape.constant(p.mean()), tape.constant(p.variance()))
        .scalar();
  }
  const ad::Var lq = ad::cholesky(tape.constant(q.covariance()));
  const ad::Var lp = ad::cholesky(tape.constant(p.covariance()));
  return gaussian_kl(tape.constant(q.mean()), lq, tape.constant(p.mean()), lp).scalar();
}

ad::Var gaussian_kl(ad::Var mean_q, ad::Var chol_q, ad::Var mean_p, ad::Var chol_p) {
  const auto d = static_cast<double>(mean_q.rows());
  const ad::Var a = ad::tri_solve(chol_p, chol_q);
  const ad::Var b = ad::tri_solve(chol_p, mean_p - mean_q);
  const ad::Var trace = ad::sum(ad::square(a));
  const ad::Var mahal = ad::sum(ad::square(b));
  const ad::Var logdet_ratio =
      ad::logdet_from_cholesky(chol_p) - ad::logdet_from_cholesky(chol_q);
  return 0.5 * (trace + mahal + logdet_ratio - d);
}

ad::Var diagonal_gaussian_kl(ad::Var mean_q, ad::Var var_q, ad::Var mean_p, ad::Var var_p) {
  const ad::Var ratio = var_q / var_p;
  const ad::Var terms = ratio + ad::square(mean_q - mean_p) / var_p - 1.0 - ad::log(ratio);
  return 0.5 * ad::sum(terms);
}

ad::Var diagonal_log_density(ad::Var x, ad::Var mean, ad::Var var) {
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  const ad::Var terms = ad::square(x - mean) / var + ad::log(var) + log_2pi;
  return -0.5 * ad::sum(terms);
}

}  // namespace gpssm::gp
