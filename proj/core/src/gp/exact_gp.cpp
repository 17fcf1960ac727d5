#include "gpssm/gp/exact_gp.hpp"

#include "gpssm/ad/linalg.hpp"
#include "gpssm/error.hpp"

namespace gpssm::gp {

Gaussian gp_posterior(const Kernel& kernel, const MeanFunction& mean, const Eigen::MatrixXd& x,
                      const Eigen::VectorXd& f_x, const Eigen::MatrixXd& x_query,
                      double noise_variance) {
  if (x.rows() != f_x.size()) throw ShapeError("gp_posterior: x and f_x lengths differ");
  const Eigen::MatrixXd k_qq = kernel_matrix(kernel, x_query, x_query);
  const Eigen::VectorXd m_q = mean.evaluate(x_query);
  if (x.rows() == 0) return Gaussian::full(m_q, k_qq);

  Eigen::MatrixXd k_xx = kernel_matrix(kernel, x, x);
  k_xx.diagonal().array() += noise_variance;
  const Eigen::MatrixXd k_xq = kernel_matrix(kernel, x, x_query);
  const Eigen::MatrixXd lower = ad::cholesky_lower(k_xx, 0.0);
  const Eigen::VectorXd residual = f_x - mean.evaluate(x);
  const Eigen::MatrixXd alpha =
      ad::lower_solve(lower, ad::lower_solve(lower, residual, false), true);
  const Eigen::MatrixXd v = ad::lower_solve(lower, k_xq, false);
  Eigen::VectorXd mu = m_q + k_xq.transpose() * alpha;
  Eigen::MatrixXd cov = k_qq - v.transpose() * v;
  cov = 0.5 * (cov + cov.transpose());
  return Gaussian::full(std::move(mu), std::move(cov));
}

}  // namespace gpssm::gp
