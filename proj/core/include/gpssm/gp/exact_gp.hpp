#pragma once

#include <Eigen/Core>

#include "gpssm/gp/gaussian.hpp"
#include "gpssm/gp/kernel.hpp"

namespace gpssm::gp {

/// Exact GP posterior at `x_query` (q x d) given noise-free function values
/// `f_x` (n) at inputs `x` (n x d):
///   mu    = m(x') + k_{x'x} K_xx^{-1} (f_x - m_x)
///   Sigma = k(x', x') - k_{x'x} K_xx^{-1} k_{xx'}
/// `noise_variance` (default 0) is added to the diagonal of K_xx. With n = 0
/// the prior is returned. Throws NumericError when K_xx stays singular after
/// jitter escalation.
Gaussian gp_posterior(const Kernel& kernel, const MeanFunction& mean, const Eigen::MatrixXd& x,
                      const Eigen::VectorXd& f_x, const Eigen::MatrixXd& x_query,
                      double noise_variance = 0.0);

}  // namespace gpssm::gp
