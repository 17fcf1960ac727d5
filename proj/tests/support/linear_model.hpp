#pragma once

#include <Eigen/Core>
#include <cmath>

#include "gpssm/ssm/model.hpp"

namespace gpssm::testing {

/// GP-SSM whose forward GP is pinned to x' = A x + B u: a Linear prior mean,
/// a vanishing kernel variance and q(u) = p(u), so the predictive variance is
/// essentially zero and only the process noise remains.
inline ssm::SSMModel linear_gp_model(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int d_y,
                                     double process_var, double pseudo_var, double obs_var,
                                     int lag = 1, int num_inducing = 3) {
  const int d_x = static_cast<int>(A.rows());
  const int d_u = static_cast<int>(B.cols());
  ssm::ModelOptions o;
  o.d_x = d_x;
  o.d_y = d_y;
  o.d_u = d_u;
  o.lag = lag;
  o.num_inducing = num_inducing;
  o.kernel_variance = 1e-20;
  o.process_noise = process_var;
  o.pseudo_noise = pseudo_var;
  o.obs_noise = obs_var;
  o.forward_mean = gp::MeanFunction::Kind::Zero;
  Eigen::MatrixXd z(num_inducing, d_x + d_u);
  for (int m = 0; m < num_inducing; ++m) {
    for (int j = 0; j < d_x + d_u; ++j) z(m, j) = std::sin(1.3 * m + 0.7 * j) * (m + 1);
  }
  ssm::SSMModel model = ssm::make_model(o, z, z);
  model.forward.mean_kind = gp::MeanFunction::Kind::Linear;
  model.forward.mean_weights.resize(d_x + d_u, d_x);
  model.forward.mean_weights.topRows(d_x) = A.transpose();
  if (d_u > 0) model.forward.mean_weights.bottomRows(d_u) = B.transpose();
  model.forward.set_q_to_prior();
  model.validate();
  return model;
}

}  // namespace gpssm::testing
