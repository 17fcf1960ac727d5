#pragma once

#include <Eigen/Core>
#include <vector>

#include "gpssm/data/simulate.hpp"
#include "gpssm/gp/gaussian.hpp"

namespace gpssm::inference {

/// N(A m + B u, A P A^T + Q). `u` may be empty when B has no columns.
gp::Gaussian kalman_predict(const gp::Gaussian& prior, const Eigen::MatrixXd& A,
                            const Eigen::MatrixXd& B, const Eigen::VectorXd& u,
                            const Eigen::MatrixXd& Q);

/// Measurement update with the Joseph-form covariance
/// (I - K C) P (I - K C)^T + K R K^T. Throws NumericError when the innovation
/// covariance C P C^T + R is singular.
gp::Gaussian kalman_update(const gp::Gaussian& prior, const Eigen::VectorXd& y,
                           const Eigen::MatrixXd& C, const Eigen::MatrixXd& R);

/// Per-step marginals for t = 1..T. `predicted[0]` is N(x0, P0).
struct KalmanResult {
  std::vector<gp::Gaussian> predicted;
  std::vector<gp::Gaussian> filtered;
  std::vector<gp::Gaussian> smoothed;
  /// Gain of the last update.
  Eigen::MatrixXd last_gain;
};

/// Kalman filter followed by the Rauch-Tung-Striebel smoother. `y` is T x d_y,
/// `u` is T x d_u (u_t drives x_{t+1}).
KalmanResult kalman_filter_smoother(const data::LinearSystem& system, const Eigen::MatrixXd& y,
                                    const Eigen::MatrixXd& u);

}  // namespace gpssm::inference
