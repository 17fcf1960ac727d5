#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <numbers>

#include "gpssm/data/dataset.hpp"

namespace gpssm::data {

/// Noisy unicycle ("Dubins car"): state (x, y, theta), controls (speed v,
/// curvature kappa), Euler-discretized.
struct DubinsParams {
  double dt = 0.1;
  Eigen::Vector3d process_noise_std = Eigen::Vector3d::Constant(0.01);
  double obs_noise_std = 0.01;
  double v_min = 0.5;
  double v_max = 1.5;
  double kappa_min = -1.0;
  double kappa_max = 1.0;
  /// Ornstein-Uhlenbeck control smoothing: mean reversion rate and
  /// volatility (per unit time) for speed and curvature.
  double control_reversion = 0.5;
  double speed_volatility = 0.3;
  double curvature_volatility = 0.6;
  /// Initial heading is uniform on [heading_min, heading_max].
  double heading_min = -std::numbers::pi;
  double heading_max = std::numbers::pi;
  /// Observe (x, y, theta) instead of (x, y).
  bool observe_heading = false;

  void validate() const;
};

/// Rolls the car from `initial` under fixed controls (T x 2). Returns T
/// states; controls row t drives the step t -> t+1.
Trajectory simulate_dubins_path(const DubinsParams& params, const Eigen::Vector3d& initial,
                                const Eigen::MatrixXd& controls, std::uint64_t seed);

/// n_train + n_test trajectories of length T with OU-smoothed random
/// controls, starting at the origin with a uniformly random heading.
Dataset simulate_dubins(const DubinsParams& params, int T, int n_train, std::uint64_t seed,
                        int n_test = 0);

/// x_{t+1} = A x_t + B u_t + w,  y_t = C x_t + v,  w ~ N(0, Q), v ~ N(0, R).
/// Controls are i.i.d. N(0, control_std^2); x_1 ~ N(x0, P0).
struct LinearSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  Eigen::VectorXd x0;  // defaults to zero when empty
  Eigen::MatrixXd P0;  // defaults to zero when empty
  double control_std = 1.0;

  [[nodiscard]] int d_x() const { return static_cast<int>(A.rows()); }
  [[nodiscard]] int d_u() const { return static_cast<int>(B.cols()); }
  [[nodiscard]] int d_y() const { return static_cast<int>(C.rows()); }
  /// Throws ShapeError on inconsistent dimensions, NumericError when Q, R or
  /// P0 are not PSD.
  void validate() const;
};

Dataset simulate_linear(const LinearSystem& system, int T, int n_train, std::uint64_t seed,
                        int n_test = 0);

struct MssResult {
  double spectral_radius = 0.0;
  bool is_mss = false;
};

/// Spectral radius by power iteration; falls back to a full eigenvalue
/// decomposition when the iteration does not settle (complex or nearly tied
/// dominant eigenvalues). A linear system is mean-square stable iff the
/// radius is below one.
MssResult mss_check(const Eigen::MatrixXd& A);

}  // namespace gpssm::data
