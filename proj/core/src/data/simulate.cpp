#include "gpssm/data/simulate.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gpssm/error.hpp"
#include "gpssm/random.hpp"

namespace gpssm::data {

namespace {

// Symmetric square root of a PSD matrix; small negative eigenvalues from
// round-off are clipped.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* name) {
  if (m.size() == 0) return m;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const double tol = 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -tol) {
    throw NumericError(std::string("linear system: ") + name + " is not positive semi-definite");
  }
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

}  // namespace

void DubinsParams::validate() const {
  if (!(dt > 0.0)) throw ConfigError("dubins: dt must be positive");
  if ((process_noise_std.array() < 0.0).any() || obs_noise_std < 0.0) {
    throw ConfigError("dubins: noise std must be non-negative");
  }
  if (!(v_min <= v_max) || !(kappa_min <= kappa_max)) {
    throw ConfigError("dubins: control ranges must satisfy min <= max");
  }
  if (control_reversion < 0.0 || speed_volatility < 0.0 || curvature_volatility < 0.0) {
    throw ConfigError("dubins: control smoothing parameters must be non-negative");
  }
  if (!(heading_min <= heading_max)) throw ConfigError("dubins: need heading_min <= heading_max");
}

Trajectory simulate_dubins_path(const DubinsParams& p, const Eigen::Vector3d& initial,
                                const Eigen::MatrixXd& controls, std::uint64_t seed) {
  p.validate();
  const auto T = controls.rows();
  if (controls.cols() != 2 || T < 2) throw ShapeError("dubins: controls must be T x 2, T >= 2");
  Rng process = make_rng(seed, 1);
  Rng observation = make_rng(seed, 2);
  Trajectory traj;
  traj.u = controls;
  traj.x.resize(T, 3);
  traj.x.row(0) = initial.transpose();
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    const double theta = traj.x(t, 2);
    const double v = controls(t, 0);
    const double kappa = controls(t, 1);
    const Eigen::RowVector3d noise =
        (standard_normal(process, 1, 3).array() * p.process_noise_std.transpose().array())
            .matrix();
    traj.x(t + 1, 0) = traj.x(t, 0) + p.dt * v * std::cos(theta) + noise(0);
    traj.x(t + 1, 1) = traj.x(t, 1) + p.dt * v * std::sin(theta) + noise(1);
    traj.x(t + 1, 2) = theta + p.dt * v * kappa + noise(2);
  }
  const int d_y = p.observe_heading ? 3 : 2;
  traj.y = traj.x.leftCols(d_y) + p.obs_noise_std * standard_normal(observation, T, d_y);
  traj.source = "dubins";
  return traj;
}

Dataset simulate_dubins(const DubinsParams& p, int T, int n_train, std::uint64_t seed,
                        int n_test) {
  p.validate();
  if (T < 2 || n_train < 1 || n_test < 0) throw ConfigError("dubins: need T >= 2, n_train >= 1");
  Rng controls_rng = make_rng(seed, 3);
  std::uniform_real_distribution<double> heading(p.heading_min, p.heading_max);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double v_mid = 0.5 * (p.v_min + p.v_max);
  const double k_mid = 0.5 * (p.kappa_min + p.kappa_max);
  const double sq = std::sqrt(p.dt);
  std::vector<Trajectory> all;
  for (int n = 0; n < n_train + n_test; ++n) {
    Eigen::MatrixXd c(T, 2);
    c(0, 0) = v_mid;
    c(0, 1) = k_mid;
    for (int t = 0; t + 1 < T; ++t) {
      const double v = c(t, 0) + p.control_reversion * (v_mid - c(t, 0)) * p.dt +
                       p.speed_volatility * sq * normal(controls_rng);
      const double k = c(t, 1) + p.control_reversion * (k_mid - c(t, 1)) * p.dt +
                       p.curvature_volatility * sq * normal(controls_rng);
      c(t + 1, 0) = clamp(v, p.v_min, p.v_max);
      c(t + 1, 1) = clamp(k, p.kappa_min, p.kappa_max);
    }
    const Eigen::Vector3d initial(0.0, 0.0, heading(controls_rng));
    Trajectory traj = simulate_dubins_path(p, initial, c, seed * 1000003ULL + n + 17);
    traj.source = "dubins#" + std::to_string(n);
    all.push_back(std::move(traj));
  }
  std::vector<Trajectory> test(std::make_move_iterator(all.begin() + n_train),
                               std::make_move_iterator(all.end()));
  all.resize(n_train);
  const int d_y = p.observe_heading ? 3 : 2;
  return make_dataset(std::move(all), std::move(test), DatasetMeta{"dubins", 2, d_y, 5});
}

void LinearSystem::validate() const {
  const auto n = A.rows();
  if (A.cols() != n || n < 1) throw ShapeError("linear system: A must be square");
  if (B.rows() != n) throw ShapeError("linear system: B must have d_x rows");
  if (C.cols() != n || C.rows() < 1) throw ShapeError("linear system: C must be d_y x d_x");
  if (Q.rows() != n || Q.cols() != n) throw ShapeError("linear system: Q must be d_x x d_x");
  if (R.rows() != C.rows() || R.cols() != C.rows()) {
    throw ShapeError("linear system: R must be d_y x d_y");
  }
  if (x0.size() != 0 && x0.size() != n) throw ShapeError("linear system: x0 size");
  if (P0.size() != 0 && (P0.rows() != n || P0.cols() != n)) {
    throw ShapeError("linear system: P0 must be d_x x d_x");
  }
  psd_sqrt(Q, "Q");
  psd_sqrt(R, "R");
  if (P0.size() != 0) psd_sqrt(P0, "P0");
}

Dataset simulate_linear(const LinearSystem& s, int T, int n_train, std::uint64_t seed, int n_test) {
  s.validate();
  if (T < 2 || n_train < 1 || n_test < 0) throw ConfigError("linear system: need T >= 2");
  const Eigen::MatrixXd q_root = psd_sqrt(s.Q, "Q");
  const Eigen::MatrixXd r_root = psd_sqrt(s.R, "R");
  const Eigen::MatrixXd p_root =
      s.P0.size() ? psd_sqrt(s.P0, "P0") : Eigen::MatrixXd::Zero(s.d_x(), s.d_x());
  const Eigen::VectorXd x0 = s.x0.size() ? s.x0 : Eigen::VectorXd::Zero(s.d_x());
  Rng rng = make_rng(seed, 4);
  std::vector<Trajectory> all;
  for (int n = 0; n < n_train + n_test; ++n) {
    Trajectory traj;
    traj.u = s.control_std * standard_normal(rng, T, s.d_u());
    traj.x.resize(T, s.d_x());
    traj.y.resize(T, s.d_y());
    Eigen::VectorXd x = x0 + p_root * standard_normal(rng, s.d_x(), 1);
    for (int t = 0; t < T; ++t) {
      traj.x.row(t) = x.transpose();
      traj.y.row(t) = (s.C * x + r_root * standard_normal(rng, s.d_y(), 1)).transpose();
      x = s.A * x + s.B * traj.u.row(t).transpose() + q_root * standard_normal(rng, s.d_x(), 1);
    }
    traj.source = "linear#" + std::to_string(n);
    all.push_back(std::move(traj));
  }
  std::vector<Trajectory> test(std::make_move_iterator(all.begin() + n_train),
                               std::make_move_iterator(all.end()));
  all.resize(n_train);
  return make_dataset(std::move(all), std::move(test), DatasetMeta{"linear", s.d_u(), s.d_y(), 1});
}

MssResult mss_check(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw ShapeError("mss_check: matrix must be square");
  if (!A.allFinite()) throw NumericError("mss_check: non-finite matrix");
  const auto n = A.rows();
  MssResult result;
  if (n == 0) return result;
  const double scale = A.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    result.is_mss = true;
    return result;
  }
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
  v.normalize();
  bool settled = false;
  double radius = 0.0;
  for (int it = 0; it < 5000 && !settled; ++it) {
    Eigen::VectorXd w = A * v;
    const double norm = w.norm();
    if (norm == 0.0) break;  // v fell into the null space; let the fallback decide
    v = w / norm;
    if (it % 10 != 9) continue;
    const double rayleigh = v.dot(A * v);
    const double residual = (A * v - rayleigh * v).norm();
    if (residual <= 1e-12 * scale) {
      radius = std::abs(rayleigh);
      settled = true;
    }
  }
  if (!settled) {
    const Eigen::EigenSolver<Eigen::MatrixXd> eig(A, false);
    radius = eig.eigenvalues().cwiseAbs().maxCoeff();
  }
  result.spectral_radius = radius;
  result.is_mss = radius < 1.0;
  return result;
}

}  // namespace gpssm::data
