#include "gpssm/inference/kalman.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <string>

#include "gpssm/error.hpp"

namespace gpssm::inference {

namespace {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

Eigen::MatrixXd spd_inverse_times(const Eigen::MatrixXd& s, const Eigen::MatrixXd& rhs,
                                  const char* what) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  const double scale = s.diagonal().cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * std::max(scale, 1e-300)) {
    throw NumericError(std::string("kalman: singular ") + what);
  }
  return ldlt.solve(rhs);
}

}  // namespace

gp::Gaussian kalman_predict(const gp::Gaussian& prior, const Eigen::MatrixXd& A,
                            const Eigen::MatrixXd& B, const Eigen::VectorXd& u,
                            const Eigen::MatrixXd& Q) {
  if (A.rows() != prior.dim() || A.cols() != prior.dim() || Q.rows() != prior.dim() ||
      Q.cols() != prior.dim()) {
    throw ShapeError("kalman_predict: A and Q must be d_x x d_x");
  }
  Eigen::VectorXd mean = A * prior.mean();
  if (B.cols() > 0) {
    if (B.rows() != prior.dim() || u.size() != B.cols()) throw ShapeError("kalman_predict: B, u");
    mean += B * u;
  }
  return gp::Gaussian::full(std::move(mean),
                            symmetrize(A * prior.covariance() * A.transpose() + Q));
}

gp::Gaussian kalman_update(const gp::Gaussian& prior, const Eigen::VectorXd& y,
                           const Eigen::MatrixXd& C, const Eigen::MatrixXd& R) {
  if (C.cols() != prior.dim() || C.rows() != y.size() || R.rows() != y.size() ||
      R.cols() != y.size()) {
    throw ShapeError("kalman_update: C, R and y disagree");
  }
  const Eigen::MatrixXd P = prior.covariance();
  const Eigen::MatrixXd S = symmetrize(C * P * C.transpose() + R);
  // K = P C^T S^-1, computed as (S^-1 C P)^T.
  const Eigen::MatrixXd K = spd_inverse_times(S, C * P, "innovation covariance").transpose();
  const Eigen::MatrixXd I_KC = Eigen::MatrixXd::Identity(prior.dim(), prior.dim()) - K * C;
  Eigen::VectorXd mean = prior.mean() + K * (y - C * prior.mean());
  return gp::Gaussian::full(std::move(mean),
                            symmetrize(I_KC * P * I_KC.transpose() + K * R * K.transpose()));
}

KalmanResult kalman_filter_smoother(const data::LinearSystem& system, const Eigen::MatrixXd& y,
                                    const Eigen::MatrixXd& u) {
  system.validate();
  const int T = static_cast<int>(y.rows());
  const int d = system.d_x();
  if (T < 1 || y.cols() != system.d_y()) throw ShapeError("kalman: y must be T x d_y");
  if (system.d_u() > 0 && (u.rows() < T - 1 || u.cols() != system.d_u())) {
    throw ShapeError("kalman: u must be T x d_u");
  }
  const Eigen::VectorXd x0 = system.x0.size() ? system.x0 : Eigen::VectorXd::Zero(d);
  const Eigen::MatrixXd P0 = system.P0.size() ? system.P0 : Eigen::MatrixXd::Zero(d, d);

  KalmanResult r;
  r.predicted.push_back(gp::Gaussian::full(x0, P0));
  for (int t = 0; t < T; ++t) {
    if (t > 0) {
      const Eigen::VectorXd u_prev =
          system.d_u() > 0 ? Eigen::VectorXd(u.row(t - 1).transpose()) : Eigen::VectorXd();
      r.predicted.push_back(kalman_predict(r.filtered.back(), system.A, system.B, u_prev, system.Q));
    }
    const gp::Gaussian& pred = r.predicted.back();
    r.filtered.push_back(kalman_update(pred, y.row(t).transpose(), system.C, system.R));
    if (t == T - 1) {
      const Eigen::MatrixXd P = pred.covariance();
      const Eigen::MatrixXd S = system.C * P * system.C.transpose() + system.R;
      r.last_gain = spd_inverse_times(S, system.C * P, "innovation covariance").transpose();
    }
  }

  r.smoothed.resize(static_cast<std::size_t>(T));
  r.smoothed[T - 1] = r.filtered[T - 1];
  for (int t = T - 2; t >= 0; --t) {
    const Eigen::MatrixXd Pf = r.filtered[t].covariance();
    const Eigen::MatrixXd Pp = r.predicted[t + 1].covariance();
    // G = Pf A^T Pp^-1; Pp may be singular when Q = 0, so use a pseudo-inverse.
    const Eigen::MatrixXd G =
        Pf * system.A.transpose() *
        Pp.completeOrthogonalDecomposition().pseudoInverse();
    Eigen::VectorXd mean =
        r.filtered[t].mean() + G * (r.smoothed[t + 1].mean() - r.predicted[t + 1].mean());
    Eigen::MatrixXd cov =
        symmetrize(Pf + G * (r.smoothed[t + 1].covariance() - Pp) * G.transpose());
    r.smoothed[t] = gp::Gaussian::full(std::move(mean), std::move(cov));
  }
  return r;
}

}  // namespace gpssm::inference
