#pragma once

#include <Eigen/Core>
#include <random>

namespace gpssm::testing {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                                     double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

/// Random SPD matrix with eigenvalues bounded below by `floor`.
inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n, double floor = 0.5) {
  const Eigen::MatrixXd a = random_matrix(rng, n, n);
  Eigen::MatrixXd spd = a * a.transpose();
  spd.diagonal().array() += floor;
  return spd;
}

}  // namespace gpssm::testing
