#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace gpssm::data {

/// One input/output sequence. Rows are time steps.
struct Trajectory {
  Eigen::MatrixXd u;  // T x d_u (d_u may be 0)
  Eigen::MatrixXd y;  // T x d_y
  Eigen::MatrixXd x;  // T x d_x ground-truth latent; empty unless simulated
  std::string source;

  [[nodiscard]] int length() const { return static_cast<int>(y.rows()); }
  [[nodiscard]] int d_u() const { return static_cast<int>(u.cols()); }
  [[nodiscard]] int d_y() const { return static_cast<int>(y.cols()); }
  [[nodiscard]] bool has_latent() const { return x.size() > 0; }
  /// Throws DataError unless T >= 2, lengths agree and every value is finite.
  void validate() const;
};

/// Per-channel z-score statistics of a training split.
struct NormalizationStats {
  Eigen::RowVectorXd u_mean;
  Eigen::RowVectorXd u_std;
  Eigen::RowVectorXd y_mean;
  Eigen::RowVectorXd y_std;
};

inline constexpr double kStdFloor = 1e-8;

/// Mean and population std over every row of every trajectory; std is
/// floored at kStdFloor.
NormalizationStats compute_stats(const std::vector<Trajectory>& train);

struct DatasetMeta {
  std::string name;
  int d_u = 0;
  int d_y = 1;
  int lag = 5;
};

struct Dataset {
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
  NormalizationStats stats;
  DatasetMeta meta;
  bool normalized = false;

  /// Validates every trajectory and dimension agreement with `meta`.
  void validate() const;
  /// Total number of training time steps.
  [[nodiscard]] long train_steps() const;
};

/// Builds a dataset: computes stats from `train` only.
Dataset make_dataset(std::vector<Trajectory> train, std::vector<Trajectory> test,
                     DatasetMeta meta);

Trajectory normalize(const Trajectory& traj, const NormalizationStats& stats);
Trajectory denormalize(const Trajectory& traj, const NormalizationStats& stats);
/// z-scores u and y of both splits with the stored train stats. Latent
/// states are left untouched.
Dataset normalize(const Dataset& dataset);

/// Maps normalized output predictions back to raw units: means are shifted
/// and scaled by std, variances by std^2. Rows are time steps.
Eigen::MatrixXd denormalize_mean(const Eigen::MatrixXd& mean, const NormalizationStats& stats);
Eigen::MatrixXd denormalize_variance(const Eigen::MatrixXd& var, const NormalizationStats& stats);

}  // namespace gpssm::data
