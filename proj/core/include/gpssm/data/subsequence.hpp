#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "gpssm/data/dataset.hpp"
#include "gpssm/random.hpp"

namespace gpssm::data {

/// A contiguous slice of one trajectory. The first `lag` rows feed the
/// recognition module.
struct Window {
  int trajectory = 0;
  int start = 0;
  Eigen::MatrixXd u;  // length x d_u
  Eigen::MatrixXd y;  // length x d_y

  [[nodiscard]] int length() const { return static_cast<int>(y.rows()); }
};

Window make_window(const std::vector<Trajectory>& trajectories, int trajectory, int start,
                   int length);

/// Draws batches of windows uniformly over every valid (trajectory, start)
/// pair. Deterministic per seed.
class SubsequenceSampler {
 public:
  /// Throws ConfigError when `length` exceeds the shortest trajectory.
  SubsequenceSampler(const std::vector<Trajectory>& trajectories, int length, int batch,
                     std::uint64_t seed);

  std::vector<Window> next();

  [[nodiscard]] int length() const { return length_; }
  [[nodiscard]] int batch() const { return batch_; }
  /// Number of distinct windows available.
  [[nodiscard]] long num_windows() const { return offsets_.back(); }

 private:
  const std::vector<Trajectory>* trajectories_;
  int length_;
  int batch_;
  std::vector<long> offsets_;  // prefix sums of window counts
  Rng rng_;
};

}  // namespace gpssm::data
