#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace gpssm {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream); distinct streams never share
/// state, so adding draws to one purpose leaves the others unchanged.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

inline Eigen::MatrixXd standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  // Fill in row-major order so a prefix of rows is stable when rows grow.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = normal(rng);
  }
  return out;
}

}  // namespace gpssm
