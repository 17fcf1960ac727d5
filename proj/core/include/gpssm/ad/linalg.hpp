#pragma once

#include <Eigen/Core>

namespace gpssm::ad {

/// Lower Cholesky factor of the symmetric part of `a`.
///
/// The factorization is first attempted with `start_jitter` on the diagonal.
/// On failure the jitter is raised to 1e-6 * mean(diag) and escalated by x10
/// up to 1e-2 * mean(diag); a NumericError is thrown if all attempts fail.
/// `jitter_used` receives the absolute jitter of the successful attempt.
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a, double start_jitter,
                               double* jitter_used = nullptr);

/// A^{-1} B through a Cholesky factorization of A; never forms the inverse.
Eigen::MatrixXd cholesky_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Solve L X = B (L lower) or L^T X = B in place of an explicit inverse.
Eigen::MatrixXd lower_solve(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& b,
                            bool transpose);

}  // namespace gpssm::ad
