#pragma once

#include <Eigen/Core>
#include <vector>

#include "gpssm/ad/tape.hpp"
#include "gpssm/gp/gaussian.hpp"
#include "gpssm/ssm/model.hpp"

namespace gpssm::ssm {

/// Row-wise diagonal Gaussians: N rows, one distribution per row.
struct DiagGaussian {
  ad::Var mean;
  ad::Var var;
};

/// Inducing draws for one batch of trajectories. Only populated for
/// SampledInducingPerTrajectory.
struct FunctionDraw {
  SamplingStrategy strategy = SamplingStrategy::IndependentPerStep;
  std::vector<ad::Var> u;  // per forward output, M x N
};

/// Draws the per-trajectory inducing values (eps[j] is M x N). Other
/// strategies ignore `eps`.
FunctionDraw draw_functions(const ModelState& state, SamplingStrategy strategy,
                            const std::vector<Eigen::MatrixXd>& eps);

/// p(y | x) for a Gaussian state: C mu, C Sigma C^T + Sigma_y with C = [I 0].
gp::Gaussian observe(const SSMModel& model, const gp::Gaussian& state);
DiagGaussian observe(const ModelState& state, const DiagGaussian& x);

/// p(x_{t+1} | x_t, u_t, f) for N sampled states (N x d_x) and controls
/// (N x d_u, ignored when d_u = 0). Process noise is included.
DiagGaussian forward_prior(const ModelState& state, const FunctionDraw& draw, ad::Var x,
                           ad::Var u);

/// Soft gain K = Sigma^- (Sigma~ + k Sigma^-)^{-1}.
Eigen::MatrixXd soft_gain(const Eigen::MatrixXd& prior_cov, const Eigen::MatrixXd& pseudo_cov,
                          double k);

/// Conditions a prior on a pseudo-observation with the soft gain:
///   mu = mu^- + K (y~ - mu^-),  Sigma = (I - K) Sigma^- (I - K)^T + K Sigma~ K^T.
/// Requires k >= 1. k = 1 is the Kalman update; k -> infinity leaves the
/// prior unchanged.
gp::Gaussian soft_condition(const gp::Gaussian& prior, const Eigen::VectorXd& pseudo_obs,
                            const Eigen::MatrixXd& pseudo_cov, double k);

/// Elementwise version for diagonal covariances. `mask` (1 x d, entries 0/1)
/// switches conditioning off per component; pass an invalid Var for all-on.
DiagGaussian soft_condition(const DiagGaussian& prior, ad::Var pseudo_obs, ad::Var pseudo_var,
                            double k, ad::Var mask = {});

/// Applies an affine recognition map to N x input_dim rows.
DiagGaussian recognize(const RecognitionVars& vars, ad::Var input);

/// Flattens (y_t, u_t) for t < lag into one row; throws DataError when the
/// sequence is shorter than the lag.
Eigen::RowVectorXd recognition_input(const Eigen::MatrixXd& y, const Eigen::MatrixXd& u, int lag);

/// q(x_1 | y_{1:lag}, u_{1:lag}) for one sequence (T x d_y, T x d_u).
gp::Gaussian recognize(const RecognitionModule& module, const Eigen::MatrixXd& y,
                       const Eigen::MatrixXd& u);

/// q(x~_t | x~_{t+1}, u_t, y_t): observed part pinned to y_t with zero
/// variance, hidden part from the backward GP's marginal prediction.
DiagGaussian backward_step(const ModelState& state, ad::Var next, ad::Var u, ad::Var y);

/// Reparameterized sample mean + sqrt(var) * eps; eps is a constant of the
/// same shape.
ad::Var sample(const DiagGaussian& g, const Eigen::MatrixXd& eps);

/// sum over rows and columns of E_{x ~ q}[log N(y; C x, Sigma_y)], q diagonal.
ad::Var expected_log_likelihood(const ModelState& state, const DiagGaussian& x, ad::Var y);

/// sum over rows and columns of KL(q || p) for diagonal Gaussians.
ad::Var diagonal_kl(const DiagGaussian& q, const DiagGaussian& p);

}  // namespace gpssm::ssm
