#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "gpssm/ad/binder.hpp"
#include "gpssm/ad/tape.hpp"
#include "gpssm/gp/gaussian.hpp"
#include "gpssm/gp/kernel.hpp"

namespace gpssm::gp {

/// Independent sparse GPs, one per output dimension, sharing M inducing
/// inputs. Each output j carries its own kernel and a Gaussian q(u_j) over the
/// function values at the inducing inputs, stored relative to the prior mean
/// m_j(z) so moving z or changing the mean leaves the learned residual intact.
/// The q(u_j) covariance is stored as
/// a raw lower-triangular matrix whose diagonal holds log-values, so the
/// Cholesky factor is valid for any parameter value.
struct SparseGP {
  std::vector<Kernel> kernels;
  MeanFunction::Kind mean_kind = MeanFunction::Kind::Zero;
  double mean_constant = 0.0;
  /// Identity mean maps output j to input column j + identity_offset.
  int identity_offset = 0;
  /// Linear mean coefficients, d_in x d_out; used only by Kind::Linear.
  Eigen::MatrixXd mean_weights;
  Eigen::MatrixXd inducing_inputs;          // M x d_in
  Eigen::MatrixXd q_mean;                   // M x d_out, mean of u_j - m_j(z)
  std::vector<Eigen::MatrixXd> q_chol_raw;  // d_out entries, M x M
  /// Diagonal jitter added to K_zz, relative to the signal variance.
  double jitter = 1e-6;

  /// Inducing distribution initialized to N(0, q_scale^2 I).
  static SparseGP create(Eigen::MatrixXd inducing_inputs, std::vector<Kernel> kernels,
                         MeanFunction::Kind mean_kind = MeanFunction::Kind::Zero,
                         double q_scale = 1e-2);

  [[nodiscard]] int input_dim() const { return static_cast<int>(inducing_inputs.cols()); }
  [[nodiscard]] int output_dim() const { return static_cast<int>(kernels.size()); }
  [[nodiscard]] int num_inducing() const { return static_cast<int>(inducing_inputs.rows()); }

  /// Mean function used for output j.
  [[nodiscard]] MeanFunction mean_for(int output) const;
  [[nodiscard]] Eigen::MatrixXd q_cholesky(int output) const;
  [[nodiscard]] Eigen::MatrixXd q_covariance(int output) const;
  void set_q_cholesky(int output, const Eigen::MatrixXd& lower);
  /// Sets q(u_j) from an absolute mean of u_j and an SPD covariance.
  void set_q(int output, const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance);
  /// Sets q(u) = p(u) for every output.
  void set_q_to_prior();
  /// K_zz for output j including the jitter used by predictions.
  [[nodiscard]] Eigen::MatrixXd prior_covariance(int output) const;

  /// Throws on inconsistent sizes, M < 1 or duplicate inducing inputs.
  void validate() const;
};

struct SparseGPVars {
  std::vector<KernelVars> kernels;
  ad::Var inducing_inputs;
  ad::Var q_mean;
  std::vector<ad::Var> q_chol_raw;
};

SparseGPVars bind(ad::Binder& binder, const SparseGP& gp, const std::string& prefix);

/// Factorizations shared by every prediction made within one rollout.
struct SparseGPState {
  const SparseGP* gp = nullptr;
  SparseGPVars vars;
  std::vector<ad::Var> kzz_chol;      // chol(K_zz + jitter)
  std::vector<ad::Var> q_chol;        // chol(Sigma_qu)
  std::vector<ad::Var> q_mean;        // M x 1 per output, absolute
  std::vector<ad::Var> q_residual;    // q_mean - m(z)
  std::vector<ad::Var> prior_mean_z;  // m(z) per output
};

SparseGPState prepare(const SparseGP& gp, const SparseGPVars& vars);

/// Per-row predictive marginals, N x d_out each.
struct Marginals {
  ad::Var mean;
  ad::Var var;
};

/// f(x') with q(u) integrated out:
///   mean = m(x') + A (mu_qu - m_z),  var = k(x',x') - A (K_zz - Sigma_qu) A^T,
///   A = k_{x'z} K_zz^{-1}.
Marginals predict_marginal(const SparseGPState& state, ad::Var x);

/// f(x') | u = mu_qu: same mean as `predict_marginal`, variance
/// k(x',x') - A K_zz A^T.
Marginals predict_at_mean(const SparseGPState& state, ad::Var x);

/// f(x') | u, with one inducing sample per row of `x`: `u[j]` is M x N.
Marginals predict_conditional(const SparseGPState& state, ad::Var x,
                              const std::vector<ad::Var>& u);

/// Reparameterized inducing samples u_j = mu_j + L_j eps_j; eps_j is M x N.
std::vector<ad::Var> sample_inducing(const SparseGPState& state,
                                     const std::vector<Eigen::MatrixXd>& eps);

/// sum_j KL(q(u_j) || p(u_j)).
ad::Var inducing_kl(const SparseGPState& state);

/// Predictive distribution of each output at `x_query` with q(u) integrated
/// out. Covariance across query points is full when `full_covariance`,
/// diagonal otherwise.
std::vector<Gaussian> sparse_predict(const SparseGP& gp, const Eigen::MatrixXd& x_query,
                                     bool full_covariance = false);

double inducing_kl(const SparseGP& gp);

}  // namespace gpssm::gp
