#pragma once

#include <Eigen/Core>
#include <string>

#include "gpssm/ad/binder.hpp"
#include "gpssm/ad/tape.hpp"
#include "gpssm/gp/sparse_gp.hpp"

namespace gpssm::ssm {

/// How transition functions are drawn along a trajectory.
enum class SamplingStrategy {
  /// q(u) marginalized independently at every step.
  IndependentPerStep,
  /// One u ~ q(u) per trajectory, shared by all steps.
  SampledInducingPerTrajectory,
  /// u fixed to the mean of q(u).
  MeanInducing,
};

std::string to_string(SamplingStrategy s);
SamplingStrategy sampling_strategy_from_string(const std::string& s);

/// Affine map from a flattened history window to a diagonal Gaussian:
/// [mean, log-variance] = input * weight + bias.
struct RecognitionModule {
  int lag = 1;
  Eigen::MatrixXd weight;     // input_dim x 2 * output_dim
  Eigen::RowVectorXd bias;    // 1 x 2 * output_dim

  static RecognitionModule zeros(int lag, int input_dim, int output_dim);

  [[nodiscard]] int input_dim() const { return static_cast<int>(weight.rows()); }
  [[nodiscard]] int output_dim() const { return static_cast<int>(weight.cols() / 2); }
};

/// Learnable parameters of the forward GP-SSM and its backward auxiliary
/// model. The observation matrix is the fixed selector [I 0]: the first d_y
/// state components are measured.
struct SSMModel {
  int d_x = 1;
  int d_y = 1;
  int d_u = 0;
  gp::SparseGP forward;   // (x, u) -> x_next, d_x outputs
  gp::SparseGP backward;  // (x~_{t+1}, u_t) -> hidden part of x~_t, d_x - d_y outputs
  Eigen::RowVectorXd log_process_noise;  // Sigma_x, 1 x d_x
  Eigen::RowVectorXd log_obs_noise;      // Sigma_y, 1 x d_y
  Eigen::RowVectorXd log_pseudo_noise;   // Sigma~_x, 1 x d_x
  Eigen::RowVectorXd prior_x1_mean;      // p(x_1)
  Eigen::RowVectorXd prior_x1_var;
  RecognitionModule recognition;           // (y, u)_{1:lag} -> x_1
  RecognitionModule backward_recognition;  // y_T -> hidden part of x~_T
  double k_soft = 50.0;
  double beta = 1.0;

  [[nodiscard]] int hidden_dim() const { return d_x - d_y; }
  [[nodiscard]] int lag() const { return recognition.lag; }
  /// Throws ConfigError / ShapeError on any violated invariant.
  void validate() const;
};

struct ModelOptions {
  int d_x = 1;
  int d_y = 1;
  int d_u = 0;
  int num_inducing = 20;
  int lag = 5;
  gp::MeanFunction::Kind forward_mean = gp::MeanFunction::Kind::Zero;
  gp::MeanFunction::Kind backward_mean = gp::MeanFunction::Kind::Zero;
  double kernel_variance = 1.0;
  double kernel_lengthscale = 1.0;
  /// Per-input initial lengthscales (d_x + d_u); overrides the scalar when set.
  Eigen::RowVectorXd kernel_lengthscales;
  double process_noise = 1e-2;
  double obs_noise = 1e-1;
  double pseudo_noise = 1e-2;
  double q_scale = 1e-2;
  double recognition_variance = 1e-2;
  double prior_x1_var = 10.0;
  double k_soft = 50.0;
  double beta = 1.0;
};

/// Builds a model with the given inducing inputs (M x (d_x + d_u) each). The
/// recognition map starts by copying y_1 into the observed part of x_1.
SSMModel make_model(const ModelOptions& options, Eigen::MatrixXd forward_inducing,
                    Eigen::MatrixXd backward_inducing);

struct RecognitionVars {
  ad::Var weight;
  ad::Var bias;
};

struct ModelVars {
  gp::SparseGPVars forward;
  gp::SparseGPVars backward;
  ad::Var log_process_noise;
  ad::Var log_obs_noise;
  ad::Var log_pseudo_noise;
  RecognitionVars recognition;
  RecognitionVars backward_recognition;
};

/// Binds the learnable parameters. The backward GP and backward recognition
/// are bound only when the model has hidden states and `with_backward`.
ModelVars bind(ad::Binder& binder, const SSMModel& model, bool with_backward = true);

/// Tape-side view of a model for one rollout.
struct ModelState {
  const SSMModel* model = nullptr;
  ModelVars vars;
  gp::SparseGPState forward;
  gp::SparseGPState backward;
  bool has_backward = false;
  ad::Var process_var;  // 1 x d_x
  ad::Var obs_var;      // 1 x d_y
  ad::Var pseudo_var;   // 1 x d_x
};

ModelState prepare(const SSMModel& model, const ModelVars& vars);

}  // namespace gpssm::ssm
