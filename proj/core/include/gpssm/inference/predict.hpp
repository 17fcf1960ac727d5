#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "gpssm/ssm/model.hpp"

namespace gpssm::inference {

struct PredictOptions {
  int samples = 100;
  ssm::SamplingStrategy strategy = ssm::SamplingStrategy::IndependentPerStep;
  std::uint64_t seed = 0;
};

/// Moment-matched predictive Gaussians over y for steps first_step..T-1
/// (0-based), one row per step.
struct Prediction {
  int first_step = 0;
  Eigen::MatrixXd mean;  // (T - first_step) x d_y
  Eigen::MatrixXd var;   // (T - first_step) x d_y, includes Sigma_y
  /// Per-step state samples, T entries of S x d_x; filled on request.
  std::vector<Eigen::MatrixXd> states;
};

/// Open-loop prediction: x_1 from the recognition module applied to the first
/// lag rows of `y`, then `horizon - 1` unconditioned transitions driven by
/// `u`. Predictions cover steps lag..horizon-1. Throws DataError when
/// horizon <= lag or the inputs are too short.
Prediction predict_open_loop(const ssm::SSMModel& model, const Eigen::MatrixXd& y,
                             const Eigen::MatrixXd& u, int horizon, const PredictOptions& options,
                             bool keep_states = false);

struct Evaluation {
  double rmse = 0.0;
  double log_likelihood = 0.0;  // per predicted step, summed over outputs
};

/// Throws ShapeError when `y_true` and the prediction are not aligned.
Evaluation evaluate(const Prediction& prediction, const Eigen::MatrixXd& y_true);

}  // namespace gpssm::inference
