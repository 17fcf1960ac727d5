#include "gpssm/inference/predict.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "gpssm/ad/binder.hpp"
#include "gpssm/error.hpp"
#include "gpssm/inference/rollout.hpp"
#include "gpssm/ssm/ops.hpp"

namespace gpssm::inference {

namespace {

/// Moment-matches per-sample observation Gaussians into one row.
void moment_match(const Eigen::MatrixXd& obs_mean, const Eigen::MatrixXd& obs_var,
                  const Eigen::RowVectorXd& noise_var, Eigen::MatrixXd& mean_out,
                  Eigen::MatrixXd& var_out, int row) {
  const Eigen::RowVectorXd mean = obs_mean.colwise().mean();
  const Eigen::MatrixXd centered = obs_mean.rowwise() - mean;
  mean_out.row(row) = mean;
  var_out.row(row) = (obs_var.rowwise() + noise_var).colwise().mean() +
                     centered.cwiseAbs2().colwise().mean();
}

}  // namespace

Prediction predict_open_loop(const ssm::SSMModel& model, const Eigen::MatrixXd& y,
                             const Eigen::MatrixXd& u, int horizon, const PredictOptions& options,
                             bool keep_states) {
  model.validate();
  const int lag = model.lag();
  const int S = options.samples;
  if (S < 1) throw ConfigError("predict: samples must be >= 1");
  if (horizon <= lag) {
    throw DataError("predict: horizon " + std::to_string(horizon) +
                    " must exceed the recognition lag " + std::to_string(lag));
  }
  if (y.rows() < lag || y.cols() != model.d_y) {
    throw DataError("predict: need at least lag rows of d_y observations");
  }
  Eigen::MatrixXd u_full = model.d_u == 0 ? Eigen::MatrixXd(horizon, 0) : u;
  if (u_full.cols() != model.d_u || u_full.rows() < horizon - 1 || u_full.rows() < lag) {
    throw DataError("predict: controls must cover the horizon with d_u columns");
  }

  const RolloutNoise noise = draw_noise(model, horizon, S, options.seed);
  const Eigen::RowVectorXd obs_var = model.log_obs_noise.array().exp();
  const int d_y = model.d_y;

  Prediction p;
  p.first_step = lag;
  p.mean.resize(horizon - lag, d_y);
  p.var.resize(horizon - lag, d_y);

  const gp::Gaussian q1 = ssm::recognize(model.recognition, y.topRows(lag), u_full.topRows(lag));
  const Eigen::RowVectorXd sd1 = q1.variance().cwiseSqrt().transpose();
  Eigen::MatrixXd x =
      (noise.initial.array().rowwise() * sd1.array()).matrix().rowwise() + q1.mean().transpose();
  Eigen::MatrixXd step_mean = q1.mean().transpose().replicate(S, 1);
  Eigen::MatrixXd step_var = q1.variance().transpose().replicate(S, 1);
  if (keep_states) p.states.push_back(x);

  for (int t = 0;; ++t) {
    if (t >= lag) {
      moment_match(step_mean.leftCols(d_y), step_var.leftCols(d_y), obs_var, p.mean, p.var,
                   t - lag);
    }
    if (t + 1 == horizon) break;
    // A fresh tape per step keeps memory flat in the horizon.
    ad::Tape tape(false);
    ad::Binder binder(tape, false);
    const ssm::ModelState state = ssm::prepare(model, ssm::bind(binder, model, false));
    const ssm::FunctionDraw draw = ssm::draw_functions(state, options.strategy, noise.inducing);
    const ad::Var u_t = model.d_u > 0 ? tape.constant(u_full.row(t).replicate(S, 1)) : ad::Var{};
    const ssm::DiagGaussian prior = ssm::forward_prior(state, draw, tape.constant(x), u_t);
    step_mean = prior.mean.value();
    step_var = prior.var.value();
    x = step_mean + (step_var.cwiseSqrt().array() * noise.transition[t].array()).matrix();
    if (keep_states) p.states.push_back(x);
  }
  if (!p.mean.allFinite() || !p.var.allFinite()) {
    throw NumericError("predict: non-finite predictive moments");
  }
  return p;
}

Evaluation evaluate(const Prediction& prediction, const Eigen::MatrixXd& y_true) {
  const Eigen::MatrixXd& m = prediction.mean;
  if (y_true.rows() != m.rows() || y_true.cols() != m.cols() ||
      prediction.var.rows() != m.rows() || prediction.var.cols() != m.cols()) {
    throw ShapeError("evaluate: predictions and targets are not aligned");
  }
  if (m.rows() == 0) throw ShapeError("evaluate: no predicted steps");
  const Eigen::ArrayXXd err = (y_true - m).array();
  const Eigen::ArrayXXd v = prediction.var.array();
  Evaluation e;
  e.rmse = std::sqrt(err.square().mean());
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  e.log_likelihood = (-0.5 * (log_2pi + v.log() + err.square() / v)).sum() / m.rows();
  return e;
}

}  // namespace gpssm::inference
