#include "gpssm/ssm/ops.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <string>

#include "gpssm/error.hpp"

namespace gpssm::ssm {

namespace {

ad::Var observed_part(ad::Var x, int d_y) {
  return x.cols() == d_y ? x : ad::slice(x, 0, 0, static_cast<int>(x.rows()), d_y);
}

ad::Var transition_input(const ModelState& state, ad::Var x, ad::Var u) {
  const SSMModel& m = *state.model;
  if (x.cols() != m.d_x) {
    throw ShapeError("transition input: states have " + std::to_string(x.cols()) +
                     " columns, model has d_x = " + std::to_string(m.d_x));
  }
  if (m.d_u == 0) return x;
  if (!u.valid() || u.cols() != m.d_u || u.rows() != x.rows()) {
    throw ShapeError("transition input: controls must be N x d_u");
  }
  const ad::Var parts[] = {x, u};
  return ad::hconcat(parts);
}

}  // namespace

FunctionDraw draw_functions(const ModelState& state, SamplingStrategy strategy,
                            const std::vector<Eigen::MatrixXd>& eps) {
  FunctionDraw draw;
  draw.strategy = strategy;
  if (strategy == SamplingStrategy::SampledInducingPerTrajectory) {
    draw.u = gp::sample_inducing(state.forward, eps);
  }
  return draw;
}

gp::Gaussian observe(const SSMModel& model, const gp::Gaussian& state) {
  if (state.dim() != model.d_x) throw ShapeError("observe: state dimension != d_x");
  const Eigen::VectorXd obs_var = model.log_obs_noise.transpose().array().exp().matrix();
  Eigen::MatrixXd cov = state.covariance().topLeftCorner(model.d_y, model.d_y);
  cov.diagonal() += obs_var;
  return gp::Gaussian::full(state.mean().head(model.d_y), std::move(cov));
}

DiagGaussian observe(const ModelState& state, const DiagGaussian& x) {
  const int d_y = state.model->d_y;
  return {observed_part(x.mean, d_y),
          observed_part(x.var, d_y) + ad::repeat_rows(state.obs_var, x.var.rows())};
}

DiagGaussian forward_prior(const ModelState& state, const FunctionDraw& draw, ad::Var x,
                           ad::Var u) {
  const ad::Var input = transition_input(state, x, u);
  gp::Marginals f;
  switch (draw.strategy) {
    case SamplingStrategy::IndependentPerStep:
      f = gp::predict_marginal(state.forward, input);
      break;
    case SamplingStrategy::SampledInducingPerTrajectory:
      f = gp::predict_conditional(state.forward, input, draw.u);
      break;
    case SamplingStrategy::MeanInducing:
      f = gp::predict_at_mean(state.forward, input);
      break;
  }
  return {f.mean, f.var + ad::repeat_rows(state.process_var, x.rows())};
}

Eigen::MatrixXd soft_gain(const Eigen::MatrixXd& prior_cov, const Eigen::MatrixXd& pseudo_cov,
                          double k) {
  if (prior_cov.rows() != pseudo_cov.rows() || prior_cov.cols() != pseudo_cov.cols() ||
      prior_cov.rows() != prior_cov.cols()) {
    throw ShapeError("soft_gain: covariances must be square and of equal size");
  }
  if (!(k >= 1.0)) throw ConfigError("soft_gain: k must be >= 1");
  const Eigen::MatrixXd s = 0.5 * (pseudo_cov + pseudo_cov.transpose()) +
                            0.5 * k * (prior_cov + prior_cov.transpose());
  const Eigen::LLT<Eigen::MatrixXd> llt(s);
  const double scale = s.diagonal().cwiseAbs().maxCoeff();
  if (llt.info() != Eigen::Success || !(scale > 0.0) ||
      llt.matrixLLT().diagonal().minCoeff() <= 1e-12 * std::sqrt(scale)) {
    throw NumericError("soft_gain: Sigma~ + k Sigma^- is singular");
  }
  // K = P S^{-1}  <=>  S K^T = P^T.
  return llt.solve(prior_cov.transpose()).transpose();
}

gp::Gaussian soft_condition(const gp::Gaussian& prior, const Eigen::VectorXd& pseudo_obs,
                            const Eigen::MatrixXd& pseudo_cov, double k) {
  if (pseudo_obs.size() != prior.dim()) throw ShapeError("soft_condition: observation size");
  const Eigen::MatrixXd p = prior.covariance();
  const Eigen::MatrixXd gain = soft_gain(p, pseudo_cov, k);
  const Eigen::MatrixXd rest = Eigen::MatrixXd::Identity(p.rows(), p.cols()) - gain;
  Eigen::MatrixXd cov = rest * p * rest.transpose() + gain * pseudo_cov * gain.transpose();
  cov = 0.5 * (cov + cov.transpose());
  return gp::Gaussian::full(prior.mean() + gain * (pseudo_obs - prior.mean()), std::move(cov));
}

DiagGaussian soft_condition(const DiagGaussian& prior, ad::Var pseudo_obs, ad::Var pseudo_var,
                            double k, ad::Var mask) {
  if (!(k >= 1.0)) throw ConfigError("soft_condition: k must be >= 1");
  const auto rows = prior.mean.rows();
  const auto cols = prior.mean.cols();
  if (pseudo_obs.rows() != rows || pseudo_obs.cols() != cols || pseudo_var.rows() != rows ||
      pseudo_var.cols() != cols) {
    throw ShapeError("soft_condition: pseudo-observation shape differs from the prior");
  }
  ad::Var gain = prior.var / (pseudo_var + prior.var * k);
  if (mask.valid()) gain = gain * ad::repeat_rows(mask, rows);
  const ad::Var rest = 1.0 - gain;
  return {prior.mean + gain * (pseudo_obs - prior.mean),
          ad::square(rest) * prior.var + ad::square(gain) * pseudo_var};
}

DiagGaussian recognize(const RecognitionVars& vars, ad::Var input) {
  if (input.cols() != vars.weight.rows()) {
    throw ShapeError("recognize: input has " + std::to_string(input.cols()) +
                     " columns, map expects " + std::to_string(vars.weight.rows()));
  }
  const int d = static_cast<int>(vars.weight.cols() / 2);
  const int n = static_cast<int>(input.rows());
  const ad::Var out =
      ad::matmul(input, vars.weight) + ad::repeat_rows(vars.bias, input.rows());
  return {ad::slice(out, 0, 0, n, d), ad::exp(ad::slice(out, 0, d, n, d))};
}

Eigen::RowVectorXd recognition_input(const Eigen::MatrixXd& y, const Eigen::MatrixXd& u,
                                     int lag) {
  if (lag < 1) throw ConfigError("recognition: lag must be >= 1");
  if (y.rows() < lag) {
    throw DataError("recognition: sequence of length " + std::to_string(y.rows()) +
                    " is shorter than the lag " + std::to_string(lag));
  }
  if (u.cols() > 0 && u.rows() < lag) throw DataError("recognition: controls shorter than lag");
  const Eigen::Index width = y.cols() + u.cols();
  Eigen::RowVectorXd out(lag * width);
  for (int t = 0; t < lag; ++t) {
    out.segment(t * width, y.cols()) = y.row(t);
    if (u.cols() > 0) out.segment(t * width + y.cols(), u.cols()) = u.row(t);
  }
  return out;
}

gp::Gaussian recognize(const RecognitionModule& module, const Eigen::MatrixXd& y,
                       const Eigen::MatrixXd& u) {
  const Eigen::RowVectorXd input = recognition_input(y, u, module.lag);
  if (input.size() != module.input_dim()) throw ShapeError("recognize: input width");
  const Eigen::RowVectorXd out = input * module.weight + module.bias;
  const Eigen::Index d = module.output_dim();
  return gp::Gaussian::diagonal(out.head(d).transpose(),
                                out.tail(d).transpose().array().exp().matrix());
}

DiagGaussian backward_step(const ModelState& state, ad::Var next, ad::Var u, ad::Var y) {
  const SSMModel& m = *state.model;
  if (y.cols() != m.d_y || y.rows() != next.rows()) {
    throw ShapeError("backward_step: observations must be N x d_y");
  }
  ad::Tape& tape = *next.tape();
  const ad::Var zeros = tape.constant(Eigen::MatrixXd::Zero(next.rows(), m.d_y));
  if (m.hidden_dim() == 0) return {y, zeros};
  if (!state.has_backward) throw ConfigError("backward_step: backward model not bound");
  const gp::Marginals h = gp::predict_marginal(state.backward, transition_input(state, next, u));
  const ad::Var means[] = {y, h.mean};
  const ad::Var vars[] = {zeros, h.var};
  return {ad::hconcat(means), ad::hconcat(vars)};
}

ad::Var sample(const DiagGaussian& g, const Eigen::MatrixXd& eps) {
  if (eps.rows() != g.mean.rows() || eps.cols() != g.mean.cols()) {
    throw ShapeError("sample: noise shape differs from the distribution");
  }
  return g.mean + ad::sqrt(g.var) * g.mean.tape()->constant(eps);
}

ad::Var expected_log_likelihood(const ModelState& state, const DiagGaussian& x, ad::Var y) {
  const int d_y = state.model->d_y;
  if (y.cols() != d_y || y.rows() != x.mean.rows()) {
    throw ShapeError("expected_log_likelihood: observations must be N x d_y");
  }
  const ad::Var obs_var = ad::repeat_rows(state.obs_var, y.rows());
  const ad::Var correction = ad::sum(observed_part(x.var, d_y) / obs_var) * 0.5;
  return gp::diagonal_log_density(y, observed_part(x.mean, d_y), obs_var) - correction;
}

ad::Var diagonal_kl(const DiagGaussian& q, const DiagGaussian& p) {
  return gp::diagonal_gaussian_kl(q.mean, q.var, p.mean, p.var);
}

}  // namespace gpssm::ssm
