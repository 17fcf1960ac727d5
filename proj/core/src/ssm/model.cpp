#include "gpssm/ssm/model.hpp"

#include <cmath>
#include <utility>

#include "gpssm/error.hpp"

namespace gpssm::ssm {

std::string to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::IndependentPerStep:
      return "independent";
    case SamplingStrategy::SampledInducingPerTrajectory:
      return "sampled_inducing";
    case SamplingStrategy::MeanInducing:
      return "mean_inducing";
  }
  return "unknown";
}

SamplingStrategy sampling_strategy_from_string(const std::string& s) {
  if (s == "independent") return SamplingStrategy::IndependentPerStep;
  if (s == "sampled_inducing") return SamplingStrategy::SampledInducingPerTrajectory;
  if (s == "mean_inducing") return SamplingStrategy::MeanInducing;
  throw ConfigError("unknown sampling strategy '" + s +
                    "' (expected independent, sampled_inducing or mean_inducing)");
}

RecognitionModule RecognitionModule::zeros(int lag, int input_dim, int output_dim) {
  RecognitionModule r;
  r.lag = lag;
  r.weight = Eigen::MatrixXd::Zero(input_dim, 2 * output_dim);
  r.bias = Eigen::RowVectorXd::Zero(2 * output_dim);
  return r;
}

void SSMModel::validate() const {
  if (d_x < 1 || d_y < 1 || d_u < 0) throw ConfigError("model: dimensions must be positive");
  if (d_y > d_x) throw ConfigError("model: d_y must not exceed d_x");
  forward.validate();
  if (forward.input_dim() != d_x + d_u || forward.output_dim() != d_x) {
    throw ShapeError("model: forward GP must map d_x + d_u inputs to d_x outputs");
  }
  if (backward.output_dim() != hidden_dim() ||
      (hidden_dim() > 0 && backward.input_dim() != d_x + d_u)) {
    throw ShapeError("model: backward GP must map d_x + d_u inputs to d_x - d_y outputs");
  }
  if (hidden_dim() > 0) backward.validate();
  if (log_process_noise.size() != d_x || log_pseudo_noise.size() != d_x ||
      log_obs_noise.size() != d_y) {
    throw ShapeError("model: noise parameter sizes");
  }
  if (prior_x1_mean.size() != d_x || prior_x1_var.size() != d_x ||
      !(prior_x1_var.array() > 0.0).all()) {
    throw ShapeError("model: p(x_1) must be d_x-dimensional with positive variance");
  }
  if (recognition.lag < 1 || recognition.input_dim() != recognition.lag * (d_y + d_u) ||
      recognition.output_dim() != d_x || recognition.bias.size() != 2 * d_x) {
    throw ShapeError("model: recognition map shape");
  }
  if (backward_recognition.input_dim() != d_y ||
      backward_recognition.output_dim() != hidden_dim() ||
      backward_recognition.bias.size() != 2 * hidden_dim()) {
    throw ShapeError("model: backward recognition map shape");
  }
  if (!(k_soft >= 1.0) || !(beta >= 0.0)) throw ConfigError("model: need k >= 1 and beta >= 0");
}

namespace {

// Linear means start as the identity map so both kinds agree at initialization.
void set_mean(gp::SparseGP& g, gp::MeanFunction::Kind kind, int offset) {
  g.mean_kind = kind;
  g.identity_offset = offset;
  if (kind == gp::MeanFunction::Kind::Linear) {
    g.mean_weights = Eigen::MatrixXd::Zero(g.input_dim(), g.output_dim());
    for (int j = 0; j < g.output_dim(); ++j) g.mean_weights(j + offset, j) = 1.0;
  }
  g.validate();
}

}  // namespace

SSMModel make_model(const ModelOptions& o, Eigen::MatrixXd forward_inducing,
                    Eigen::MatrixXd backward_inducing) {
  if (o.d_x < 1 || o.d_y < 1 || o.d_y > o.d_x || o.d_u < 0 || o.lag < 1) {
    throw ConfigError("model: invalid dimensions (need 1 <= d_y <= d_x, d_u >= 0, lag >= 1)");
  }
  const int d_in = o.d_x + o.d_u;
  const int hidden = o.d_x - o.d_y;
  SSMModel m;
  m.d_x = o.d_x;
  m.d_y = o.d_y;
  m.d_u = o.d_u;
  if (o.kernel_lengthscales.size() != 0 && o.kernel_lengthscales.size() != d_in) {
    throw ConfigError("model: kernel_lengthscales needs d_x + d_u entries");
  }
  const gp::Kernel kernel =
      o.kernel_lengthscales.size() != 0
          ? gp::Kernel::se_ard(o.kernel_variance, o.kernel_lengthscales)
          : gp::Kernel::se_ard(o.kernel_variance, o.kernel_lengthscale, d_in);
  std::vector<gp::Kernel> fk(o.d_x, kernel);
  m.forward = gp::SparseGP::create(std::move(forward_inducing), std::move(fk),
                                   gp::MeanFunction::Kind::Zero, o.q_scale);
  set_mean(m.forward, o.forward_mean, 0);
  if (hidden > 0) {
    std::vector<gp::Kernel> bk(hidden, kernel);
    m.backward = gp::SparseGP::create(std::move(backward_inducing), std::move(bk),
                                      gp::MeanFunction::Kind::Zero, o.q_scale);
    // Hidden output j of the backward model continues hidden input d_y + j.
    set_mean(m.backward, o.backward_mean, o.d_y);
  } else {
    m.backward.inducing_inputs = Eigen::MatrixXd::Zero(0, d_in);
    m.backward.q_mean = Eigen::MatrixXd::Zero(0, 0);
  }
  m.log_process_noise = Eigen::RowVectorXd::Constant(o.d_x, std::log(o.process_noise));
  m.log_obs_noise = Eigen::RowVectorXd::Constant(o.d_y, std::log(o.obs_noise));
  m.log_pseudo_noise = Eigen::RowVectorXd::Constant(o.d_x, std::log(o.pseudo_noise));
  m.prior_x1_mean = Eigen::RowVectorXd::Zero(o.d_x);
  m.prior_x1_var = Eigen::RowVectorXd::Constant(o.d_x, o.prior_x1_var);

  m.recognition = RecognitionModule::zeros(o.lag, o.lag * (o.d_y + o.d_u), o.d_x);
  for (int j = 0; j < o.d_y; ++j) m.recognition.weight(j, j) = 1.0;
  m.recognition.bias.tail(o.d_x).setConstant(std::log(o.recognition_variance));

  m.backward_recognition = RecognitionModule::zeros(1, o.d_y, hidden);
  m.backward_recognition.bias.tail(hidden).setConstant(std::log(o.recognition_variance));

  m.k_soft = o.k_soft;
  m.beta = o.beta;
  m.validate();
  return m;
}

namespace {

RecognitionVars bind_recognition(ad::Binder& binder, const RecognitionModule& r,
                                 const std::string& prefix) {
  return {binder.bind(prefix + ".weight", r.weight), binder.bind(prefix + ".bias", r.bias)};
}

}  // namespace

ModelVars bind(ad::Binder& binder, const SSMModel& model, bool with_backward) {
  ModelVars v;
  v.forward = gp::bind(binder, model.forward, "forward");
  v.log_process_noise = binder.bind("log_process_noise", model.log_process_noise);
  v.log_obs_noise = binder.bind("log_obs_noise", model.log_obs_noise);
  v.log_pseudo_noise = binder.bind("log_pseudo_noise", model.log_pseudo_noise);
  v.recognition = bind_recognition(binder, model.recognition, "recognition");
  if (with_backward && model.hidden_dim() > 0) {
    v.backward = gp::bind(binder, model.backward, "backward");
    v.backward_recognition =
        bind_recognition(binder, model.backward_recognition, "backward_recognition");
  }
  return v;
}

ModelState prepare(const SSMModel& model, const ModelVars& vars) {
  ModelState s;
  s.model = &model;
  s.vars = vars;
  s.forward = gp::prepare(model.forward, vars.forward);
  s.has_backward = model.hidden_dim() > 0 && vars.backward.inducing_inputs.valid();
  if (s.has_backward) s.backward = gp::prepare(model.backward, vars.backward);
  s.process_var = ad::exp(vars.log_process_noise);
  s.obs_var = ad::exp(vars.log_obs_noise);
  s.pseudo_var = ad::exp(vars.log_pseudo_noise);
  return s;
}

}  // namespace gpssm::ssm
