#include "gpssm/inference/rollout.hpp"

#include <string>

#include "gpssm/error.hpp"
#include "gpssm/random.hpp"

namespace gpssm::inference {

namespace {

// Keeps the reparameterization gradient finite when a backward predictive
// variance collapses to zero.
constexpr double kSampleFloor = 1e-10;

enum Stream : std::uint64_t {
  kForwardStream = 10,
  kInducingStream = 11,
  kBackwardStream = 12,
};

ad::Var columns(ad::Var a, int first, int count) {
  if (first == 0 && count == a.cols()) return a;
  return ad::slice(a, 0, first, static_cast<int>(a.rows()), count);
}

ad::Var controls_at(ad::Tape& tape, const RolloutBatch& batch, int t) {
  if (batch.u[static_cast<std::size_t>(t)].cols() == 0) return {};
  return tape.constant(batch.u[static_cast<std::size_t>(t)]);
}

void check_batch(const ssm::SSMModel& m, const RolloutBatch& batch, const RolloutNoise& noise) {
  const int n = batch.rows();
  const int t = batch.length();
  if (t < 2) throw ShapeError("rollout: need at least two time steps");
  if (static_cast<int>(batch.u.size()) != t) throw ShapeError("rollout: u and y lengths differ");
  for (int i = 0; i < t; ++i) {
    if (batch.y[i].rows() != n || batch.y[i].cols() != m.d_y || batch.u[i].rows() != n ||
        batch.u[i].cols() != m.d_u) {
      throw ShapeError("rollout: batch step " + std::to_string(i) + " has the wrong shape");
    }
  }
  if (batch.recognition_input.rows() != n ||
      batch.recognition_input.cols() != m.recognition.input_dim()) {
    throw ShapeError("rollout: recognition input must be N x lag * (d_y + d_u)");
  }
  if (noise.initial.rows() != n || noise.initial.cols() != m.d_x ||
      static_cast<int>(noise.transition.size()) != t - 1) {
    throw ShapeError("rollout: noise does not match the batch");
  }
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::PRSSM:
      return "PRSSM";
    case Algorithm::VCDT:
      return "VCDT";
    case Algorithm::CBFSSM:
      return "CBFSSM";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "PRSSM" || s == "prssm" || s == "PR-SSM") return Algorithm::PRSSM;
  if (s == "VCDT" || s == "vcdt") return Algorithm::VCDT;
  if (s == "CBFSSM" || s == "cbfssm" || s == "CBF-SSM") return Algorithm::CBFSSM;
  throw ConfigError("unknown algorithm '" + s + "' (expected PRSSM, VCDT or CBFSSM)");
}

ssm::SamplingStrategy default_strategy(Algorithm a) {
  return a == Algorithm::VCDT ? ssm::SamplingStrategy::SampledInducingPerTrajectory
                              : ssm::SamplingStrategy::IndependentPerStep;
}

RolloutBatch make_batch(const std::vector<data::Window>& windows, int samples, int lag) {
  if (windows.empty() || samples < 1) throw ConfigError("batch: need windows and samples >= 1");
  const int t = windows.front().length();
  const auto d_y = windows.front().y.cols();
  const auto d_u = windows.front().u.cols();
  if (t < lag) throw DataError("batch: windows shorter than the recognition lag");
  RolloutBatch b;
  b.windows = static_cast<int>(windows.size());
  b.samples = samples;
  const int n = b.rows();
  b.y.assign(t, Eigen::MatrixXd(n, d_y));
  b.u.assign(t, Eigen::MatrixXd(n, d_u));
  b.recognition_input.resize(n, lag * (d_y + d_u));
  for (int w = 0; w < b.windows; ++w) {
    const data::Window& win = windows[static_cast<std::size_t>(w)];
    if (win.length() != t || win.y.cols() != d_y || win.u.cols() != d_u) {
      throw ShapeError("batch: windows must share length and dimensions");
    }
    const Eigen::RowVectorXd rec = ssm::recognition_input(win.y, win.u, lag);
    for (int s = 0; s < samples; ++s) {
      const int r = w * samples + s;
      for (int i = 0; i < t; ++i) {
        b.y[i].row(r) = win.y.row(i);
        b.u[i].row(r) = win.u.row(i);
      }
      b.recognition_input.row(r) = rec;
    }
  }
  return b;
}

RolloutNoise draw_noise(const ssm::SSMModel& model, int length, int rows, std::uint64_t seed) {
  RolloutNoise n;
  Rng forward = make_rng(seed, kForwardStream);
  n.initial = standard_normal(forward, rows, model.d_x);
  for (int t = 0; t + 1 < length; ++t) n.transition.push_back(standard_normal(forward, rows, model.d_x));
  Rng inducing = make_rng(seed, kInducingStream);
  for (int j = 0; j < model.forward.output_dim(); ++j) {
    n.inducing.push_back(standard_normal(inducing, model.forward.num_inducing(), rows));
  }
  Rng backward = make_rng(seed, kBackwardStream);
  const int hidden = model.hidden_dim();
  n.backward_initial = standard_normal(backward, rows, hidden);
  for (int t = 0; t + 1 < length; ++t) n.backward.push_back(standard_normal(backward, rows, hidden));
  return n;
}

PseudoStates backward_pass(const ssm::ModelState& state, const RolloutBatch& batch,
                           const RolloutNoise& noise) {
  const ssm::SSMModel& m = *state.model;
  check_batch(m, batch, noise);
  ad::Tape& tape = *state.pseudo_var.tape();
  const int n = batch.rows();
  const int t_len = batch.length();
  const int hidden = m.hidden_dim();
  PseudoStates out;
  out.value.resize(t_len);
  out.var.resize(t_len);
  const ad::Var obs_floor = ad::repeat_rows(columns(state.pseudo_var, 0, m.d_y), n);
  if (hidden == 0) {
    for (int t = 0; t < t_len; ++t) {
      out.value[t] = tape.constant(batch.y[t]);
      out.var[t] = obs_floor;
    }
    return out;
  }
  if (!state.has_backward) throw ConfigError("backward pass: backward model not bound");
  if (static_cast<int>(noise.backward.size()) != t_len - 1 || noise.backward_initial.rows() != n) {
    throw ShapeError("backward pass: noise does not match the batch");
  }
  const ad::Var hidden_floor = ad::repeat_rows(columns(state.pseudo_var, m.d_y, hidden), n);
  auto assemble = [&](int t, ad::Var y, ad::Var h_mean, ad::Var h_var, const Eigen::MatrixXd& eps) {
    const ad::Var h = h_mean + ad::sqrt(h_var + kSampleFloor) * tape.constant(eps);
    const ad::Var values[] = {y, h};
    const ad::Var vars[] = {obs_floor, h_var + hidden_floor};
    out.value[t] = ad::hconcat(values);
    out.var[t] = ad::hconcat(vars);
  };
  {
    const ad::Var y_last = tape.constant(batch.y[t_len - 1]);
    const ssm::DiagGaussian q = ssm::recognize(state.vars.backward_recognition, y_last);
    assemble(t_len - 1, y_last, q.mean, q.var, noise.backward_initial);
  }
  for (int t = t_len - 2; t >= 0; --t) {
    const ad::Var y = tape.constant(batch.y[t]);
    const ssm::DiagGaussian b =
        ssm::backward_step(state, out.value[t + 1], controls_at(tape, batch, t), y);
    assemble(t, y, columns(b.mean, m.d_y, hidden), columns(b.var, m.d_y, hidden),
             noise.backward[t]);
  }
  return out;
}

Rollout forward_pass(const ssm::ModelState& state, const RolloutOptions& options,
                     const RolloutBatch& batch, const RolloutNoise& noise,
                     const PseudoStates* pseudo) {
  const ssm::SSMModel& m = *state.model;
  check_batch(m, batch, noise);
  ad::Tape& tape = *state.pseudo_var.tape();
  const int n = batch.rows();
  const int t_len = batch.length();
  if (options.algorithm == Algorithm::CBFSSM &&
      (pseudo == nullptr || static_cast<int>(pseudo->value.size()) != t_len)) {
    throw ConfigError("forward pass: CBFSSM needs pseudo-states from the backward pass");
  }
  if (options.strategy == ssm::SamplingStrategy::SampledInducingPerTrajectory &&
      static_cast<int>(noise.inducing.size()) != m.forward.output_dim()) {
    throw ConfigError("forward pass: per-trajectory sampling needs inducing noise");
  }

  Rollout r;
  r.algorithm = options.algorithm;
  r.strategy = options.strategy;
  const double inv_n = 1.0 / n;

  r.initial = ssm::recognize(state.vars.recognition, tape.constant(batch.recognition_input));
  const ssm::DiagGaussian p1{
      tape.constant(Eigen::MatrixXd(m.prior_x1_mean.replicate(n, 1))),
      tape.constant(Eigen::MatrixXd(m.prior_x1_var.replicate(n, 1)))};
  r.recognition_kl = ssm::diagonal_kl(r.initial, p1) * inv_n;
  r.states.push_back(ssm::sample(r.initial, noise.initial));
  r.observations.push_back(ssm::observe(state, r.initial));
  ad::Var loglik = ssm::expected_log_likelihood(state, r.initial, tape.constant(batch.y[0]));
  ad::Var cond_kl = tape.constant(0.0);

  const ssm::FunctionDraw draw = ssm::draw_functions(state, options.strategy, noise.inducing);

  // VCDT conditions only the measured components.
  ad::Var vcdt_mask;
  ad::Var vcdt_var;
  if (options.algorithm == Algorithm::VCDT) {
    vcdt_var = ad::repeat_rows(state.pseudo_var, n);
    if (m.hidden_dim() > 0) {
      Eigen::RowVectorXd mask = Eigen::RowVectorXd::Zero(m.d_x);
      mask.head(m.d_y).setOnes();
      vcdt_mask = tape.constant(Eigen::MatrixXd(mask));
    }
  }

  for (int t = 0; t + 1 < t_len; ++t) {
    const ssm::DiagGaussian prior =
        ssm::forward_prior(state, draw, r.states.back(), controls_at(tape, batch, t));
    ssm::DiagGaussian post = prior;
    switch (options.algorithm) {
      case Algorithm::PRSSM:
        break;
      case Algorithm::VCDT: {
        Eigen::MatrixXd target = Eigen::MatrixXd::Zero(n, m.d_x);
        target.leftCols(m.d_y) = batch.y[t + 1];
        post = ssm::soft_condition(prior, tape.constant(target), vcdt_var, options.k_vcdt,
                                   vcdt_mask);
        break;
      }
      case Algorithm::CBFSSM:
        post = ssm::soft_condition(prior, pseudo->value[t + 1], pseudo->var[t + 1],
                                   options.k_soft);
        break;
    }
    if (options.algorithm != Algorithm::PRSSM) cond_kl = cond_kl + ssm::diagonal_kl(post, prior);
    r.priors.push_back(prior);
    r.posteriors.push_back(post);
    r.states.push_back(ssm::sample(post, noise.transition[t]));
    r.observations.push_back(ssm::observe(state, post));
    loglik = loglik + ssm::expected_log_likelihood(state, post, tape.constant(batch.y[t + 1]));
  }
  r.log_likelihood = loglik * inv_n;
  r.conditioning_kl = cond_kl * inv_n;
  return r;
}

}  // namespace gpssm::inference
