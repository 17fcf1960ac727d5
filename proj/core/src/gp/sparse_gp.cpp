#include "gpssm/gp/sparse_gp.hpp"

#include <cmath>
#include <string>

#include "gpssm/ad/linalg.hpp"
#include "gpssm/error.hpp"

namespace gpssm::gp {

namespace {

Eigen::MatrixXd strict_lower_mask(Eigen::Index m) {
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = j + 1; i < m; ++i) mask(i, j) = 1.0;
  }
  return mask;
}

Eigen::MatrixXd raw_from_cholesky(const Eigen::MatrixXd& lower) {
  Eigen::MatrixXd raw = lower.triangularView<Eigen::StrictlyLower>();
  raw.diagonal() = lower.diagonal().array().log().matrix();
  return raw;
}

// Quantities needed by every prediction for output j at queries x.
struct Projection {
  ad::Var b;  // L_zz^{-1} K_zx      (M x N)
  ad::Var c;  // K_zz^{-1} K_zx      (M x N)
};

Projection project(const SparseGPState& state, int j, ad::Var x) {
  const ad::Var kzx = kernel_matrix(state.vars.kernels[j], state.vars.inducing_inputs, x);
  const ad::Var b = ad::tri_solve(state.kzz_chol[j], kzx, false);
  const ad::Var c = ad::tri_solve(state.kzz_chol[j], b, true);
  return {b, c};
}

void check_query(const SparseGPState& state, ad::Var x) {
  if (x.cols() != state.gp->input_dim()) {
    throw ShapeError("sparse GP: query has " + std::to_string(x.cols()) +
                     " columns, inducing inputs have " + std::to_string(state.gp->input_dim()));
  }
}

Marginals assemble(std::vector<ad::Var>& means, std::vector<ad::Var>& vars) {
  return {ad::hconcat(means), ad::hconcat(vars)};
}

}  // namespace

SparseGP SparseGP::create(Eigen::MatrixXd inducing_inputs, std::vector<Kernel> kernels,
                          MeanFunction::Kind mean_kind, double q_scale) {
  SparseGP gp;
  const Eigen::Index m = inducing_inputs.rows();
  gp.inducing_inputs = std::move(inducing_inputs);
  gp.kernels = std::move(kernels);
  gp.mean_kind = mean_kind;
  gp.q_mean = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(gp.kernels.size()));
  for (std::size_t j = 0; j < gp.kernels.size(); ++j) {
    gp.q_chol_raw.push_back(
        raw_from_cholesky(q_scale * Eigen::MatrixXd::Identity(m, m)));
  }
  gp.validate();
  return gp;
}

MeanFunction SparseGP::mean_for(int output) const {
  switch (mean_kind) {
    case MeanFunction::Kind::Zero:
      return MeanFunction::zero();
    case MeanFunction::Kind::Constant:
      return MeanFunction::constant_value(mean_constant);
    case MeanFunction::Kind::Identity:
      return MeanFunction::identity(output + identity_offset);
    case MeanFunction::Kind::Linear:
      return MeanFunction::linear(mean_weights.col(output));
  }
  return {};
}

Eigen::MatrixXd SparseGP::q_cholesky(int output) const {
  const Eigen::MatrixXd& raw = q_chol_raw.at(output);
  Eigen::MatrixXd lower = raw.triangularView<Eigen::StrictlyLower>();
  lower.diagonal() = raw.diagonal().array().exp().matrix();
  return lower;
}

Eigen::MatrixXd SparseGP::q_covariance(int output) const {
  const Eigen::MatrixXd lower = q_cholesky(output);
  return lower * lower.transpose();
}

void SparseGP::set_q_cholesky(int output, const Eigen::MatrixXd& lower) {
  if (lower.rows() != num_inducing() || lower.cols() != num_inducing()) {
    throw ShapeError("set_q_cholesky: expected an M x M factor");
  }
  if (!(lower.diagonal().array() > 0.0).all()) {
    throw NumericError("set_q_cholesky: factor diagonal must be positive");
  }
  q_chol_raw.at(output) = raw_from_cholesky(lower);
}

void SparseGP::set_q(int output, const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance) {
  if (mean.size() != num_inducing()) throw ShapeError("set_q: mean must have M entries");
  q_mean.col(output) = mean - mean_for(output).evaluate(inducing_inputs);
  set_q_cholesky(output, ad::cholesky_lower(covariance, 0.0));
}

Eigen::MatrixXd SparseGP::prior_covariance(int output) const {
  Eigen::MatrixXd kzz = kernel_matrix(kernels.at(output), inducing_inputs, inducing_inputs);
  kzz.diagonal().array() += jitter * kernels.at(output).variance();
  return kzz;
}

void SparseGP::set_q_to_prior() {
  for (int j = 0; j < output_dim(); ++j) {
    q_mean.col(j).setZero();
    set_q_cholesky(j, ad::cholesky_lower(prior_covariance(j), 0.0));
  }
}

void SparseGP::validate() const {
  const int m = num_inducing();
  if (m < 1) throw ConfigError("sparse GP: need at least one inducing input");
  if (q_mean.rows() != m || q_mean.cols() != output_dim() ||
      static_cast<int>(q_chol_raw.size()) != output_dim()) {
    throw ShapeError("sparse GP: inducing distribution does not match M or output count");
  }
  for (const Kernel& k : kernels) {
    if (k.input_dim() != input_dim()) throw ShapeError("sparse GP: kernel input dimension");
  }
  for (const Eigen::MatrixXd& raw : q_chol_raw) {
    if (raw.rows() != m || raw.cols() != m) throw ShapeError("sparse GP: q(u) factor shape");
  }
  if (mean_kind == MeanFunction::Kind::Identity &&
      (identity_offset < 0 || output_dim() + identity_offset > input_dim())) {
    throw ConfigError("sparse GP: identity mean needs input column j + offset for every output j");
  }
  if (mean_kind == MeanFunction::Kind::Linear &&
      (mean_weights.rows() != input_dim() || mean_weights.cols() != output_dim())) {
    throw ShapeError("sparse GP: linear mean weights must be d_in x d_out");
  }
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      if ((inducing_inputs.row(a) - inducing_inputs.row(b)).norm() <= 1e-8) {
        throw ConfigError("sparse GP: inducing inputs " + std::to_string(a) + " and " +
                          std::to_string(b) + " coincide");
      }
    }
  }
}

SparseGPVars bind(ad::Binder& binder, const SparseGP& gp, const std::string& prefix) {
  SparseGPVars vars;
  for (int j = 0; j < gp.output_dim(); ++j) {
    vars.kernels.push_back(gp::bind(binder, gp.kernels[j], prefix + ".kernel" + std::to_string(j)));
  }
  vars.inducing_inputs = binder.bind(prefix + ".z", gp.inducing_inputs);
  vars.q_mean = binder.bind(prefix + ".q_mean", gp.q_mean);
  for (int j = 0; j < gp.output_dim(); ++j) {
    vars.q_chol_raw.push_back(
        binder.bind(prefix + ".q_chol" + std::to_string(j), gp.q_chol_raw[j]));
  }
  return vars;
}

SparseGPState prepare(const SparseGP& gp, const SparseGPVars& vars) {
  SparseGPState state;
  state.gp = &gp;
  state.vars = vars;
  ad::Tape& tape = *vars.inducing_inputs.tape();
  const Eigen::Index m = gp.num_inducing();
  const ad::Var mask = tape.constant(strict_lower_mask(m));
  for (int j = 0; j < gp.output_dim(); ++j) {
    const ad::Var kzz =
        kernel_matrix(vars.kernels[j], vars.inducing_inputs, vars.inducing_inputs);
    const double jitter = gp.jitter * std::exp(vars.kernels[j].log_variance.scalar());
    state.kzz_chol.push_back(ad::cholesky(kzz, jitter));
    const ad::Var raw = vars.q_chol_raw[j];
    state.q_chol.push_back(raw * mask + ad::diag_matrix(ad::exp(ad::diag_part(raw))));
    state.prior_mean_z.push_back(mean_values(gp.mean_for(j), vars.inducing_inputs));
    state.q_residual.push_back(ad::col(vars.q_mean, j));
    state.q_mean.push_back(state.q_residual.back() + state.prior_mean_z.back());
  }
  return state;
}

Marginals predict_marginal(const SparseGPState& state, ad::Var x) {
  check_query(state, x);
  std::vector<ad::Var> means;
  std::vector<ad::Var> vars;
  for (int j = 0; j < state.gp->output_dim(); ++j) {
    const Projection p = project(state, j, x);
    const ad::Var centered = state.q_residual[j];
    means.push_back(mean_values(state.gp->mean_for(j), x) +
                    ad::matmul(ad::transpose(p.c), centered));
    const ad::Var lqc = ad::matmul(ad::transpose(state.q_chol[j]), p.c);
    const ad::Var reduction = ad::col_sum(ad::square(p.b)) - ad::col_sum(ad::square(lqc));
    vars.push_back(kernel_diag(state.vars.kernels[j], x.rows()) - ad::transpose(reduction));
  }
  return assemble(means, vars);
}

Marginals predict_at_mean(const SparseGPState& state, ad::Var x) {
  check_query(state, x);
  std::vector<ad::Var> means;
  std::vector<ad::Var> vars;
  for (int j = 0; j < state.gp->output_dim(); ++j) {
    const Projection p = project(state, j, x);
    const ad::Var centered = state.q_residual[j];
    means.push_back(mean_values(state.gp->mean_for(j), x) +
                    ad::matmul(ad::transpose(p.c), centered));
    vars.push_back(kernel_diag(state.vars.kernels[j], x.rows()) -
                   ad::transpose(ad::col_sum(ad::square(p.b))));
  }
  return assemble(means, vars);
}

Marginals predict_conditional(const SparseGPState& state, ad::Var x,
                              const std::vector<ad::Var>& u) {
  check_query(state, x);
  if (static_cast<int>(u.size()) != state.gp->output_dim()) {
    throw ShapeError("predict_conditional: one inducing sample matrix per output required");
  }
  std::vector<ad::Var> means;
  std::vector<ad::Var> vars;
  for (int j = 0; j < state.gp->output_dim(); ++j) {
    if (u[j].rows() != state.gp->num_inducing() || u[j].cols() != x.rows()) {
      throw ShapeError("predict_conditional: inducing samples must be M x N");
    }
    const Projection p = project(state, j, x);
    const ad::Var centered = u[j] - ad::repeat_cols(state.prior_mean_z[j], x.rows());
    means.push_back(mean_values(state.gp->mean_for(j), x) +
                    ad::transpose(ad::col_sum(p.c * centered)));
    vars.push_back(kernel_diag(state.vars.kernels[j], x.rows()) -
                   ad::transpose(ad::col_sum(ad::square(p.b))));
  }
  return assemble(means, vars);
}

std::vector<ad::Var> sample_inducing(const SparseGPState& state,
                                     const std::vector<Eigen::MatrixXd>& eps) {
  if (static_cast<int>(eps.size()) != state.gp->output_dim()) {
    throw ShapeError("sample_inducing: one noise matrix per output required");
  }
  ad::Tape& tape = *state.vars.q_mean.tape();
  std::vector<ad::Var> out;
  for (int j = 0; j < state.gp->output_dim(); ++j) {
    const ad::Var noise = tape.constant(eps[j]);
    out.push_back(ad::repeat_cols(state.q_mean[j], eps[j].cols()) +
                  ad::matmul(state.q_chol[j], noise));
  }
  return out;
}

ad::Var inducing_kl(const SparseGPState& state) {
  ad::Tape& tape = *state.vars.q_mean.tape();
  ad::Var total = tape.constant(0.0);
  for (int j = 0; j < state.gp->output_dim(); ++j) {
    const ad::Var zero = tape.constant(Eigen::MatrixXd::Zero(state.gp->num_inducing(), 1));
    total = total + gaussian_kl(state.q_residual[j], state.q_chol[j], zero, state.kzz_chol[j]);
  }
  return total;
}

std::vector<Gaussian> sparse_predict(const SparseGP& gp, const Eigen::MatrixXd& x_query,
                                     bool full_covariance) {
  gp.validate();
  ad::Tape tape;
  ad::Binder binder(tape, false);
  const SparseGPState state = prepare(gp, gp::bind(binder, gp, "gp"));
  const ad::Var x = tape.constant(x_query);
  check_query(state, x);
  std::vector<Gaussian> out;
  if (!full_covariance) {
    const Marginals m = predict_marginal(state, x);
    for (int j = 0; j < gp.output_dim(); ++j) {
      Eigen::VectorXd var = m.var.value().col(j).cwiseMax(0.0);
      out.push_back(Gaussian::diagonal(m.mean.value().col(j), std::move(var)));
    }
    return out;
  }
  for (int j = 0; j < gp.output_dim(); ++j) {
    const Projection p = project(state, j, x);
    const ad::Var centered = state.q_residual[j];
    const ad::Var mean =
        mean_values(gp.mean_for(j), x) + ad::matmul(ad::transpose(p.c), centered);
    const ad::Var lqc = ad::matmul(ad::transpose(state.q_chol[j]), p.c);
    const ad::Var cov = kernel_matrix(state.vars.kernels[j], x, x) -
                        ad::matmul(ad::transpose(p.b), p.b) +
                        ad::matmul(ad::transpose(lqc), lqc);
    Eigen::MatrixXd sym = 0.5 * (cov.value() + cov.value().transpose());
    out.push_back(Gaussian::full(mean.value().col(0), std::move(sym)));
  }
  return out;
}

double inducing_kl(const SparseGP& gp) {
  gp.validate();
  ad::Tape tape;
  ad::Binder binder(tape, false);
  return inducing_kl(prepare(gp, gp::bind(binder, gp, "gp"))).scalar();
}

}  // namespace gpssm::gp
