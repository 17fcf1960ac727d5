#include "gpssm/inference/elbo.hpp"

#include "gpssm/error.hpp"

namespace gpssm::inference {

namespace {

double scalar(ad::Var v) { return v.value()(0, 0); }

}  // namespace

ELBOTerms ElboGraph::terms() const {
  ELBOTerms t;
  t.likelihood = scalar(likelihood);
  t.kl_forward = scalar(kl_forward);
  t.kl_backward = scalar(kl_backward);
  t.kl_recognition = scalar(kl_recognition);
  t.kl_conditioning = scalar(kl_conditioning);
  t.beta = beta;
  t.scale = scale;
  t.total = scalar(total);
  return t;
}

double inducing_kl_scale(KlScaling scaling, ssm::SamplingStrategy strategy, int t_sub,
                         double t_full) {
  if (t_sub < 1 || t_full < t_sub) {
    throw ConfigError("elbo: need 1 <= T_sub <= T_full");
  }
  double s = t_sub / t_full;
  if (scaling == KlScaling::PerStep && strategy == ssm::SamplingStrategy::IndependentPerStep) {
    s *= t_sub;
  }
  return s;
}

ElboGraph elbo(const Rollout& rollout, const ssm::ModelState& state, double t_full, int t_sub,
               double beta, KlScaling scaling) {
  if (beta < 0.0) throw ConfigError("elbo: beta must be non-negative");
  ad::Tape& tape = *state.pseudo_var.tape();
  ElboGraph g;
  g.beta = beta;
  g.scale = inducing_kl_scale(scaling, rollout.strategy, t_sub, t_full);
  g.likelihood = rollout.log_likelihood;
  g.kl_forward = gp::inducing_kl(state.forward);
  g.kl_backward = rollout.algorithm == Algorithm::CBFSSM && state.has_backward
                      ? gp::inducing_kl(state.backward)
                      : tape.constant(0.0);
  g.kl_recognition = rollout.recognition_kl;
  g.kl_conditioning = rollout.conditioning_kl;
  const ad::Var penalty = (g.kl_forward + g.kl_backward) * g.scale + g.kl_recognition +
                          g.kl_conditioning;
  g.total = g.likelihood - penalty * beta;
  return g;
}

}  // namespace gpssm::inference
