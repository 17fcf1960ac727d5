#pragma once

#include "gpssm/ad/tape.hpp"
#include "gpssm/inference/rollout.hpp"
#include "gpssm/ssm/model.hpp"

namespace gpssm::inference {

/// How the inducing KL is weighted against a minibatch of subsequences.
enum class KlScaling {
  /// Counted once per trajectory, scaled by the batch coverage T_sub / T_full.
  PerTrajectory,
  /// Additionally multiplied by T_sub when q(u) is marginalized per step.
  PerStep,
};

/// Numeric snapshot of one objective evaluation (per row averages).
struct ELBOTerms {
  double likelihood = 0.0;
  double kl_forward = 0.0;   // KL(q(u_f) || p(u_f)), unscaled
  double kl_backward = 0.0;  // KL(q(u_b) || p(u_b)), unscaled; CBFSSM only
  double kl_recognition = 0.0;
  double kl_conditioning = 0.0;
  double beta = 1.0;
  double scale = 1.0;  // s_u applied to the inducing KLs
  double total = 0.0;
};

/// Tape nodes of the objective. `total` is the value to maximize.
struct ElboGraph {
  ad::Var likelihood;
  ad::Var kl_forward;
  ad::Var kl_backward;
  ad::Var kl_recognition;
  ad::Var kl_conditioning;
  ad::Var total;
  double beta = 1.0;
  double scale = 1.0;

  [[nodiscard]] ELBOTerms terms() const;
};

/// s_u for a subsequence of length `t_sub` drawn from data of `t_full` steps.
double inducing_kl_scale(KlScaling scaling, ssm::SamplingStrategy strategy, int t_sub,
                         double t_full);

/// total = likelihood - beta * (s_u KL_f + s_u KL_b + KL_x1 + KL_cond). The
/// backward inducing KL enters only for CBFSSM.
ElboGraph elbo(const Rollout& rollout, const ssm::ModelState& state, double t_full, int t_sub,
               double beta, KlScaling scaling = KlScaling::PerTrajectory);

}  // namespace gpssm::inference
