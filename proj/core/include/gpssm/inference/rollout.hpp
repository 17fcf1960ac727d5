#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "gpssm/ad/tape.hpp"
#include "gpssm/data/subsequence.hpp"
#include "gpssm/ssm/model.hpp"
#include "gpssm/ssm/ops.hpp"

namespace gpssm::inference {

enum class Algorithm { PRSSM, VCDT, CBFSSM };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);
/// PRSSM and CBFSSM marginalize q(u) per step; VCDT draws one function per
/// trajectory.
ssm::SamplingStrategy default_strategy(Algorithm a);

/// Windows replicated `samples` times: row r of every matrix belongs to
/// window r / samples, so N = windows * samples.
struct RolloutBatch {
  int windows = 0;
  int samples = 1;
  std::vector<Eigen::MatrixXd> y;  // T entries, N x d_y
  std::vector<Eigen::MatrixXd> u;  // T entries, N x d_u
  Eigen::MatrixXd recognition_input;  // N x lag * (d_y + d_u)

  [[nodiscard]] int length() const { return static_cast<int>(y.size()); }
  [[nodiscard]] int rows() const { return windows * samples; }
};

RolloutBatch make_batch(const std::vector<data::Window>& windows, int samples, int lag);

/// Standard-normal draws for one rollout, from independent streams so that
/// algorithms sharing a seed see the same forward noise.
struct RolloutNoise {
  Eigen::MatrixXd initial;                  // N x d_x
  std::vector<Eigen::MatrixXd> transition;  // T - 1 entries, N x d_x
  std::vector<Eigen::MatrixXd> inducing;    // d_x entries, M x N
  Eigen::MatrixXd backward_initial;         // N x (d_x - d_y)
  std::vector<Eigen::MatrixXd> backward;    // T - 1 entries, N x (d_x - d_y)
};

RolloutNoise draw_noise(const ssm::SSMModel& model, int length, int rows, std::uint64_t seed);

/// Pseudo-states x~_{1:T} from the backward pass. `var` is the variance used
/// when x~_t serves as a pseudo-observation: Sigma~_x on observed components,
/// backward predictive variance + Sigma~_x on hidden ones.
struct PseudoStates {
  std::vector<ad::Var> value;  // T entries, N x d_x
  std::vector<ad::Var> var;    // T entries, N x d_x
};

/// Runs the backward model from t = T down to 1. Observed components equal
/// y_t exactly; hidden components are reparameterized samples.
PseudoStates backward_pass(const ssm::ModelState& state, const RolloutBatch& batch,
                           const RolloutNoise& noise);

struct RolloutOptions {
  Algorithm algorithm = Algorithm::CBFSSM;
  ssm::SamplingStrategy strategy = ssm::SamplingStrategy::IndependentPerStep;
  double k_soft = 50.0;  // CBFSSM conditioning factor
  double k_vcdt = 1.0;   // VCDT conditioning factor
};

struct Rollout {
  Algorithm algorithm = Algorithm::PRSSM;
  ssm::SamplingStrategy strategy = ssm::SamplingStrategy::IndependentPerStep;
  std::vector<ad::Var> states;                  // T entries, N x d_x
  ssm::DiagGaussian initial;                    // q(x_1)
  std::vector<ssm::DiagGaussian> priors;        // T - 1 entries, p(x_{t+1} | f, x_t)
  std::vector<ssm::DiagGaussian> posteriors;    // T - 1 entries, q(x_{t+1} | ...)
  std::vector<ssm::DiagGaussian> observations;  // T entries, predictive y per row
  /// Averages over rows of the per-trajectory sums.
  ad::Var log_likelihood;   // sum_t E_q[log p(y_t | x_t)]
  ad::Var conditioning_kl;  // sum_t KL(q(x_{t+1} | .) || p(x_{t+1} | f_t, x_t))
  ad::Var recognition_kl;   // KL(q(x_1 | y) || p(x_1))
};

/// Forward rollout. CBFSSM requires `pseudo` from `backward_pass`; other
/// algorithms ignore it.
Rollout forward_pass(const ssm::ModelState& state, const RolloutOptions& options,
                     const RolloutBatch& batch, const RolloutNoise& noise,
                     const PseudoStates* pseudo = nullptr);

}  // namespace gpssm::inference
