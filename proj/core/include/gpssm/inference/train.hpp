#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gpssm/ad/binder.hpp"
#include "gpssm/ad/tape.hpp"
#include "gpssm/data/dataset.hpp"
#include "gpssm/inference/elbo.hpp"
#include "gpssm/inference/rollout.hpp"
#include "gpssm/ssm/model.hpp"

namespace gpssm::inference {

struct TrainConfig {
  Algorithm algorithm = Algorithm::CBFSSM;
  /// Defaults to `default_strategy(algorithm)`.
  std::optional<ssm::SamplingStrategy> strategy;
  double k_soft = 50.0;
  double k_vcdt = 1.0;
  double beta = 1.0;
  double learning_rate = 1e-3;
  /// Learning rate at the last iteration, reached by geometric decay from
  /// `learning_rate`. 0 keeps the rate constant.
  double final_learning_rate = 0.0;
  int iterations = 1000;
  int samples = 8;     // S, rollouts per window
  int seqlen = 50;     // T_sub
  int batch_size = 4;  // windows per iteration
  int lag = 5;         // t'
  std::uint64_t seed = 0;
  KlScaling kl_scaling = KlScaling::PerTrajectory;
  double clip_norm = 100.0;

  [[nodiscard]] ssm::SamplingStrategy resolved_strategy() const;
  /// Throws ConfigError on non-positive sizes, k_soft < 1 or beta < 0.
  void validate() const;
};

struct TrainResult {
  ssm::SSMModel model;
  std::vector<ELBOTerms> history;  // one entry per applied step
  int skipped_steps = 0;
  double final_learning_rate = 0.0;
};

/// Model with inducing inputs drawn from the training data: observed state
/// components take measured y, hidden ones N(0, 1), controls the measured u.
ssm::SSMModel initialize_model(const std::vector<data::Trajectory>& train,
                               const ssm::ModelOptions& options, std::uint64_t seed);

/// One objective on its own tape. Parameters of `model` are the tape leaves,
/// in binder slot order.
struct ObjectiveGraph {
  std::unique_ptr<ad::Tape> tape;
  std::unique_ptr<ad::Binder> binder;
  ssm::ModelState state;
  std::optional<PseudoStates> pseudo;
  Rollout rollout;
  ElboGraph elbo;
};

/// `model` must outlive the returned graph.
ObjectiveGraph build_objective(const ssm::SSMModel& model, const TrainConfig& config,
                               const RolloutBatch& batch, const RolloutNoise& noise,
                               double t_full, bool checked = false);

/// Doubly stochastic maximization of the ELBO over subsequence minibatches of
/// `train` (already normalized). Deterministic for a given config.
/// A non-finite objective or gradient skips the step and halves the learning
/// rate; a second one throws NumericError naming the offending term.
TrainResult train(ssm::SSMModel model, const std::vector<data::Trajectory>& train,
                  const TrainConfig& config);

}  // namespace gpssm::inference
