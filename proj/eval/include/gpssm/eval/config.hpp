#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gpssm/data/dataset.hpp"
#include "gpssm/data/simulate.hpp"
#include "gpssm/inference/predict.hpp"
#include "gpssm/inference/train.hpp"
#include "gpssm/ssm/model.hpp"

namespace gpssm::eval {

/// Where the trajectories come from: a manifest file or one of the built-in
/// simulators ("dubins", "linear").
struct DatasetConfig {
  std::string manifest;
  std::string simulator;
  int length = 300;
  int n_train = 10;
  int n_test = 5;
  std::uint64_t seed = 1;
  data::DubinsParams dubins;
  data::LinearSystem linear;
  /// Recognition lag t'; 0 keeps the dataset's own value.
  int lag = 0;
};

struct EvalConfig {
  int samples = 100;
  ssm::SamplingStrategy strategy = ssm::SamplingStrategy::IndependentPerStep;
  /// Steps predicted per test trajectory; 0 means the whole trajectory.
  int horizon = 0;
};

struct SweepConfig {
  std::vector<int> lengths{50, 150, 300};
  std::vector<inference::Algorithm> algorithms{inference::Algorithm::PRSSM,
                                               inference::Algorithm::CBFSSM};
};

/// Everything a run needs. Sections: dataset, model, train, eval, sweep,
/// output; plus top-level name and repeats.
struct ExperimentConfig {
  ExperimentConfig();

  std::string name = "experiment";
  DatasetConfig dataset;
  /// Latent dimension; 0 means d_x = d_y. The rest of `model` is filled in
  /// from the dataset by resolve_dataset.
  int state_dim = 0;
  ssm::ModelOptions model;
  inference::TrainConfig train;
  EvalConfig eval;
  SweepConfig sweep;
  std::string output_dir = "outputs";
  /// Number of seeds: train.seed, train.seed + 1, ...
  int repeats = 1;
  /// Worker threads for independent seeds.
  int threads = 1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Parses a JSON config. Every key is optional; unknown keys throw
/// ConfigError naming the dotted path.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
/// Canonical JSON of a config (all fields, defaults filled in).
std::string dump_config(const ExperimentConfig& config);

/// Applies GPSSM_OUTPUT_DIR and GPSSM_THREADS when set.
void apply_environment(ExperimentConfig& config);

/// Loads or simulates the raw dataset and fills in the dimensions and lag of
/// the model and train sections. Throws DataError when the data cannot be
/// read.
data::Dataset resolve_dataset(ExperimentConfig& config);

}  // namespace gpssm::eval
