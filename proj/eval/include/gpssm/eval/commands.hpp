#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gpssm/data/dataset.hpp"
#include "gpssm/eval/config.hpp"
#include "gpssm/eval/model_io.hpp"
#include "gpssm/eval/records.hpp"
#include "gpssm/inference/elbo.hpp"

namespace gpssm::eval {

/// Command-line flags that override config values.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> algorithm;
  std::optional<double> k;
  std::optional<double> beta;
  std::optional<int> seqlen;
  std::optional<int> threads;
  std::optional<std::string> out;
};

void apply_overrides(ExperimentConfig& config, const Overrides& o);

/// Pooled test-set metrics of one model over every test trajectory.
struct TestMetrics {
  double rmse = 0.0;
  double rmse_raw = 0.0;
  double log_likelihood = 0.0;
  double log_likelihood_raw = 0.0;
  int steps = 0;
};

TestMetrics evaluate_on(const ssm::SSMModel& model, const std::vector<data::Trajectory>& normalized,
                        const data::NormalizationStats& stats, const EvalConfig& eval,
                        std::uint64_t seed);

/// Trains and evaluates one (config, seed). `dataset` is raw; the config must
/// have gone through resolve_dataset.
struct RunOutput {
  ResultRecord record;
  TimingRecord timing;
  SavedModel model;
  std::vector<inference::ELBOTerms> history;
};

RunOutput run_one(const ExperimentConfig& config, const data::Dataset& dataset,
                  std::uint64_t seed);

/// Creates <output_dir>/<name>/<timestamp>[-n]/ and writes config.json.
std::string make_run_dir(const ExperimentConfig& config);

struct CommandResult {
  std::string run_dir;
  std::vector<ResultRecord> records;
};

/// `repeats` seeds of the configured algorithm. Writes results.jsonl,
/// results.csv, timings.jsonl, one model file and one ELBO trace per seed.
CommandResult cmd_train(ExperimentConfig config);

/// Every (algorithm, length, seed) of the sweep section; also writes
/// sweep.csv.
CommandResult cmd_seqlen_sweep(ExperimentConfig config);

/// Aggregates result files into the RMSE table. Writes benchmark.csv and
/// benchmark.txt into `out_dir` when it is non-empty.
BenchmarkTable cmd_benchmark(const std::vector<std::string>& result_files,
                             const std::string& out_dir, bool use_raw);

/// Open-loop predictions for every sequence of `input_csv` (raw units,
/// columns named as in the model file). `horizon` counts rows from the
/// start, burn-in included; horizon == t' gives a header-only file.
void cmd_predict(const std::string& model_file, const std::string& input_csv, int horizon,
                 const std::string& out_csv, int samples, std::uint64_t seed);

/// Writes train.csv, test.csv and manifest.json for the configured simulator.
void cmd_simulate(ExperimentConfig config, const std::string& out_dir);

}  // namespace gpssm::eval
