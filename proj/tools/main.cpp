#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "gpssm/error.hpp"
#include "gpssm/eval/commands.hpp"

namespace eval = gpssm::eval;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumeric = 4 };

void add_overrides(CLI::App* cmd, eval::Overrides& o) {
  cmd->add_option("--seed", o.seed, "First seed (overrides train.seed)");
  cmd->add_option("--algorithm", o.algorithm, "PRSSM, VCDT or CBFSSM");
  cmd->add_option("--k", o.k, "Soft-conditioning factor k >= 1");
  cmd->add_option("--beta", o.beta, "KL weight beta >= 0");
  cmd->add_option("--seqlen", o.seqlen, "Training subsequence length");
  cmd->add_option("--threads", o.threads, "Worker threads for independent seeds");
  cmd->add_option("--out", o.out, "Output root directory");
}

eval::ExperimentConfig configure(const std::string& path, const eval::Overrides& o) {
  eval::ExperimentConfig config = eval::load_config(path);
  eval::apply_environment(config);
  eval::apply_overrides(config, o);
  return config;
}

void print_records(const eval::CommandResult& r) {
  for (const eval::ResultRecord& rec : r.records) {
    std::cout << rec.algorithm << " seqlen=" << rec.seqlen << " seed=" << rec.seed
              << " rmse=" << rec.rmse << " rmse_raw=" << rec.rmse_raw
              << " loglik=" << rec.log_likelihood << '\n';
  }
  std::cout << "results: " << r.run_dir << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process state-space models: training, evaluation and simulation"};
  app.require_subcommand(1);

  std::string config_path;
  eval::Overrides overrides;

  CLI::App* train = app.add_subcommand("train", "Train and evaluate one configuration");
  train->add_option("--config", config_path, "Experiment config (JSON)")->required();
  add_overrides(train, overrides);

  CLI::App* sweep = app.add_subcommand("seqlen-sweep", "Train over the sweep lengths and algorithms");
  sweep->add_option("--config", config_path, "Experiment config (JSON)")->required();
  add_overrides(sweep, overrides);

  std::vector<std::string> result_files;
  std::string bench_out;
  bool use_raw = false;
  CLI::App* bench = app.add_subcommand("benchmark", "Aggregate results into a mean (std) table");
  bench->add_option("results", result_files, "results.jsonl files")->required();
  bench->add_option("--out", bench_out, "Directory for benchmark.csv and benchmark.txt");
  bench->add_flag("--raw", use_raw, "Use RMSE in original units");

  std::string model_file;
  std::string input_csv;
  std::string predict_out = "predictions.csv";
  int horizon = 0;
  int samples = 100;
  std::uint64_t predict_seed = 0;
  CLI::App* predict = app.add_subcommand("predict", "Open-loop predictions with 95% bands");
  predict->add_option("--model", model_file, "Model file written by train")->required();
  predict->add_option("--input", input_csv, "CSV with the model's u and y columns")->required();
  predict->add_option("--horizon", horizon, "Rows to cover, burn-in included")->required();
  predict->add_option("--out", predict_out, "Output CSV");
  predict->add_option("--samples", samples, "Monte-Carlo samples")->check(CLI::PositiveNumber);
  predict->add_option("--seed", predict_seed, "Sampling seed");

  std::string sim_out;
  CLI::App* simulate = app.add_subcommand("simulate", "Write simulated train/test CSVs and a manifest");
  simulate->add_option("--config", config_path, "Config with a dataset.simulator section")->required();
  simulate->add_option("--seed", overrides.seed, "Dataset seed");
  simulate->add_option("--out", sim_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (train->parsed()) {
      print_records(eval::cmd_train(configure(config_path, overrides)));
    } else if (sweep->parsed()) {
      const eval::CommandResult r = eval::cmd_seqlen_sweep(configure(config_path, overrides));
      print_records(r);
      std::cout << "sweep: " << (std::filesystem::path(r.run_dir) / "sweep.csv").string() << '\n';
    } else if (bench->parsed()) {
      const eval::BenchmarkTable t = eval::cmd_benchmark(result_files, bench_out, use_raw);
      std::cout << eval::render_text(t);
      for (const auto& [d, a] : t.missing) {
        std::cerr << "missing cell: " << d << " / " << a << '\n';
      }
    } else if (predict->parsed()) {
      eval::cmd_predict(model_file, input_csv, horizon, predict_out, samples, predict_seed);
    } else if (simulate->parsed()) {
      eval::ExperimentConfig config = eval::load_config(config_path);
      if (overrides.seed) config.dataset.seed = *overrides.seed;
      eval::cmd_simulate(config, sim_out);
    }
  } catch (const gpssm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const gpssm::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const gpssm::ShapeError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const gpssm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
