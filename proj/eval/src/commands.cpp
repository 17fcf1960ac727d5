#include "gpssm/eval/commands.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "gpssm/data/io.hpp"
#include "gpssm/error.hpp"
#include "gpssm/inference/predict.hpp"
#include "gpssm/inference/train.hpp"
#include "json_util.hpp"

namespace gpssm::eval {

namespace fs = std::filesystem;

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string run_tag(const std::string& algorithm, int seqlen, std::uint64_t seed) {
  return algorithm + "_L" + std::to_string(seqlen) + "_s" + std::to_string(seed);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << text;
  if (!out) throw DataError(path + ": write failed");
}

void write_trace(const std::string& path, const std::vector<inference::ELBOTerms>& history) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << "iteration,total,likelihood,kl_forward,kl_backward,kl_recognition,kl_conditioning\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const inference::ELBOTerms& t = history[i];
    out << i << ',' << shortest(t.total) << ',' << shortest(t.likelihood) << ','
        << shortest(t.kl_forward) << ',' << shortest(t.kl_backward) << ','
        << shortest(t.kl_recognition) << ',' << shortest(t.kl_conditioning) << '\n';
  }
}

std::vector<std::string> default_names(const std::string& prefix, int n) {
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

/// Column names of a resolved dataset: from the manifest when there is one.
std::pair<std::vector<std::string>, std::vector<std::string>> column_names(
    const ExperimentConfig& config) {
  if (!config.dataset.manifest.empty()) {
    const data::Manifest m = data::read_manifest(config.dataset.manifest);
    return {m.spec.u_columns, m.spec.y_columns};
  }
  if (config.dataset.simulator == "dubins") {
    std::vector<std::string> y{"px", "py"};
    if (config.dataset.dubins.observe_heading) y.push_back("heading");
    return {{"speed", "curvature"}, y};
  }
  return {default_names("u", config.model.d_u), default_names("y", config.model.d_y)};
}

struct Job {
  ExperimentConfig config;
  std::uint64_t seed = 0;
};

/// Runs jobs on up to `threads` workers. Outputs keep the job order, so the
/// files written afterwards do not depend on scheduling.
std::vector<RunOutput> run_jobs(const std::vector<Job>& jobs, const data::Dataset& dataset,
                                int threads) {
  std::vector<RunOutput> outputs(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i = 0;
      {
        const std::lock_guard<std::mutex> lock(mu);
        if (next == jobs.size()) return;
        i = next++;
      }
      try {
        outputs[i] = run_one(jobs[i].config, dataset, jobs[i].seed);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return outputs;
}

CommandResult persist(const ExperimentConfig& config, std::vector<RunOutput> outputs) {
  CommandResult result;
  result.run_dir = make_run_dir(config);
  std::vector<TimingRecord> timings;
  for (RunOutput& o : outputs) {
    save_model((fs::path(result.run_dir) / o.record.model_file).string(), o.model);
    write_trace((fs::path(result.run_dir) / o.record.elbo_trace).string(), o.history);
    result.records.push_back(o.record);
    timings.push_back(o.timing);
  }
  const fs::path dir(result.run_dir);
  append_jsonl((dir / "results.jsonl").string(), result.records);
  append_jsonl((dir / "timings.jsonl").string(), timings);
  write_records_csv((dir / "results.csv").string(), result.records);
  return result;
}

}  // namespace

void apply_overrides(ExperimentConfig& config, const Overrides& o) {
  if (o.seed) config.train.seed = *o.seed;
  if (o.algorithm) {
    config.train.algorithm = inference::algorithm_from_string(*o.algorithm);
    config.sweep.algorithms = {config.train.algorithm};
  }
  if (o.k) config.train.k_soft = *o.k;
  if (o.beta) config.train.beta = *o.beta;
  if (o.seqlen) {
    config.train.seqlen = *o.seqlen;
    config.sweep.lengths = {*o.seqlen};
  }
  if (o.threads) config.threads = *o.threads;
  if (o.out) config.output_dir = *o.out;
  config.validate();
}

TestMetrics evaluate_on(const ssm::SSMModel& model, const std::vector<data::Trajectory>& test,
                        const data::NormalizationStats& stats, const EvalConfig& eval,
                        std::uint64_t seed) {
  if (test.empty()) throw DataError("evaluate: the dataset has no test trajectories");
  const int lag = model.lag();
  double sq = 0.0;
  double sq_raw = 0.0;
  double ll = 0.0;
  double entries = 0.0;
  int steps = 0;
  const double log_std_sum = stats.y_std.array().log().sum();
  for (std::size_t i = 0; i < test.size(); ++i) {
    const data::Trajectory& tr = test[i];
    const int horizon = eval.horizon > 0 ? std::min(eval.horizon, tr.length()) : tr.length();
    if (horizon <= lag) continue;
    inference::PredictOptions po;
    po.samples = eval.samples;
    po.strategy = eval.strategy;
    po.seed = seed * 7919 + i;
    const inference::Prediction p = inference::predict_open_loop(model, tr.y, tr.u, horizon, po);
    const Eigen::MatrixXd truth = tr.y.middleRows(lag, horizon - lag);
    const inference::Evaluation e = inference::evaluate(p, truth);
    const double n_steps = static_cast<double>(truth.rows());
    sq += e.rmse * e.rmse * static_cast<double>(truth.size());
    ll += e.log_likelihood * n_steps;
    entries += static_cast<double>(truth.size());
    steps += static_cast<int>(truth.rows());
    const Eigen::MatrixXd err_raw = data::denormalize_mean(p.mean, stats) -
                                    data::denormalize_mean(truth, stats);
    sq_raw += err_raw.squaredNorm();
  }
  if (steps == 0) throw DataError("evaluate: every test trajectory is shorter than the lag");
  TestMetrics m;
  m.steps = steps;
  m.rmse = std::sqrt(sq / entries);
  m.rmse_raw = std::sqrt(sq_raw / entries);
  m.log_likelihood = ll / steps;
  // Scaling y by its std shifts each Gaussian log-density by -log(std).
  m.log_likelihood_raw = m.log_likelihood - log_std_sum;
  return m;
}

RunOutput run_one(const ExperimentConfig& config, const data::Dataset& dataset,
                  std::uint64_t seed) {
  const data::Dataset norm = data::normalize(dataset);
  inference::TrainConfig tc = config.train;
  tc.seed = seed;
  const ssm::SSMModel initial = inference::initialize_model(norm.train, config.model, seed);
  const auto start = std::chrono::steady_clock::now();
  inference::TrainResult trained = inference::train(initial, norm.train, tc);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const TestMetrics metrics = evaluate_on(trained.model, norm.test, norm.stats, config.eval, seed);

  RunOutput out;
  const std::string alg = inference::to_string(tc.algorithm);
  const std::string tag = run_tag(alg, tc.seqlen, seed);
  ResultRecord& r = out.record;
  r.experiment = config.name;
  r.algorithm = alg;
  r.dataset = dataset.meta.name;
  r.seed = seed;
  r.seqlen = tc.seqlen;
  r.k = tc.algorithm == inference::Algorithm::VCDT ? tc.k_vcdt : tc.k_soft;
  r.beta = tc.beta;
  r.iterations = tc.iterations;
  r.rmse = metrics.rmse;
  r.rmse_raw = metrics.rmse_raw;
  r.log_likelihood = metrics.log_likelihood;
  r.log_likelihood_raw = metrics.log_likelihood_raw;
  r.final_elbo = trained.history.empty() ? 0.0 : trained.history.back().total;
  r.skipped_steps = trained.skipped_steps;
  r.elbo_trace = "elbo_" + tag + ".csv";
  r.model_file = "model_" + tag + ".json";
  out.timing = {alg, seed, tc.seqlen, seconds};
  out.model.model = std::move(trained.model);
  out.model.stats = dataset.stats;
  std::tie(out.model.u_columns, out.model.y_columns) = column_names(config);
  out.model.algorithm = alg;
  out.model.dataset = dataset.meta.name;
  out.history = std::move(trained.history);
  return out;
}

std::string make_run_dir(const ExperimentConfig& config) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  const fs::path base = fs::path(config.output_dir) / config.name;
  fs::path dir = base / stamp;
  for (int n = 1; fs::exists(dir); ++n) dir = base / (std::string(stamp) + "-" + std::to_string(n));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(dir.string() + ": cannot create run directory: " + ec.message());
  write_text((dir / "config.json").string(), dump_config(config) + "\n");
  return dir.string();
}

CommandResult cmd_train(ExperimentConfig config) {
  const data::Dataset dataset = resolve_dataset(config);
  std::vector<Job> jobs;
  for (int i = 0; i < config.repeats; ++i) jobs.push_back({config, config.train.seed + i});
  return persist(config, run_jobs(jobs, dataset, config.threads));
}

CommandResult cmd_seqlen_sweep(ExperimentConfig config) {
  const data::Dataset dataset = resolve_dataset(config);
  int shortest_traj = dataset.train.front().length();
  for (const data::Trajectory& t : dataset.train) shortest_traj = std::min(shortest_traj, t.length());
  std::vector<Job> jobs;
  for (inference::Algorithm a : config.sweep.algorithms) {
    for (int length : config.sweep.lengths) {
      if (length > shortest_traj) {
        throw ConfigError("seqlen-sweep: length " + std::to_string(length) +
                          " exceeds the shortest training trajectory (" +
                          std::to_string(shortest_traj) + ")");
      }
      ExperimentConfig c = config;
      c.train.algorithm = a;
      c.train.strategy.reset();
      c.train.seqlen = length;
      for (int i = 0; i < config.repeats; ++i) jobs.push_back({c, config.train.seed + i});
    }
  }
  CommandResult result = persist(config, run_jobs(jobs, dataset, config.threads));
  write_text((fs::path(result.run_dir) / "sweep.csv").string(),
             render_sweep_csv(sweep_rows(result.records)));
  return result;
}

BenchmarkTable cmd_benchmark(const std::vector<std::string>& files, const std::string& out_dir,
                             bool use_raw) {
  if (files.empty()) throw ConfigError("benchmark: no result files given");
  std::vector<ResultRecord> records;
  for (const std::string& f : files) {
    std::vector<ResultRecord> r = read_jsonl(f);
    records.insert(records.end(), r.begin(), r.end());
  }
  if (records.empty()) throw DataError("benchmark: the result files contain no records");
  BenchmarkTable table = aggregate(records, use_raw);
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError(out_dir + ": cannot create directory: " + ec.message());
    write_text((fs::path(out_dir) / "benchmark.csv").string(), render_csv(table));
    write_text((fs::path(out_dir) / "benchmark.txt").string(), render_text(table));
  }
  return table;
}

void cmd_predict(const std::string& model_file, const std::string& input_csv, int horizon,
                 const std::string& out_csv, int samples, std::uint64_t seed) {
  const SavedModel saved = load_model(model_file);
  const int lag = saved.model.lag();
  if (horizon < lag) {
    throw DataError("predict: horizon " + std::to_string(horizon) + " is shorter than the lag " +
                    std::to_string(lag));
  }
  data::CsvSpec spec;
  spec.u_columns = saved.u_columns;
  spec.y_columns = saved.y_columns;
  const std::vector<data::Trajectory> raw = data::read_trajectories(input_csv, spec);

  std::ofstream out(out_csv);
  if (!out) throw DataError(out_csv + ": cannot open for writing");
  out << "seq,t";
  for (const std::string& c : saved.y_columns) out << ',' << c << "_mean," << c << "_lower," << c << "_upper";
  out << '\n';
  if (horizon == lag) return;
  for (std::size_t s = 0; s < raw.size(); ++s) {
    const data::Trajectory tr = data::normalize(raw[s], saved.stats);
    if (saved.model.d_u > 0 && tr.length() < horizon - 1) {
      throw DataError("predict: sequence " + std::to_string(s + 1) +
                      " has fewer control rows than the horizon needs");
    }
    inference::PredictOptions po;
    po.samples = samples;
    po.seed = seed;
    const inference::Prediction p = inference::predict_open_loop(saved.model, tr.y, tr.u, horizon, po);
    const Eigen::MatrixXd mean = data::denormalize_mean(p.mean, saved.stats);
    const Eigen::MatrixXd sd = data::denormalize_variance(p.var, saved.stats).cwiseSqrt();
    for (Eigen::Index r = 0; r < mean.rows(); ++r) {
      out << (s + 1) << ',' << (p.first_step + r);
      for (Eigen::Index j = 0; j < mean.cols(); ++j) {
        out << ',' << shortest(mean(r, j)) << ',' << shortest(mean(r, j) - 1.96 * sd(r, j)) << ','
            << shortest(mean(r, j) + 1.96 * sd(r, j));
      }
      out << '\n';
    }
  }
  if (!out) throw DataError(out_csv + ": write failed");
}

void cmd_simulate(ExperimentConfig config, const std::string& out_dir) {
  if (config.dataset.simulator.empty()) throw ConfigError("simulate: config has no dataset.simulator");
  const data::Dataset d = resolve_dataset(config);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError(out_dir + ": cannot create directory: " + ec.message());
  data::CsvSpec spec;
  std::tie(spec.u_columns, spec.y_columns) = column_names(config);
  spec.name = d.meta.name;
  spec.lag = d.meta.lag;
  const fs::path dir(out_dir);
  data::save_csv((dir / "train.csv").string(), d.train, spec);
  detail::json manifest{{"name", spec.name},
                        {"train_csv", "train.csv"},
                        {"u_columns", spec.u_columns},
                        {"y_columns", spec.y_columns},
                        {"lag", spec.lag},
                        {"source", "gpssm simulate, dataset seed " +
                                       std::to_string(config.dataset.seed)}};
  if (!d.test.empty()) {
    data::save_csv((dir / "test.csv").string(), d.test, spec);
    manifest["test_csv"] = "test.csv";
  }
  write_text((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

}  // namespace gpssm::eval
