#include "gpssm/eval/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gpssm/data/io.hpp"
#include "gpssm/error.hpp"
#include "json_util.hpp"

namespace gpssm::eval {

namespace {

using detail::json;
using detail::Section;

std::string to_string(inference::KlScaling s) {
  return s == inference::KlScaling::PerStep ? "per_step" : "per_trajectory";
}

inference::KlScaling kl_scaling_from_string(const std::string& s) {
  if (s == "per_trajectory") return inference::KlScaling::PerTrajectory;
  if (s == "per_step") return inference::KlScaling::PerStep;
  throw ConfigError("unknown kl_scaling '" + s + "' (expected per_trajectory or per_step)");
}

data::LinearSystem default_linear() {
  data::LinearSystem s;
  s.A = Eigen::MatrixXd::Constant(1, 1, 0.9);
  s.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
  s.C = Eigen::MatrixXd::Identity(1, 1);
  s.Q = Eigen::MatrixXd::Constant(1, 1, 0.01);
  s.R = Eigen::MatrixXd::Constant(1, 1, 0.01);
  return s;
}

void read_dubins(Section s, data::DubinsParams& p) {
  s.read("dt", p.dt);
  if (const json* v = s.raw("process_noise_std")) {
    const Eigen::RowVectorXd r = detail::row_from_json(*v, s.where("process_noise_std"));
    if (r.size() != 3) throw ConfigError(s.where("process_noise_std") + ": need 3 entries");
    p.process_noise_std = r.transpose();
  }
  s.read("obs_noise_std", p.obs_noise_std);
  s.read("v_min", p.v_min);
  s.read("v_max", p.v_max);
  s.read("kappa_min", p.kappa_min);
  s.read("kappa_max", p.kappa_max);
  s.read("control_reversion", p.control_reversion);
  s.read("speed_volatility", p.speed_volatility);
  s.read("curvature_volatility", p.curvature_volatility);
  s.read("heading_min", p.heading_min);
  s.read("heading_max", p.heading_max);
  s.read("observe_heading", p.observe_heading);
  s.finish();
}

void read_linear(Section s, data::LinearSystem& sys) {
  auto mat = [&](const char* key, Eigen::MatrixXd& out, Eigen::Index cols) {
    if (const json* v = s.raw(key)) out = detail::matrix_from_json(*v, s.where(key), cols);
  };
  mat("A", sys.A, 0);
  mat("B", sys.B, 0);
  mat("C", sys.C, 0);
  mat("Q", sys.Q, 0);
  mat("R", sys.R, 0);
  mat("P0", sys.P0, 0);
  if (const json* v = s.raw("x0")) sys.x0 = detail::row_from_json(*v, s.where("x0")).transpose();
  s.read("control_std", sys.control_std);
  s.finish();
}

void read_model(Section s, ExperimentConfig& c) {
  ssm::ModelOptions& m = c.model;
  s.read("d_x", c.state_dim);
  s.read("num_inducing", m.num_inducing);
  std::string kind;
  if (s.has("forward_mean")) {
    s.read("forward_mean", kind);
    m.forward_mean = detail::mean_kind_from_string(kind);
  }
  if (s.has("backward_mean")) {
    s.read("backward_mean", kind);
    m.backward_mean = detail::mean_kind_from_string(kind);
  }
  s.read("kernel_variance", m.kernel_variance);
  s.read("kernel_lengthscale", m.kernel_lengthscale);
  if (const json* v = s.raw("kernel_lengthscales")) {
    m.kernel_lengthscales = detail::row_from_json(*v, s.where("kernel_lengthscales"));
  }
  s.read("process_noise", m.process_noise);
  s.read("obs_noise", m.obs_noise);
  s.read("pseudo_noise", m.pseudo_noise);
  s.read("q_scale", m.q_scale);
  s.read("recognition_variance", m.recognition_variance);
  s.read("prior_x1_var", m.prior_x1_var);
  s.finish();
}

void read_train(Section s, inference::TrainConfig& t) {
  std::string text;
  if (s.has("algorithm")) {
    s.read("algorithm", text);
    t.algorithm = inference::algorithm_from_string(text);
  }
  if (s.has("strategy")) {
    s.read("strategy", text);
    t.strategy = ssm::sampling_strategy_from_string(text);
  }
  s.read("k", t.k_soft);
  s.read("k_vcdt", t.k_vcdt);
  s.read("beta", t.beta);
  s.read("learning_rate", t.learning_rate);
  s.read("final_learning_rate", t.final_learning_rate);
  s.read("iterations", t.iterations);
  s.read("samples", t.samples);
  s.read("seqlen", t.seqlen);
  s.read("batch_size", t.batch_size);
  s.read("seed", t.seed);
  if (s.has("kl_scaling")) {
    s.read("kl_scaling", text);
    t.kl_scaling = kl_scaling_from_string(text);
  }
  s.read("clip_norm", t.clip_norm);
  s.finish();
}

json linear_json(const data::LinearSystem& s) {
  json j;
  j["A"] = detail::to_json(s.A);
  j["B"] = detail::to_json(s.B);
  j["C"] = detail::to_json(s.C);
  j["Q"] = detail::to_json(s.Q);
  j["R"] = detail::to_json(s.R);
  j["P0"] = detail::to_json(s.P0);
  j["x0"] = detail::to_json_row(s.x0.transpose());
  j["control_std"] = s.control_std;
  return j;
}

json dubins_json(const data::DubinsParams& p) {
  return {{"dt", p.dt},
          {"process_noise_std", detail::to_json_row(p.process_noise_std.transpose())},
          {"obs_noise_std", p.obs_noise_std},
          {"v_min", p.v_min},
          {"v_max", p.v_max},
          {"kappa_min", p.kappa_min},
          {"kappa_max", p.kappa_max},
          {"control_reversion", p.control_reversion},
          {"speed_volatility", p.speed_volatility},
          {"curvature_volatility", p.curvature_volatility},
          {"heading_min", p.heading_min},
          {"heading_max", p.heading_max},
          {"observe_heading", p.observe_heading}};
}

}  // namespace

ExperimentConfig::ExperimentConfig() { dataset.linear = default_linear(); }

void ExperimentConfig::validate() const {
  if (name.empty() || name.find('/') != std::string::npos) {
    throw ConfigError("config: name must be non-empty and contain no '/'");
  }
  if (repeats < 1) throw ConfigError("config: repeats must be >= 1");
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
  if (dataset.manifest.empty() == dataset.simulator.empty()) {
    throw ConfigError("config: dataset needs exactly one of 'manifest' or 'simulator'");
  }
  if (!dataset.simulator.empty() && dataset.simulator != "dubins" && dataset.simulator != "linear") {
    throw ConfigError("config: unknown simulator '" + dataset.simulator + "' (dubins or linear)");
  }
  if (dataset.length < 2 || dataset.n_train < 1 || dataset.n_test < 0 || dataset.lag < 0) {
    throw ConfigError("config: dataset sizes out of range");
  }
  if (state_dim < 0) throw ConfigError("config: model.d_x must be >= 0 (0 means d_y)");
  if (eval.samples < 1 || eval.horizon < 0) throw ConfigError("config: eval settings out of range");
  if (sweep.lengths.empty() || sweep.algorithms.empty()) {
    throw ConfigError("config: sweep needs lengths and algorithms");
  }
  for (int l : sweep.lengths) {
    if (l < 2) throw ConfigError("config: sweep lengths must be >= 2");
  }
  inference::TrainConfig t = train;
  t.lag = std::max(1, t.lag);
  t.validate();
  dataset.dubins.validate();
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section root(j, "");
  root.read("name", c.name);
  root.read("repeats", c.repeats);
  root.read("threads", c.threads);
  root.read("output_dir", c.output_dir);
  if (root.has("dataset")) {
    Section d = root.child("dataset");
    d.read("manifest", c.dataset.manifest);
    d.read("simulator", c.dataset.simulator);
    d.read("length", c.dataset.length);
    d.read("n_train", c.dataset.n_train);
    d.read("n_test", c.dataset.n_test);
    d.read("seed", c.dataset.seed);
    d.read("lag", c.dataset.lag);
    if (d.has("dubins")) read_dubins(d.child("dubins"), c.dataset.dubins);
    if (d.has("linear")) read_linear(d.child("linear"), c.dataset.linear);
    d.finish();
  }
  if (root.has("model")) read_model(root.child("model"), c);
  if (root.has("train")) read_train(root.child("train"), c.train);
  if (root.has("eval")) {
    Section e = root.child("eval");
    e.read("samples", c.eval.samples);
    e.read("horizon", c.eval.horizon);
    if (e.has("strategy")) {
      std::string s;
      e.read("strategy", s);
      c.eval.strategy = ssm::sampling_strategy_from_string(s);
    }
    e.finish();
  }
  if (root.has("sweep")) {
    Section s = root.child("sweep");
    s.read("lengths", c.sweep.lengths);
    if (s.has("algorithms")) {
      std::vector<std::string> names;
      s.read("algorithms", names);
      c.sweep.algorithms.clear();
      for (const std::string& n : names) c.sweep.algorithms.push_back(inference::algorithm_from_string(n));
    }
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string dump_config(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["repeats"] = c.repeats;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  json d;
  if (!c.dataset.manifest.empty()) d["manifest"] = c.dataset.manifest;
  if (!c.dataset.simulator.empty()) d["simulator"] = c.dataset.simulator;
  d["length"] = c.dataset.length;
  d["n_train"] = c.dataset.n_train;
  d["n_test"] = c.dataset.n_test;
  d["seed"] = c.dataset.seed;
  d["lag"] = c.dataset.lag;
  d["dubins"] = dubins_json(c.dataset.dubins);
  d["linear"] = linear_json(c.dataset.linear);
  j["dataset"] = d;
  const ssm::ModelOptions& m = c.model;
  j["model"] = {{"d_x", c.state_dim},
                {"num_inducing", m.num_inducing},
                {"forward_mean", detail::to_string(m.forward_mean)},
                {"backward_mean", detail::to_string(m.backward_mean)},
                {"kernel_variance", m.kernel_variance},
                {"kernel_lengthscale", m.kernel_lengthscale},
                {"kernel_lengthscales", detail::to_json_row(m.kernel_lengthscales)},
                {"process_noise", m.process_noise},
                {"obs_noise", m.obs_noise},
                {"pseudo_noise", m.pseudo_noise},
                {"q_scale", m.q_scale},
                {"recognition_variance", m.recognition_variance},
                {"prior_x1_var", m.prior_x1_var}};
  const inference::TrainConfig& t = c.train;
  j["train"] = {{"algorithm", inference::to_string(t.algorithm)},
                {"strategy", ssm::to_string(t.resolved_strategy())},
                {"k", t.k_soft},
                {"k_vcdt", t.k_vcdt},
                {"beta", t.beta},
                {"learning_rate", t.learning_rate},
                {"final_learning_rate", t.final_learning_rate},
                {"iterations", t.iterations},
                {"samples", t.samples},
                {"seqlen", t.seqlen},
                {"batch_size", t.batch_size},
                {"seed", t.seed},
                {"kl_scaling", to_string(t.kl_scaling)},
                {"clip_norm", t.clip_norm}};
  j["eval"] = {{"samples", c.eval.samples},
               {"strategy", ssm::to_string(c.eval.strategy)},
               {"horizon", c.eval.horizon}};
  std::vector<std::string> algs;
  for (inference::Algorithm a : c.sweep.algorithms) algs.push_back(inference::to_string(a));
  j["sweep"] = {{"lengths", c.sweep.lengths}, {"algorithms", algs}};
  return j.dump(2);
}

void apply_environment(ExperimentConfig& config) {
  if (const char* dir = std::getenv("GPSSM_OUTPUT_DIR"); dir != nullptr && *dir != '\0') {
    config.output_dir = dir;
  }
  if (const char* n = std::getenv("GPSSM_THREADS"); n != nullptr && *n != '\0') {
    char* end = nullptr;
    const long v = std::strtol(n, &end, 10);
    if (*end != '\0' || v < 1 || v > 1024) throw ConfigError("GPSSM_THREADS must be a positive integer");
    config.threads = static_cast<int>(v);
  }
}

data::Dataset resolve_dataset(ExperimentConfig& config) {
  data::Dataset d;
  const DatasetConfig& dc = config.dataset;
  if (!dc.manifest.empty()) {
    d = data::load_manifest(dc.manifest);
  } else if (dc.simulator == "dubins") {
    d = data::simulate_dubins(dc.dubins, dc.length, dc.n_train, dc.seed, dc.n_test);
  } else {
    d = data::simulate_linear(dc.linear, dc.length, dc.n_train, dc.seed, dc.n_test);
  }
  if (dc.lag > 0) d.meta.lag = dc.lag;
  d.validate();
  config.model.d_y = d.meta.d_y;
  config.model.d_u = d.meta.d_u;
  config.model.d_x = config.state_dim > 0 ? config.state_dim : d.meta.d_y;
  config.model.lag = d.meta.lag;
  config.train.lag = d.meta.lag;
  if (config.model.d_x < config.model.d_y) throw ConfigError("config: model.d_x must be >= d_y");
  return d;
}

}  // namespace gpssm::eval
