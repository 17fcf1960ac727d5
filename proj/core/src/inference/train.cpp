#include "gpssm/inference/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "gpssm/data/subsequence.hpp"
#include "gpssm/error.hpp"
#include "gpssm/inference/optimizer.hpp"
#include "gpssm/random.hpp"

namespace gpssm::inference {

namespace {

enum Stream : std::uint64_t {
  kInducingInit = 6,
  kIterationSeeds = 7,
};

Eigen::MatrixXd inducing_from_data(const std::vector<data::Trajectory>& train,
                                   const ssm::ModelOptions& o, Rng& rng) {
  std::vector<std::pair<int, int>> rows;
  for (int i = 0; i < static_cast<int>(train.size()); ++i) {
    for (int t = 0; t < train[i].length(); ++t) rows.emplace_back(i, t);
  }
  if (rows.empty()) throw DataError("train: no training data");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(o.num_inducing, o.d_x + o.d_u);
  // Draw without replacement while possible; tiny datasets fall back to
  // perturbed repeats so the inducing inputs stay distinct.
  std::vector<int> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (int m = 0; m < o.num_inducing; ++m) {
    const auto [i, t] = rows[order[m % order.size()]];
    const data::Trajectory& tr = train[i];
    for (int j = 0; j < o.d_x; ++j) z(m, j) = j < o.d_y ? tr.y(t, j) : normal(rng);
    for (int j = 0; j < o.d_u; ++j) z(m, o.d_x + j) = tr.u(t, j);
    if (m >= static_cast<int>(order.size())) {
      for (int j = 0; j < z.cols(); ++j) z(m, j) += 1e-3 * normal(rng);
    }
  }
  return z;
}

double scalar(ad::Var v) { return v.value()(0, 0); }

/// Name of the first non-finite term, or empty.
std::string non_finite_term(const ElboGraph& g) {
  const std::pair<const char*, ad::Var> terms[] = {
      {"likelihood", g.likelihood},         {"kl_forward", g.kl_forward},
      {"kl_backward", g.kl_backward},       {"kl_recognition", g.kl_recognition},
      {"kl_conditioning", g.kl_conditioning}, {"total", g.total}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(scalar(v))) return name;
  }
  return {};
}

}  // namespace

ssm::SamplingStrategy TrainConfig::resolved_strategy() const {
  return strategy ? *strategy : default_strategy(algorithm);
}

void TrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("train: iterations must be >= 0");
  if (samples < 1 || batch_size < 1) throw ConfigError("train: samples and batch_size must be >= 1");
  if (seqlen < 2) throw ConfigError("train: seqlen must be >= 2");
  if (lag < 1 || lag > seqlen) throw ConfigError("train: need 1 <= lag <= seqlen");
  if (!(k_soft >= 1.0) || !(k_vcdt >= 1.0)) throw ConfigError("train: k must be >= 1");
  if (!(beta >= 0.0)) throw ConfigError("train: beta must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (!(final_learning_rate >= 0.0) || final_learning_rate > learning_rate) {
    throw ConfigError("train: final_learning_rate must be in [0, learning_rate]");
  }
  if (!(clip_norm > 0.0)) throw ConfigError("train: clip_norm must be > 0");
}

ssm::SSMModel initialize_model(const std::vector<data::Trajectory>& train,
                               const ssm::ModelOptions& options, std::uint64_t seed) {
  Rng rng = make_rng(seed, kInducingInit);
  Eigen::MatrixXd zf = inducing_from_data(train, options, rng);
  Eigen::MatrixXd zb = inducing_from_data(train, options, rng);
  return ssm::make_model(options, std::move(zf), std::move(zb));
}

ObjectiveGraph build_objective(const ssm::SSMModel& model, const TrainConfig& config,
                               const RolloutBatch& batch, const RolloutNoise& noise,
                               double t_full, bool checked) {
  ObjectiveGraph g;
  g.tape = std::make_unique<ad::Tape>(checked);
  g.binder = std::make_unique<ad::Binder>(*g.tape);
  const bool cbf = config.algorithm == Algorithm::CBFSSM;
  g.state = ssm::prepare(model, ssm::bind(*g.binder, model, cbf));
  const RolloutOptions options{config.algorithm, config.resolved_strategy(), config.k_soft,
                               config.k_vcdt};
  if (cbf) g.pseudo = backward_pass(g.state, batch, noise);
  g.rollout = forward_pass(g.state, options, batch, noise, g.pseudo ? &*g.pseudo : nullptr);
  g.elbo = elbo(g.rollout, g.state, t_full, batch.length(), config.beta, config.kl_scaling);
  return g;
}

TrainResult train(ssm::SSMModel model, const std::vector<data::Trajectory>& train,
                  const TrainConfig& config) {
  config.validate();
  model.validate();
  TrainResult result;
  result.final_learning_rate = config.learning_rate;
  if (config.iterations == 0) {
    result.model = std::move(model);
    return result;
  }
  if (config.lag != model.lag()) {
    throw ConfigError("train: config lag " + std::to_string(config.lag) +
                      " differs from the model's recognition lag " + std::to_string(model.lag()));
  }
  double t_full = 0.0;
  for (const data::Trajectory& t : train) {
    if (t.d_y() != model.d_y || t.d_u() != model.d_u) {
      throw DataError("train: trajectory dimensions do not match the model");
    }
    t_full += t.length();
  }

  data::SubsequenceSampler sampler(train, config.seqlen, config.batch_size, config.seed);
  Rng seeds = make_rng(config.seed, kIterationSeeds);
  Adam adam(Adam::Options{config.learning_rate});
  bool halved = false;
  const double decay =
      config.final_learning_rate > 0.0 && config.iterations > 1
          ? std::pow(config.final_learning_rate / config.learning_rate, 1.0 / (config.iterations - 1))
          : 1.0;
  double rate = config.learning_rate;

  for (int it = 0; it < config.iterations; ++it, rate *= decay) {
    const RolloutBatch batch = make_batch(sampler.next(), config.samples, model.lag());
    const RolloutNoise noise = draw_noise(model, batch.length(), batch.rows(), seeds());
    ObjectiveGraph g = build_objective(model, config, batch, noise, t_full);

    std::string bad = non_finite_term(g.elbo);
    const std::vector<ad::Var> leaves = g.binder->leaves();
    std::vector<Eigen::MatrixXd> grads;
    if (bad.empty()) {
      const ad::GradientMap gm = ad::gradient(*g.tape, g.elbo.total, leaves);
      grads.reserve(leaves.size());
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        grads.push_back(gm.at(leaves[i].id()));
        if (!grads.back().allFinite() && bad.empty()) {
          bad = "gradient of " + g.binder->slots()[i].name;
        }
      }
    }
    if (!bad.empty()) {
      if (halved) {
        throw NumericError("train: non-finite " + bad + " at iteration " + std::to_string(it));
      }
      halved = true;
      ++result.skipped_steps;
      rate *= 0.5;
      continue;
    }
    clip_global_norm(grads, config.clip_norm);

    std::vector<Eigen::Map<Eigen::MatrixXd>> params;
    params.reserve(leaves.size());
    for (const ad::Binder::Slot& s : g.binder->slots()) {
      // The slots alias `model`, which this function owns.
      params.emplace_back(const_cast<double*>(s.data), s.rows, s.cols);
    }
    adam.set_learning_rate(rate);
    adam.ascend(params, grads);
    result.history.push_back(g.elbo.terms());
  }
  result.final_learning_rate = adam.learning_rate();
  result.model = std::move(model);
  return result;
}

}  // namespace gpssm::inference
