#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "gpssm/ad/binder.hpp"
#include "gpssm/error.hpp"
#include "gpssm/gp/sparse_gp.hpp"
#include "gpssm/ssm/model.hpp"
#include "gpssm/ssm/ops.hpp"
#include "support/random.hpp"

namespace ad = gpssm::ad;
namespace gp = gpssm::gp;
namespace ssm = gpssm::ssm;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using gpssm::testing::random_matrix;
using gpssm::testing::random_spd;

namespace {

ssm::SSMModel small_model(int d_x, int d_y, int d_u, int m, std::mt19937_64& rng) {
  ssm::ModelOptions o;
  o.d_x = d_x;
  o.d_y = d_y;
  o.d_u = d_u;
  o.num_inducing = m;
  o.lag = 2;
  return ssm::make_model(o, random_matrix(rng, m, d_x + d_u, -2.0, 2.0),
                         random_matrix(rng, m, d_x + d_u, -2.0, 2.0));
}

// Textbook Kalman measurement update with H = I.
gp::Gaussian kalman_update_oracle(const VectorXd& mean, const MatrixXd& p, const VectorXd& y,
                                  const MatrixXd& r) {
  const MatrixXd s = p + r;
  const MatrixXd gain = p * s.fullPivLu().inverse();
  const MatrixXd i = MatrixXd::Identity(p.rows(), p.cols());
  const MatrixXd cov = (i - gain) * p;
  return gp::Gaussian::full(mean + gain * (y - mean), 0.5 * (cov + cov.transpose()));
}

}  // namespace

TEST(Observe, SelectsLeadingComponents) {
  std::mt19937_64 rng(1);
  const ssm::SSMModel model = small_model(3, 2, 0, 4, rng);
  const gp::Gaussian y = ssm::observe(model, gp::Gaussian::full(VectorXd::LinSpaced(3, 1, 3),
                                                                MatrixXd::Identity(3, 3)));
  EXPECT_DOUBLE_EQ(y.mean()(0), 1.0);
  EXPECT_DOUBLE_EQ(y.mean()(1), 2.0);
  EXPECT_EQ(y.dim(), 2);
}

TEST(Observe, DiagonalCovarianceAddsNoise) {
  std::mt19937_64 rng(2);
  ssm::SSMModel model = small_model(3, 2, 0, 4, rng);
  model.log_obs_noise << std::log(0.3), std::log(0.7);
  const gp::Gaussian y = ssm::observe(
      model, gp::Gaussian::diagonal(VectorXd::Zero(3), (VectorXd(3) << 1.5, 2.5, 3.5).finished()));
  EXPECT_NEAR(y.covariance()(0, 0), 1.8, 1e-14);
  EXPECT_NEAR(y.covariance()(1, 1), 3.2, 1e-14);
  EXPECT_DOUBLE_EQ(y.covariance()(0, 1), 0.0);
}

TEST(Observe, VanishingNoiseReturnsState) {
  std::mt19937_64 rng(3);
  ssm::SSMModel model = small_model(2, 2, 0, 4, rng);
  model.log_obs_noise.setConstant(-80.0);
  const VectorXd x(VectorXd::Random(2));
  const gp::Gaussian y = ssm::observe(model, gp::Gaussian::diagonal(x, VectorXd::Zero(2)));
  EXPECT_TRUE(y.mean().isApprox(x));
  EXPECT_LT(y.covariance().norm(), 1e-30);
}

TEST(Observe, CovarianceDominatesObservationNoise) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int d_x = 1 + trial % 4;
    const int d_y = 1 + trial % d_x;
    ssm::SSMModel model = small_model(d_x, d_y, 0, 3, rng);
    model.log_obs_noise = random_matrix(rng, 1, d_y, -3.0, 1.0);
    const gp::Gaussian y =
        ssm::observe(model, gp::Gaussian::full(VectorXd::Zero(d_x), random_spd(rng, d_x, 1e-3)));
    MatrixXd excess = y.covariance();
    excess.diagonal() -= model.log_obs_noise.array().exp().matrix().transpose();
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(excess);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(Observe, TapeVersionMatchesNumeric) {
  std::mt19937_64 rng(5);
  const ssm::SSMModel model = small_model(3, 1, 0, 4, rng);
  ad::Tape tape;
  ad::Binder binder(tape, false);
  const ssm::ModelState state = ssm::prepare(model, ssm::bind(binder, model));
  const MatrixXd mean = random_matrix(rng, 2, 3);
  const MatrixXd var = random_matrix(rng, 2, 3, 0.1, 1.0);
  const ssm::DiagGaussian y = ssm::observe(state, {tape.constant(mean), tape.constant(var)});
  for (int r = 0; r < 2; ++r) {
    const gp::Gaussian ref = ssm::observe(
        model, gp::Gaussian::diagonal(mean.row(r).transpose(), var.row(r).transpose()));
    EXPECT_NEAR(y.mean.value()(r, 0), ref.mean()(0), 1e-14);
    EXPECT_NEAR(y.var.value()(r, 0), ref.covariance()(0, 0), 1e-14);
  }
}

TEST(ForwardPrior, MeanInducingInterpolatesIdentity) {
  ssm::ModelOptions o;
  o.d_x = 1;
  o.d_y = 1;
  o.kernel_lengthscale = 0.5;
  const MatrixXd z = VectorXd::LinSpaced(17, -2.0, 2.0);
  ssm::SSMModel model = ssm::make_model(o, z, z);
  model.forward.jitter = 1e-10;
  model.forward.q_mean = z;
  ad::Tape tape;
  ad::Binder binder(tape, false);
  const ssm::ModelState state = ssm::prepare(model, ssm::bind(binder, model));
  const MatrixXd x = VectorXd::LinSpaced(31, -1.5, 1.5);
  const ssm::FunctionDraw draw =
      ssm::draw_functions(state, ssm::SamplingStrategy::MeanInducing, {});
  const ssm::DiagGaussian prior = ssm::forward_prior(state, draw, tape.constant(x), {});
  EXPECT_LT((prior.mean.value() - x).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(ForwardPrior, ProcessNoiseDominatesDegenerateGp) {
  std::mt19937_64 rng(6);
  ssm::ModelOptions o;
  o.d_x = 2;
  o.d_y = 1;
  o.kernel_variance = 1e-14;
  o.process_noise = 0.04;
  ssm::SSMModel model =
      ssm::make_model(o, random_matrix(rng, 5, 2, -2, 2), random_matrix(rng, 5, 2, -2, 2));
  model.forward.set_q_to_prior();
  ad::Tape tape;
  ad::Binder binder(tape, false);
  const ssm::ModelState state = ssm::prepare(model, ssm::bind(binder, model));
  for (auto strategy : {ssm::SamplingStrategy::IndependentPerStep,
                        ssm::SamplingStrategy::MeanInducing}) {
    const ssm::DiagGaussian prior = ssm::forward_prior(
        state, ssm::draw_functions(state, strategy, {}), tape.constant(random_matrix(rng, 6, 2)),
        {});
    EXPECT_LT(prior.mean.value().cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((prior.var.value().array() - 0.04).abs().maxCoeff(), 1e-12);
  }
}

TEST(ForwardPrior, StrategiesAgreeForDeterministicInducing) {
  std::mt19937_64 rng(7);
  ssm::SSMModel model = small_model(2, 1, 1, 6, rng);
  model.forward.q_mean = random_matrix(rng, 6, 2);
  for (int j = 0; j < 2; ++j) model.forward.set_q_cholesky(j, 1e-9 * MatrixXd::Identity(6, 6));
  ad::Tape tape;
  ad::Binder binder(tape, false);
  const ssm::ModelState state = ssm::prepare(model, ssm::bind(binder, model));
  const int n = 8;
  const ad::Var x = tape.constant(random_matrix(rng, n, 2));
  const ad::Var u = tape.constant(random_matrix(rng, n, 1));
  std::normal_distribution<double> normal;
  std::vector<MatrixXd> eps(2, MatrixXd(6, n));
  for (auto& e : eps) e = e.unaryExpr([&](double) { return normal(rng); });
  const auto independent = ssm::forward_prior(
      state, ssm::draw_functions(state, ssm::SamplingStrategy::IndependentPerStep, {}), x, u);
  const auto sampled = ssm::forward_prior(
      state, ssm::draw_functions(state, ssm::SamplingStrategy::SampledInducingPerTrajectory, eps),
      x, u);
  const auto at_mean = ssm::forward_prior(
      state, ssm::draw_functions(state, ssm::SamplingStrategy::MeanInducing, {}), x, u);
  EXPECT_LT((independent.mean.value() - sampled.mean.value()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((independent.mean.value() - at_mean.mean.value()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ForwardPrior, RejectsWrongStateWidth) {
  std::mt19937_64 rng(8);
  const ssm::SSMModel model = small_model(2, 1, 0, 4, rng);
  ad::Tape tape;
  ad::Binder binder(tape, false);
  const ssm::ModelState state = ssm::prepare(model, ssm::bind(binder, model));
  const auto draw = ssm::draw_functions(state, ssm::SamplingStrategy::MeanInducing, {});
  EXPECT_THROW(ssm::forward_prior(state, draw, tape.constant(MatrixXd::Zero(3, 3)), {}),
               gpssm::ShapeError);
}

TEST(SoftCondition, SymmetricScalarCase) {
  const double s = 0.8;
  const gp::Gaussian post = ssm::soft_condition(
      gp::Gaussian::full(VectorXd::Constant(1, 1.0), MatrixXd::Constant(1, 1, s)),
      VectorXd::Constant(1, 3.0), MatrixXd::Constant(1, 1, s), 1.0);
  EXPECT_NEAR(post.mean()(0), 2.0, 1e-15);
  EXPECT_NEAR(post.covariance()(0, 0), s / 2.0, 1e-15);
  EXPECT_NEAR(ssm::soft_gain(MatrixXd::Constant(1, 1, s), MatrixXd::Constant(1, 1, s), 1.0)(0, 0),
              0.5, 1e-15);
}

TEST(SoftCondition, LargeFactorLeavesPriorUnchanged) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 4;
    const gp::Gaussian prior =
        gp::Gaussian::full(random_matrix(rng, d, 1, -5, 5), random_spd(rng, d, 0.1));
    const gp::Gaussian post = ssm::soft_condition(prior, random_matrix(rng, d, 1, -5, 5),
                                                  random_spd(rng, d, 0.1), 1e9);
    EXPECT_LT((post.mean() - prior.mean()).norm(), 1e-6 * (1.0 + prior.mean().norm()));
    EXPECT_LT((post.covariance() - prior.covariance()).norm(), 1e-6 * prior.covariance().norm());
  }
}

TEST(SoftCondition, UnitFactorIsKalmanUpdate) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 5;
    const VectorXd mean = random_matrix(rng, d, 1, -3, 3);
    const MatrixXd p = random_spd(rng, d, 0.2);
    const VectorXd y = random_matrix(rng, d, 1, -3, 3);
    const MatrixXd r = random_spd(rng, d, 0.2);
    const gp::Gaussian post = ssm::soft_condition(gp::Gaussian::full(mean, p), y, r, 1.0);
    const gp::Gaussian ref = kalman_update_oracle(mean, p, y, r);
    EXPECT_LT((post.mean() - ref.mean()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((post.covariance() - ref.covariance()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(SoftCondition, ScalarVarianceNeverIncreases) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> log_var(-6.0, 4.0);
  std::uniform_real_distribution<double> log_k(0.0, 9.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double s = std::exp(log_var(rng));
    const double pseudo = std::exp(log_var(rng));
    const double k = std::pow(10.0, log_k(rng));
    const gp::Gaussian post =
        ssm::soft_condition(gp::Gaussian::full(VectorXd::Zero(1), MatrixXd::Constant(1, 1, s)),
                            VectorXd::Ones(1), MatrixXd::Constant(1, 1, pseudo), k);
    EXPECT_LE(post.covariance()(0, 0), s * (1.0 + 1e-12)) << "s=" << s << " pseudo=" << pseudo
                                                          << " k=" << k;
  }
}

TEST(SoftCondition, ScalarGainDecreasesInFactor) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> log_var(-4.0, 4.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const MatrixXd s = MatrixXd::Constant(1, 1, std::exp(log_var(rng)));
    const MatrixXd pseudo = MatrixXd::Constant(1, 1, std::exp(log_var(rng)));
    const double k1 = 1.0 + 100.0 * unit(rng);
    const double k2 = k1 * (1.0 + 0.01 + unit(rng));
    EXPECT_GT(ssm::soft_gain(s, pseudo, k1)(0, 0), ssm::soft_gain(s, pseudo, k2)(0, 0));
  }
}

TEST(SoftCondition, DiagonalTapeMatchesDense) {
  std::mt19937_64 rng(13);
  ad::Tape tape;
  const int n = 5;
  const int d = 3;
  const MatrixXd mean = random_matrix(rng, n, d);
  const MatrixXd var = random_matrix(rng, n, d, 0.05, 2.0);
  const MatrixXd obs = random_matrix(rng, n, d);
  const MatrixXd obs_var = random_matrix(rng, n, d, 0.05, 2.0);
  const double k = 3.5;
  const ssm::DiagGaussian post =
      ssm::soft_condition({tape.constant(mean), tape.constant(var)}, tape.constant(obs),
                          tape.constant(obs_var), k);
  for (int r = 0; r < n; ++r) {
    const gp::Gaussian ref = ssm::soft_condition(
        gp::Gaussian::diagonal(mean.row(r).transpose(), var.row(r).transpose()),
        obs.row(r).transpose(), obs_var.row(r).transpose().asDiagonal().toDenseMatrix(), k);
    EXPECT_LT((post.mean.value().row(r).transpose() - ref.mean()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((post.var.value().row(r).transpose() - ref.variance()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SoftCondition, MaskLeavesComponentsUntouched) {
  ad::Tape tape;
  const MatrixXd mean = MatrixXd::Constant(2, 2, 1.0);
  const MatrixXd var = MatrixXd::Constant(2, 2, 0.5);
  const ssm::DiagGaussian post = ssm::soft_condition(
      {tape.constant(mean), tape.constant(var)}, tape.constant(MatrixXd::Zero(2, 2)),
      tape.constant(var), 1.0, tape.constant(Eigen::RowVector2d(1.0, 0.0)));
  EXPECT_DOUBLE_EQ(post.mean.value()(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(post.mean.value()(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(post.var.value()(1, 1), 0.5);
}

TEST(SoftCondition, RejectsFactorBelowOneAndSingularSystems) {
  const gp::Gaussian prior = gp::Gaussian::full(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
  EXPECT_THROW(ssm::soft_condition(prior, VectorXd::Zero(2), MatrixXd::Identity(2, 2), 0.5),
               gpssm::ConfigError);
  const gp::Gaussian flat = gp::Gaussian::full(VectorXd::Zero(2), MatrixXd::Zero(2, 2));
  EXPECT_THROW(ssm::soft_condition(flat, VectorXd::Zero(2), MatrixXd::Zero(2, 2), 1.0),
               gpssm::NumericError);
}

TEST(Recognize, ZeroMapGivesStandardNormal) {
  ssm::RecognitionModule r = ssm::RecognitionModule::zeros(2, 4, 3);
  const gp::Gaussian q = ssm::recognize(r, MatrixXd::Random(5, 1), MatrixXd::Random(5, 1));
  EXPECT_TRUE(q.mean().isZero());
  EXPECT_TRUE(q.variance().isOnes());
}

TEST(Recognize, CopyingMapReturnsObservation) {
  const int lag = 3;
  const int d = 2;
  ssm::RecognitionModule r = ssm::RecognitionModule::zeros(lag, lag * d, d);
  for (int j = 0; j < d; ++j) r.weight((lag - 1) * d + j, j) = 1.0;
  const MatrixXd y = MatrixXd::Random(6, d);
  const gp::Gaussian q = ssm::recognize(r, y, MatrixXd(6, 0));
  EXPECT_TRUE(q.mean().isApprox(y.row(lag - 1).transpose()));
  EXPECT_TRUE((q.variance().array() > 0.0).all());
}

TEST(Recognize, ShortSequenceRejected) {
  ssm::RecognitionModule r = ssm::RecognitionModule::zeros(5, 5, 1);
  EXPECT_THROW(ssm::recognize(r, MatrixXd::Zero(4, 1), MatrixXd(4, 0)), gpssm::DataError);
}

TEST(Recognize, TapeGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(14);
  ad::Tape tape;
  const ad::Var w = tape.leaf(random_matrix(rng, 4, 6, -0.5, 0.5));
  const ad::Var b = tape.leaf(random_matrix(rng, 1, 6, -0.5, 0.5));
  const ssm::DiagGaussian q = ssm::recognize({w, b}, tape.constant(random_matrix(rng, 3, 4)));
  const ad::Var target = tape.constant(random_matrix(rng, 3, 3));
  const ad::Var loss = gp::diagonal_log_density(target, q.mean, q.var);
  ad::LeafValues leaves{{w.id(), w.value()}, {b.id(), b.value()}};
  const ad::Var wrt[] = {w, b};
  EXPECT_LT(ad::fd_check(tape, leaves, loss, wrt), 1e-4);
}

TEST(BackwardStep, FullObservationClampsToMeasurement) {
  std::mt19937_64 rng(15);
  ssm::SSMModel model = small_model(2, 2, 1, 4, rng);
  model.forward.q_mean = random_matrix(rng, 4, 2, -5, 5);
  ad::Tape tape;
  ad::Binder binder(tape, false);
  const ssm::ModelState state = ssm::prepare(model, ssm::bind(binder, model));
  const MatrixXd y = random_matrix(rng, 3, 2);
  const ssm::DiagGaussian out =
      ssm::backward_step(state, tape.constant(random_matrix(rng, 3, 2)),
                         tape.constant(random_matrix(rng, 3, 1)), tape.constant(y));
  EXPECT_EQ(out.mean.value(), y);
  EXPECT_TRUE(out.var.value().isZero(0.0));
}

TEST(BackwardStep, DegenerateGpGivesZeroHiddenState) {
  std::mt19937_64 rng(16);
  ssm::ModelOptions o;
  o.d_x = 3;
  o.d_y = 1;
  o.kernel_variance = 1e-14;
  ssm::SSMModel model =
      ssm::make_model(o, random_matrix(rng, 5, 3, -2, 2), random_matrix(rng, 5, 3, -2, 2));
  model.backward.set_q_to_prior();
  ad::Tape tape;
  ad::Binder binder(tape, false);
  const ssm::ModelState state = ssm::prepare(model, ssm::bind(binder, model));
  const MatrixXd y = random_matrix(rng, 4, 1);
  const ssm::DiagGaussian out =
      ssm::backward_step(state, tape.constant(random_matrix(rng, 4, 3)), {}, tape.constant(y));
  EXPECT_EQ(out.mean.value().col(0), y.col(0));
  EXPECT_LT(out.mean.value().rightCols(2).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(out.var.value().rightCols(2).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Model, ValidationCatchesBadSettings) {
  std::mt19937_64 rng(17);
  ssm::SSMModel model = small_model(2, 1, 0, 4, rng);
  EXPECT_NO_THROW(model.validate());
  model.k_soft = 0.5;
  EXPECT_THROW(model.validate(), gpssm::ConfigError);
  model.k_soft = 1.0;
  model.log_obs_noise.resize(2);
  EXPECT_THROW(model.validate(), gpssm::ShapeError);
  ssm::ModelOptions o;
  o.d_x = 1;
  o.d_y = 2;
  EXPECT_THROW(ssm::make_model(o, MatrixXd::Zero(2, 1), MatrixXd::Zero(2, 1)), gpssm::ConfigError);
}

TEST(Model, StrategyNamesRoundTrip) {
  for (auto s : {ssm::SamplingStrategy::IndependentPerStep,
                 ssm::SamplingStrategy::SampledInducingPerTrajectory,
                 ssm::SamplingStrategy::MeanInducing}) {
    EXPECT_EQ(ssm::sampling_strategy_from_string(ssm::to_string(s)), s);
  }
  EXPECT_THROW(ssm::sampling_strategy_from_string("bogus"), gpssm::ConfigError);
}

TEST(Model, LinearMeanStartsAsIdentity) {
  std::mt19937_64 rng(23);
  ssm::ModelOptions o;
  o.d_x = 3;
  o.d_y = 1;
  o.d_u = 1;
  o.num_inducing = 5;
  o.lag = 2;
  const MatrixXd z = random_matrix(rng, 5, 4, -2.0, 2.0);
  o.forward_mean = o.backward_mean = gp::MeanFunction::Kind::Identity;
  const ssm::SSMModel identity = ssm::make_model(o, z, z);
  o.forward_mean = o.backward_mean = gp::MeanFunction::Kind::Linear;
  const ssm::SSMModel linear = ssm::make_model(o, z, z);
  EXPECT_NO_THROW(linear.validate());
  const MatrixXd x = random_matrix(rng, 7, 4, -2.0, 2.0);
  for (auto member : {&ssm::SSMModel::forward, &ssm::SSMModel::backward}) {
    const auto a = gp::sparse_predict(identity.*member, x);
    const auto b = gp::sparse_predict(linear.*member, x);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      EXPECT_LT((a[j].mean() - b[j].mean()).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}
