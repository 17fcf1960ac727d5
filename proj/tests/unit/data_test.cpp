#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "gpssm/data/dataset.hpp"
#include "gpssm/data/io.hpp"
#include "gpssm/data/simulate.hpp"
#include "gpssm/data/subsequence.hpp"
#include "gpssm/error.hpp"
#include "support/random.hpp"
#include "support/temp_dir.hpp"

namespace data = gpssm::data;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using gpssm::testing::random_matrix;
using gpssm::testing::TempDir;

namespace {

data::Trajectory make_traj(const MatrixXd& u, const MatrixXd& y) {
  data::Trajectory t;
  t.u = u;
  t.y = y;
  t.source = "test";
  return t;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

// Spectral radius through the characteristic polynomial: Faddeev-LeVerrier
// coefficients, then the eigenvalues of its companion matrix.
double companion_radius(const MatrixXd& a) {
  const auto n = a.rows();
  VectorXd c = VectorXd::Zero(n + 1);  // p(l) = l^n + c(1) l^{n-1} + ... + c(n)
  c(0) = 1.0;
  MatrixXd m = MatrixXd::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    m = a * m + c(k - 1) * MatrixXd::Identity(n, n);
    c(k) = -(a * m).trace() / static_cast<double>(k);
  }
  MatrixXd companion = MatrixXd::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) companion(i, n - 1) = -c(n - i);
  return Eigen::EigenSolver<MatrixXd>(companion, false).eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Trajectory, ValidationRejectsBadShapes) {
  EXPECT_THROW(make_traj(MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 1)).validate(), gpssm::DataError);
  EXPECT_THROW(make_traj(MatrixXd::Zero(3, 1), MatrixXd::Zero(4, 1)).validate(), gpssm::DataError);
  MatrixXd y = MatrixXd::Zero(3, 1);
  y(1, 0) = std::nan("");
  EXPECT_THROW(make_traj(MatrixXd::Zero(3, 0), y).validate(), gpssm::DataError);
  EXPECT_NO_THROW(make_traj(MatrixXd::Zero(3, 0), MatrixXd::Zero(3, 2)).validate());
}

TEST(Normalize, ConstantChannelMapsToZero) {
  std::mt19937_64 rng(1);
  const auto d = data::make_dataset(
      {make_traj(MatrixXd::Constant(5, 1, 3.0), random_matrix(rng, 5, 1))}, {}, {"c", 1, 1, 1});
  EXPECT_DOUBLE_EQ(d.stats.u_std(0), data::kStdFloor);
  const auto n = data::normalize(d);
  EXPECT_TRUE(n.train[0].u.isZero(0.0));
}

TEST(Normalize, RoundTripAndZeroTrainMean) {
  std::mt19937_64 rng(2);
  std::vector<data::Trajectory> train;
  std::vector<data::Trajectory> test;
  for (int i = 0; i < 3; ++i) {
    train.push_back(make_traj(random_matrix(rng, 20, 2, -5, 9), random_matrix(rng, 20, 3, 10, 40)));
    test.push_back(make_traj(random_matrix(rng, 7, 2, -50, 90), random_matrix(rng, 7, 3, 0, 1)));
  }
  const auto d = data::make_dataset(train, test, {"r", 2, 3, 2});
  const auto n = data::normalize(d);
  Eigen::RowVectorXd mean_u = Eigen::RowVectorXd::Zero(2);
  Eigen::RowVectorXd mean_y = Eigen::RowVectorXd::Zero(3);
  for (const auto& t : n.train) {
    mean_u += t.u.colwise().sum();
    mean_y += t.y.colwise().sum();
  }
  EXPECT_LT(mean_u.cwiseAbs().maxCoeff() / 60.0, 1e-10);
  EXPECT_LT(mean_y.cwiseAbs().maxCoeff() / 60.0, 1e-10);
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    const auto back = data::denormalize(n.test[i], d.stats);
    EXPECT_LT((back.u - d.test[i].u).cwiseAbs().maxCoeff(), 1e-12 * 100);
    EXPECT_LT((back.y - d.test[i].y).cwiseAbs().maxCoeff(), 1e-12 * 100);
  }
  const MatrixXd var = MatrixXd::Ones(4, 3);
  const MatrixXd raw_var = data::denormalize_variance(var, d.stats);
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(raw_var(0, c), d.stats.y_std(c) * d.stats.y_std(c));
}

TEST(Normalize, StatsComeFromTrainOnly) {
  std::mt19937_64 rng(3);
  const auto train = make_traj(random_matrix(rng, 30, 1), random_matrix(rng, 30, 1));
  const auto test = make_traj(random_matrix(rng, 30, 1, 50, 60), random_matrix(rng, 30, 1, 50, 60));
  const auto d = data::make_dataset({train}, {test}, {"t", 1, 1, 1});
  const auto own = data::compute_stats({train});
  EXPECT_EQ(d.stats.y_mean, own.y_mean);
  EXPECT_EQ(d.stats.y_std, own.y_std);
  EXPECT_EQ(d.stats.u_mean, own.u_mean);
  EXPECT_LT(d.stats.y_mean(0), 1.0);
}

TEST(Csv, SingleTrajectoryFile) {
  TempDir dir;
  std::string text = "u,y\n";
  for (int i = 0; i < 10; ++i) text += std::to_string(i) + "," + std::to_string(2 * i) + "\n";
  write_file(dir / "a.csv", text);
  const auto trajs = data::read_trajectories((dir / "a.csv").string(), {{"u"}, {"y"}});
  ASSERT_EQ(trajs.size(), 1u);
  EXPECT_EQ(trajs[0].length(), 10);
  EXPECT_DOUBLE_EQ(trajs[0].y(9, 0), 18.0);
}

TEST(Csv, SequenceColumnSplitsTrajectories) {
  TempDir dir;
  write_file(dir / "s.csv", "seq,u,y\n1,0,1\n1,0,2\n2,1,3\n2,1,4\n");
  const auto trajs = data::read_trajectories((dir / "s.csv").string(), {{"u"}, {"y"}});
  ASSERT_EQ(trajs.size(), 2u);
  EXPECT_EQ(trajs[0].length(), 2);
  EXPECT_EQ(trajs[1].length(), 2);
  EXPECT_DOUBLE_EQ(trajs[1].y(1, 0), 4.0);
}

TEST(Csv, SaveLoadRoundTripIsBitExact) {
  TempDir dir;
  std::mt19937_64 rng(4);
  std::vector<data::Trajectory> trajs;
  for (int i = 0; i < 3; ++i) {
    MatrixXd y = random_matrix(rng, 12, 2, -1e6, 1e6);
    y(0, 0) = 1e-300;
    y(1, 1) = -std::numbers::pi;
    trajs.push_back(make_traj(random_matrix(rng, 12, 1), y));
  }
  const data::CsvSpec spec{{"u0"}, {"y0", "y1"}};
  const std::string path = (dir / "rt.csv").string();
  data::save_csv(path, trajs, spec);
  const auto back = data::read_trajectories(path, spec);
  ASSERT_EQ(back.size(), trajs.size());
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    EXPECT_EQ(back[i].u, trajs[i].u);
    EXPECT_EQ(back[i].y, trajs[i].y);
  }
}

TEST(Csv, ErrorsNameTheProblem) {
  TempDir dir;
  write_file(dir / "bad.csv", "u,y\n1,2\n3,abc\n");
  try {
    data::read_trajectories((dir / "bad.csv").string(), {{"u"}, {"y"}});
    FAIL() << "expected DataError";
  } catch (const gpssm::DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'y'"), std::string::npos) << msg;
  }
  EXPECT_THROW(data::read_trajectories((dir / "bad.csv").string(), {{"u"}, {"z"}}),
               gpssm::DataError);
  write_file(dir / "empty.csv", "u,y\n");
  EXPECT_THROW(data::read_trajectories((dir / "empty.csv").string(), {{"u"}, {"y"}}),
               gpssm::DataError);
  EXPECT_THROW(data::read_trajectories((dir / "missing.csv").string(), {{"u"}, {"y"}}),
               gpssm::DataError);
}

TEST(Csv, SplitsSingleTrajectoryByTime) {
  TempDir dir;
  std::string text = "u,y\n";
  for (int i = 0; i < 20; ++i) text += std::to_string(i) + "," + std::to_string(i) + "\n";
  write_file(dir / "a.csv", text);
  data::CsvSpec spec{{"u"}, {"y"}};
  spec.train_fraction = 0.5;
  const auto d = data::load_csv((dir / "a.csv").string(), spec);
  ASSERT_EQ(d.train.size(), 1u);
  ASSERT_EQ(d.test.size(), 1u);
  EXPECT_EQ(d.train[0].length(), 10);
  EXPECT_DOUBLE_EQ(d.test[0].y(0, 0), 10.0);
}

TEST(Manifest, LoadsAndRejectsUnknownKeys) {
  TempDir dir;
  write_file(dir / "d.csv", "seq,u,y\n1,0,1\n1,0,2\n1,0,2\n2,1,3\n2,1,4\n2,1,4\n");
  write_file(dir / "m.json",
             R"({"name": "toy", "csv": "d.csv", "u_columns": ["u"], "y_columns": ["y"],
                 "lag": 1, "train_fraction": 0.5})");
  const auto d = data::load_manifest((dir / "m.json").string());
  EXPECT_EQ(d.meta.name, "toy");
  EXPECT_EQ(d.train.size(), 1u);
  EXPECT_EQ(d.test.size(), 1u);
  write_file(dir / "bad.json", R"({"name": "toy", "csv": "d.csv", "y_columns": ["y"], "typo": 1})");
  EXPECT_THROW(data::load_manifest((dir / "bad.json").string()), gpssm::ConfigError);
}

TEST(Dubins, StraightLineWithoutNoise) {
  data::DubinsParams p;
  p.process_noise_std.setZero();
  p.obs_noise_std = 0.0;
  MatrixXd c(50, 2);
  c.col(0).setOnes();
  c.col(1).setZero();
  const auto t = data::simulate_dubins_path(p, Eigen::Vector3d(2.0, -1.0, 0.0), c, 1);
  for (int i = 0; i < 50; ++i) {
    EXPECT_NEAR(t.x(i, 0), 2.0 + i * p.dt, 1e-12);
    EXPECT_DOUBLE_EQ(t.x(i, 1), -1.0);
  }
  EXPECT_EQ(t.y, t.x.leftCols(2));
}

TEST(Dubins, ConstantCurvatureTracesCircle) {
  data::DubinsParams p;
  p.process_noise_std.setZero();
  p.obs_noise_std = 0.0;
  const double kappa = 0.8;
  MatrixXd c(60, 2);
  c.col(0).setOnes();
  c.col(1).setConstant(kappa);
  const auto t = data::simulate_dubins_path(p, Eigen::Vector3d(0.0, 0.0, 0.3), c, 1);
  // Euler steps of equal length and equal turn are the vertices of a regular
  // polygon, inscribed in a circle of radius dt v / (2 sin(dt v kappa / 2)),
  // which tends to 1 / kappa as dt -> 0.
  const double radius = p.dt / (2.0 * std::sin(p.dt * kappa / 2.0));
  const Eigen::Vector2d center(-std::sin(0.3 - p.dt * kappa / 2.0) * radius,
                               std::cos(0.3 - p.dt * kappa / 2.0) * radius);
  for (int i : {7, 23, 51}) {
    EXPECT_NEAR((t.x.row(i).head<2>().transpose() - center).norm(), radius, 1e-6);
  }
  EXPECT_NEAR(radius, 1.0 / kappa, 1e-3);
}

TEST(Dubins, PositionVarianceGrowsAcrossRollouts) {
  data::DubinsParams p;
  MatrixXd c(100, 2);
  c.col(0).setOnes();
  c.col(1).setConstant(0.3);
  std::vector<double> var(100, 0.0);
  const int n = 500;
  MatrixXd xs(n, 100);
  for (int k = 0; k < n; ++k) {
    xs.row(k) = data::simulate_dubins_path(p, Eigen::Vector3d::Zero(), c, 100 + k).x.col(0);
  }
  const Eigen::RowVectorXd mean = xs.colwise().mean();
  const Eigen::RowVectorXd v = (xs.rowwise() - mean).array().square().colwise().sum() / (n - 1);
  EXPECT_GT(v(99), 10.0 * v(5));
  EXPECT_GT(v(50), v(10));
}

TEST(Dubins, PartialObservationHidesHeading) {
  const auto d = data::simulate_dubins({}, 40, 2, 7, 1);
  EXPECT_EQ(d.meta.d_y, 2);
  EXPECT_EQ(d.meta.d_u, 2);
  EXPECT_EQ(d.train[0].x.cols(), 3);
  EXPECT_EQ(d.test.size(), 1u);
  for (const auto& t : d.train) {
    EXPECT_GE(t.u.col(0).minCoeff(), 0.5);
    EXPECT_LE(t.u.col(0).maxCoeff(), 1.5);
    EXPECT_GE(t.u.col(1).minCoeff(), -1.0);
    EXPECT_LE(t.u.col(1).maxCoeff(), 1.0);
  }
  data::DubinsParams full;
  full.observe_heading = true;
  EXPECT_EQ(data::simulate_dubins(full, 10, 1, 7).meta.d_y, 3);
}

TEST(Dubins, ReproducibleFromSeed) {
  const auto a = data::simulate_dubins({}, 30, 2, 11);
  const auto b = data::simulate_dubins({}, 30, 2, 11);
  const auto c = data::simulate_dubins({}, 30, 2, 12);
  EXPECT_EQ(a.train[1].y, b.train[1].y);
  EXPECT_EQ(a.train[1].u, b.train[1].u);
  EXPECT_NE(a.train[1].y, c.train[1].y);
}

TEST(Linear, ZeroDynamicsTracksControlsWithDelay) {
  data::LinearSystem s;
  s.A = MatrixXd::Zero(2, 2);
  s.B = MatrixXd::Identity(2, 2);
  s.C = (MatrixXd(1, 2) << 1.0, -2.0).finished();
  s.Q = MatrixXd::Zero(2, 2);
  s.R = MatrixXd::Zero(1, 1);
  const auto d = data::simulate_linear(s, 20, 1, 3);
  const auto& t = d.train[0];
  for (int i = 0; i + 1 < 20; ++i) {
    EXPECT_NEAR(t.y(i + 1, 0), t.u(i, 0) - 2.0 * t.u(i, 1), 1e-14);
  }
}

TEST(Linear, StationaryVarianceMatchesLyapunov) {
  data::LinearSystem s;
  s.A = MatrixXd::Constant(1, 1, 0.5);
  s.B = MatrixXd::Zero(1, 1);
  s.C = MatrixXd::Ones(1, 1);
  s.Q = MatrixXd::Ones(1, 1);
  s.R = MatrixXd::Zero(1, 1);
  const auto d = data::simulate_linear(s, 100000, 1, 5);
  const VectorXd x = d.train[0].x.col(0).tail(99000);
  const double var = (x.array() - x.mean()).square().sum() / (x.size() - 1);
  EXPECT_NEAR(var, 4.0 / 3.0, 0.05 * 4.0 / 3.0);
}

TEST(Linear, UnstableSystemVarianceExplodes) {
  data::LinearSystem s;
  s.A = MatrixXd::Constant(1, 1, 1.05);
  s.B = MatrixXd::Zero(1, 1);
  s.C = MatrixXd::Ones(1, 1);
  s.Q = MatrixXd::Ones(1, 1);
  s.R = MatrixXd::Zero(1, 1);
  const auto d = data::simulate_linear(s, 101, 500, 6);
  auto variance_at = [&](int t) {
    VectorXd v(500);
    for (int k = 0; k < 500; ++k) v(k) = d.train[k].x(t, 0);
    return (v.array() - v.mean()).square().sum() / 499.0;
  };
  EXPECT_GT(variance_at(100), 10.0 * variance_at(10));
}

TEST(Linear, DimensionMismatchRejected) {
  data::LinearSystem s;
  s.A = MatrixXd::Identity(2, 2);
  s.B = MatrixXd::Zero(3, 1);
  s.C = MatrixXd::Ones(1, 2);
  s.Q = MatrixXd::Identity(2, 2);
  s.R = MatrixXd::Identity(1, 1);
  EXPECT_THROW(data::simulate_linear(s, 10, 1, 0), gpssm::ShapeError);
  s.B = MatrixXd::Zero(2, 1);
  s.Q(0, 0) = -1.0;
  EXPECT_THROW(data::simulate_linear(s, 10, 1, 0), gpssm::NumericError);
}

TEST(Mss, KnownRadii) {
  const auto id = data::mss_check(MatrixXd::Identity(3, 3));
  EXPECT_NEAR(id.spectral_radius, 1.0, 1e-12);
  EXPECT_FALSE(id.is_mss);
  const auto diag = data::mss_check(Eigen::Vector2d(0.3, 0.9).asDiagonal().toDenseMatrix());
  EXPECT_NEAR(diag.spectral_radius, 0.9, 1e-12);
  EXPECT_TRUE(diag.is_mss);
  const MatrixXd rotation = (MatrixXd(2, 2) << 0.0, -1.1, 1.1, 0.0).finished();
  EXPECT_NEAR(data::mss_check(rotation).spectral_radius, 1.1, 1e-12);
}

TEST(Mss, MatchesCharacteristicPolynomialOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const MatrixXd a = random_matrix(rng, 4, 4, -1.0, 1.0);
    const double expected = companion_radius(a);
    EXPECT_NEAR(data::mss_check(a).spectral_radius, expected, 1e-8) << a;
  }
}

TEST(Subsequences, FullLengthWindowIsWholeTrajectory) {
  std::mt19937_64 rng(9);
  const std::vector<data::Trajectory> trajs{
      make_traj(random_matrix(rng, 25, 1), random_matrix(rng, 25, 2))};
  data::SubsequenceSampler sampler(trajs, 25, 3, 1);
  for (const auto& w : sampler.next()) {
    EXPECT_EQ(w.start, 0);
    EXPECT_EQ(w.y, trajs[0].y);
  }
  EXPECT_THROW(data::SubsequenceSampler(trajs, 26, 1, 1), gpssm::ConfigError);
}

TEST(Subsequences, WindowsStayInBounds) {
  std::mt19937_64 rng(10);
  const std::vector<data::Trajectory> trajs{
      make_traj(random_matrix(rng, 100, 1), random_matrix(rng, 100, 1))};
  data::SubsequenceSampler sampler(trajs, 30, 4, 2);
  for (int rep = 0; rep < 50; ++rep) {
    const auto batch = sampler.next();
    ASSERT_EQ(batch.size(), 4u);
    for (const auto& w : batch) {
      EXPECT_GE(w.start, 0);
      EXPECT_LE(w.start + 30, 100);
      EXPECT_EQ(w.y, trajs[0].y.middleRows(w.start, 30));
    }
  }
}

TEST(Subsequences, StartsAreUniform) {
  std::mt19937_64 rng(11);
  const std::vector<data::Trajectory> trajs{
      make_traj(random_matrix(rng, 100, 1), random_matrix(rng, 100, 1))};
  data::SubsequenceSampler sampler(trajs, 30, 100, 3);
  std::vector<double> counts(71, 0.0);
  for (int rep = 0; rep < 100; ++rep) {
    for (const auto& w : sampler.next()) counts[static_cast<std::size_t>(w.start)] += 1.0;
  }
  const double expected = 10000.0 / 71.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(70.0);
  EXPECT_LT(chi2, boost::math::quantile(dist, 0.99));
}

TEST(Subsequences, DeterministicPerSeed) {
  std::mt19937_64 rng(12);
  const std::vector<data::Trajectory> trajs{
      make_traj(random_matrix(rng, 60, 1), random_matrix(rng, 60, 1)),
      make_traj(random_matrix(rng, 40, 1), random_matrix(rng, 40, 1))};
  data::SubsequenceSampler a(trajs, 10, 5, 9);
  data::SubsequenceSampler b(trajs, 10, 5, 9);
  for (int rep = 0; rep < 5; ++rep) {
    const auto wa = a.next();
    const auto wb = b.next();
    for (std::size_t i = 0; i < wa.size(); ++i) {
      EXPECT_EQ(wa[i].trajectory, wb[i].trajectory);
      EXPECT_EQ(wa[i].start, wb[i].start);
    }
  }
}
