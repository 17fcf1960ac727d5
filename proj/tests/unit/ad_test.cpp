#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gpssm/ad/linalg.hpp"
#include "gpssm/ad/tape.hpp"
#include "gpssm/error.hpp"
#include "support/random.hpp"

namespace ad = gpssm::ad;
using ad::Array;
using gpssm::testing::random_matrix;
using gpssm::testing::random_spd;

namespace {

Array vec(std::initializer_list<double> xs) {
  Array a(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) a(i++, 0) = x;
  return a;
}

}  // namespace

TEST(Tape, EvalIdentityPlusZero) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(vec({1, 2}));
  const ad::Var y = x + 0.0;
  EXPECT_EQ(ad::eval(tape, {}, y), vec({1, 2}));
}

TEST(Tape, SumOfSquaresValueAndGradient) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(vec({3, 4}));
  const ad::Var y = ad::sum(x * x);
  EXPECT_DOUBLE_EQ(y.scalar(), 25.0);
  const std::vector<ad::Var> wrt{x};
  const auto g = ad::gradient(tape, y, wrt);
  EXPECT_EQ(g.at(x.id()), vec({6, 8}));
}

TEST(Tape, LogdetViaCholeskyMatchesDeterminant) {
  Array a(2, 2);
  a << 4, 0, 0, 9;
  ad::Tape tape;
  const ad::Var A = tape.leaf(a);
  const ad::Var logdet = ad::logdet_from_cholesky(ad::cholesky(A));
  EXPECT_NEAR(logdet.scalar(), std::log(a.determinant()), 1e-12);
  EXPECT_NEAR(logdet.scalar(), 3.5835189, 1e-6);
}

TEST(Tape, LogdetGradientIsInverse) {
  const Array a = 2.0 * Array::Identity(2, 2);
  ad::Tape tape;
  const ad::Var A = tape.leaf(a);
  const ad::Var logdet = ad::logdet_from_cholesky(ad::cholesky(A));
  const std::vector<ad::Var> wrt{A};
  const Array g = ad::gradient(tape, logdet, wrt).at(A.id());
  EXPECT_TRUE(g.isApprox(0.5 * Array::Identity(2, 2), 1e-14));
}

TEST(Tape, ReplayUsesOverridesAndIsDeterministic) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(vec({1, 2}));
  const ad::Var y = ad::sum(ad::exp(x) * x);
  const ad::LeafValues leaves{{x.id(), vec({0.5, -0.25})}};
  const Array first = ad::eval(tape, leaves, y);
  const Array second = ad::eval(tape, leaves, y);
  EXPECT_EQ(first(0, 0), second(0, 0));
  EXPECT_DOUBLE_EQ(first(0, 0), std::exp(0.5) * 0.5 + std::exp(-0.25) * -0.25);
  // Replaying with the recorded leaves reproduces every intermediate bit-for-bit.
  const auto values = tape.replay({});
  for (std::size_t i = 0; i < values.size(); ++i) {
    EXPECT_EQ(values[i], tape.value(static_cast<int>(i)));
  }
}

TEST(Tape, ShapeMismatchThrows) {
  ad::Tape tape;
  const ad::Var a = tape.leaf(Array::Ones(2, 1));
  const ad::Var b = tape.leaf(Array::Ones(3, 1));
  EXPECT_THROW(a + b, gpssm::ShapeError);
  EXPECT_THROW(ad::matmul(a, b), gpssm::ShapeError);
  EXPECT_THROW(ad::eval(tape, {{a.id(), Array::Ones(3, 1)}}, a), gpssm::ShapeError);
}

TEST(Tape, NonFiniteRejectedInCheckedMode) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(vec({-1.0}));
  EXPECT_THROW(ad::log(x), gpssm::NumericError);
  EXPECT_THROW(tape.leaf(vec({NAN})), gpssm::NumericError);

  ad::Tape unchecked(false);
  const ad::Var y = unchecked.leaf(vec({-1.0}));
  EXPECT_TRUE(std::isnan(ad::sqrt(y).scalar()));
}

TEST(Tape, GradientRequiresScalarOutput) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(vec({1, 2}));
  const ad::Var y = x * x;
  const std::vector<ad::Var> wrt{x};
  EXPECT_THROW(ad::gradient(tape, y, wrt), gpssm::ShapeError);
}

TEST(Tape, ScalarBroadcastGradientReduces) {
  ad::Tape tape;
  const ad::Var s = tape.leaf(vec({2.0}));
  const ad::Var x = tape.leaf(vec({1, 2, 3}));
  const ad::Var y = ad::sum(s * x);
  const std::vector<ad::Var> wrt{s, x};
  const auto g = ad::gradient(tape, y, wrt);
  EXPECT_DOUBLE_EQ(g.at(s.id())(0, 0), 6.0);
  EXPECT_EQ(g.at(x.id()), vec({2, 2, 2}));
}

TEST(CholeskySolve, IdentityAndDiagonal) {
  const Array b = vec({1.5, -2.0});
  EXPECT_EQ(ad::cholesky_solve(Array::Identity(2, 2), b), b);
  Array a(2, 2);
  a << 4, 0, 0, 9;
  const Array x = ad::cholesky_solve(a, vec({1, 1}));
  EXPECT_NEAR(x(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(x(1, 0), 1.0 / 9.0, 1e-15);
}

TEST(CholeskySolve, MultiplyBackOnRandomSpd) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Array a = random_spd(rng, 5);
    const Array b = random_matrix(rng, 5, 3);
    const Array x = ad::cholesky_solve(a, b);
    EXPECT_LT((a * x - b).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(CholeskySolve, ResidualBoundForModerateConditioning) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    // Eigenvalues spread over [1, 1e5] keep the condition number < 1e6.
    const Eigen::HouseholderQR<Array> qr(random_matrix(rng, 6, 6));
    const Array q = qr.householderQ();
    Eigen::VectorXd eig(6);
    for (int i = 0; i < 6; ++i) eig(i) = std::pow(10.0, 5.0 * i / 5.0);
    const Array a = q * eig.asDiagonal() * q.transpose();
    const Array b = random_matrix(rng, 6, 2);
    const Array x = ad::cholesky_solve(a, b);
    EXPECT_LT((a * x - b).cwiseAbs().maxCoeff(), 1e-8 * b.cwiseAbs().maxCoeff());
  }
}

TEST(CholeskySolve, JitterEscalatesOnSemidefinite) {
  // Rank-one PSD matrix: exact factorization fails, jitter rescues it.
  Array a(2, 2);
  a << 1, 1, 1, 1;
  double jitter = -1;
  const Array l = ad::cholesky_lower(a, 0.0, &jitter);
  EXPECT_GT(jitter, 0.0);
  EXPECT_LE(jitter, 1e-2);
  Array neg(2, 2);
  neg << -1, 0, 0, -1;
  EXPECT_THROW(ad::cholesky_lower(neg, 0.0), gpssm::NumericError);
}

TEST(FdCheck, LinearTapeIsExact) {
  std::mt19937_64 rng(3);
  ad::Tape tape;
  const ad::Var x = tape.leaf(random_matrix(rng, 4, 1));
  const ad::Var w = tape.constant(random_matrix(rng, 1, 4));
  const ad::Var y = ad::sum(ad::matmul(w, x) * 3.0 + 1.0);
  const std::vector<ad::Var> wrt{x};
  EXPECT_LT(ad::fd_check(tape, {}, y, wrt), 1e-10);
}

TEST(FdCheck, ExpLogComposite) {
  std::mt19937_64 rng(5);
  ad::Tape tape;
  const ad::Var x = tape.leaf(random_matrix(rng, 3, 2, 0.5, 2.0));
  const ad::Var y = ad::sum(ad::log(ad::exp(x) + x * x) * ad::sqrt(x));
  const std::vector<ad::Var> wrt{x};
  EXPECT_LT(ad::fd_check(tape, {}, y, wrt, 1e-5), 1e-5);
}

TEST(FdCheck, CholeskyLogdetOnRandomSpd) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    ad::Tape tape;
    const ad::Var a = tape.leaf(random_spd(rng, 4));
    const ad::Var y = ad::logdet_from_cholesky(ad::cholesky(a));
    const std::vector<ad::Var> wrt{a};
    EXPECT_LT(ad::fd_check(tape, {}, y, wrt), 1e-4);
  }
}

// Every primitive, checked against central differences on 100 seeded instances.
class PrimitiveGradient : public ::testing::TestWithParam<int> {};

namespace {

using Builder = std::function<ad::Var(ad::Tape&, std::mt19937_64&, std::vector<ad::Var>&)>;

// Projects a non-scalar result to a scalar with fixed random weights so the
// whole adjoint is exercised.
ad::Var project(ad::Tape& tape, std::mt19937_64& rng, ad::Var v) {
  const ad::Var w = tape.constant(random_matrix(rng, v.rows(), v.cols()));
  return ad::sum(v * w);
}

const std::vector<std::pair<const char*, Builder>>& primitive_builders() {
  static const std::vector<std::pair<const char*, Builder>> builders = {
      {"add", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         w = {t.leaf(random_matrix(r, 3, 2)), t.leaf(random_matrix(r, 3, 2))};
         return project(t, r, w[0] + w[1]);
       }},
      {"sub_scalar", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         w = {t.leaf(random_matrix(r, 3, 2)), t.leaf(random_matrix(r, 1, 1))};
         return project(t, r, w[0] - w[1]);
       }},
      {"mul", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         w = {t.leaf(random_matrix(r, 2, 3)), t.leaf(random_matrix(r, 2, 3))};
         return project(t, r, w[0] * w[1]);
       }},
      {"div", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         w = {t.leaf(random_matrix(r, 2, 3)), t.leaf(random_matrix(r, 2, 3, 0.5, 2.0))};
         return project(t, r, w[0] / w[1]);
       }},
      {"exp_log_sqrt", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         w = {t.leaf(random_matrix(r, 3, 1, 0.2, 2.0))};
         return project(t, r, ad::log(w[0]) + ad::exp(w[0]) - ad::sqrt(w[0]) + ad::square(w[0]));
       }},
      {"matmul_transpose", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         w = {t.leaf(random_matrix(r, 3, 4)), t.leaf(random_matrix(r, 2, 4))};
         return project(t, r, ad::matmul(w[0], ad::transpose(w[1])));
       }},
      {"reductions", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         w = {t.leaf(random_matrix(r, 3, 4))};
         return project(t, r, ad::row_sum(w[0])) + project(t, r, ad::col_sum(w[0])) +
                ad::sum(w[0]);
       }},
      {"cholesky", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         w = {t.leaf(random_spd(r, 4))};
         return project(t, r, ad::cholesky(w[0]));
       }},
      {"tri_solve", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         Array l = random_matrix(r, 4, 4).triangularView<Eigen::Lower>();
         l.diagonal().array() = l.diagonal().array().abs() + 1.0;
         w = {t.leaf(l), t.leaf(random_matrix(r, 4, 2))};
         return project(t, r, ad::tri_solve(w[0], w[1], false));
       }},
      {"tri_solve_transposed", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         Array l = random_matrix(r, 4, 4).triangularView<Eigen::Lower>();
         l.diagonal().array() = l.diagonal().array().abs() + 1.0;
         w = {t.leaf(l), t.leaf(random_matrix(r, 4, 3))};
         return project(t, r, ad::tri_solve(w[0], w[1], true));
       }},
      {"slice_concat", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         w = {t.leaf(random_matrix(r, 4, 3)), t.leaf(random_matrix(r, 2, 3))};
         const ad::Var s = ad::slice(w[0], 1, 0, 2, 3);
         const std::vector<ad::Var> rows{s, w[1]};
         const ad::Var v = ad::vconcat(rows);
         const std::vector<ad::Var> cols{v, ad::col(v, 1)};
         return project(t, r, ad::hconcat(cols));
       }},
      {"diag", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         w = {t.leaf(random_matrix(r, 3, 3)), t.leaf(random_matrix(r, 3, 1))};
         return project(t, r, ad::diag_matrix(ad::diag_part(w[0]) * w[1]));
       }},
      {"sq_dist", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         w = {t.leaf(random_matrix(r, 4, 2)), t.leaf(random_matrix(r, 3, 2))};
         return project(t, r, ad::sq_dist(w[0], w[1]));
       }},
      {"repeat", [](ad::Tape& t, std::mt19937_64& r, std::vector<ad::Var>& w) {
         w = {t.leaf(random_matrix(r, 1, 3)), t.leaf(random_matrix(r, 2, 1))};
         return project(t, r, ad::repeat_rows(w[0], 2)) + project(t, r, ad::repeat_cols(w[1], 4));
       }},
  };
  return builders;
}

}  // namespace

TEST_P(PrimitiveGradient, MatchesCentralDifferences) {
  const auto& [name, build] = primitive_builders()[static_cast<std::size_t>(GetParam())];
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed) * 7919 + 1);
    ad::Tape tape;
    std::vector<ad::Var> wrt;
    const ad::Var y = build(tape, rng, wrt);
    const double err = ad::fd_check(tape, {}, y, wrt, 1e-5);
    ASSERT_LT(err, 1e-4) << name << " seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradient,
                         ::testing::Range(0, static_cast<int>(primitive_builders().size())));
