#include <cmath>

#include <gtest/gtest.h>

#include "test_helpers.hpp"

namespace kernelctrl {
namespace {

using testing::dense_inverse_beta;
using testing::random_sample;

TransitionSample single_transition() {
  TransitionSample s;
  s.states = PointSet(1, 2);
  s.states << 0.2, -0.4;
  s.actions = PointSet(1, 1);
  s.actions << 0.5;
  s.successors = PointSet(1, 2);
  s.successors << 0.3, -0.1;
  return s;
}

TEST(EmbeddingFit, SingleSampleFactor) {
  const auto emb = Embedding::fit(single_transition(), KernelSpec::gaussian(1.0), 1.0);
  const Eigen::MatrixXd l = emb.factor();
  ASSERT_EQ(l.rows(), 1);
  EXPECT_NEAR(l(0, 0), std::sqrt(2.0), 1e-15);
}

TEST(EmbeddingFit, DuplicateRowsStayPositiveDefinite) {
  TransitionSample s;
  s.states = PointSet::Constant(2, 2, 0.3);
  s.actions = PointSet::Constant(2, 1, -0.2);
  s.successors = PointSet::Zero(2, 2);
  const auto emb = Embedding::fit(s, KernelSpec::gaussian(1.0), 0.1);
  const Eigen::MatrixXd l = emb.factor();
  Eigen::Matrix2d expected;
  expected << 1.2, 1.0, 1.0, 1.2;
  EXPECT_LE((l * l.transpose() - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(emb.jitter(), 0.0);
}

TEST(EmbeddingFit, FactorReconstructsRegularizedGram) {
  SeededRng rng(7);
  const auto s = random_sample(200, 2, 1, rng);
  const auto k = KernelSpec::gaussian(0.5);
  const auto emb = Embedding::fit(s, k);  // lambda = 1/M
  EXPECT_DOUBLE_EQ(emb.lambda(), 1.0 / 200);
  Eigen::MatrixXd g(200, 200);
  for (Eigen::Index i = 0; i < 200; ++i)
    for (Eigen::Index j = 0; j < 200; ++j)
      g(i, j) = eval_kernel(k, s.states.row(i).transpose(), s.states.row(j).transpose()) *
                eval_kernel(k, s.actions.row(i).transpose(), s.actions.row(j).transpose());
  g.diagonal().array() += 1.0;  // lambda M = 1
  const Eigen::MatrixXd l = emb.factor();
  EXPECT_LE((l * l.transpose() - g).cwiseAbs().maxCoeff(), 1e-8 * 200);
  EXPECT_TRUE(l.isLowerTriangular());
}

TEST(EmbeddingFit, RejectsBadInputs) {
  EXPECT_THROW(Embedding::fit(single_transition(), KernelSpec::gaussian(1.0), 0.0),
               InvalidArgument);
  EXPECT_THROW(Embedding::fit(single_transition(), KernelSpec::gaussian(1.0), -1.0),
               InvalidArgument);
  TransitionSample empty{PointSet(0, 2), PointSet(0, 1), PointSet(0, 2)};
  EXPECT_THROW(Embedding::fit(empty, KernelSpec::gaussian(1.0)), InvalidArgument);
}

TEST(EmbeddingFit, JitterRetryRescuesNearSingularGram) {
  TransitionSample s;
  s.states = PointSet::Constant(2, 1, 0.0);
  s.actions = PointSet::Constant(2, 1, 0.0);
  s.successors = PointSet::Zero(2, 1);
  const auto emb = Embedding::fit(s, KernelSpec::gaussian(1.0), 1e-300);
  EXPECT_GT(emb.jitter(), 0.0);
}

TEST(FactorRegularized, ReportsFailingPivot) {
  Eigen::MatrixXd a(3, 3);
  a << 1, 0, 0, 0, 1, 2, 0, 2, 1;
  Eigen::LLT<Eigen::MatrixXd> llt;
  try {
    detail::factor_regularized(a, 0.0, llt, "test");
    FAIL() << "expected FactorizationError";
  } catch (const FactorizationError& e) {
    EXPECT_EQ(e.pivot(), 2u);
  }
}

TEST(Beta, SingleSampleHandValues) {
  const auto s = single_transition();
  const auto emb = Embedding::fit(s, KernelSpec::gaussian(1.0), 1.0);
  const Eigen::VectorXd b = emb.beta(s.states.row(0).transpose(), s.actions.row(0).transpose());
  ASSERT_EQ(b.size(), 1);
  EXPECT_NEAR(b[0], 0.5, 1e-15);

  const auto interp = Embedding::fit(s, KernelSpec::gaussian(1.0), 1e-12);
  EXPECT_NEAR(interp.beta(s.states.row(0).transpose(), s.actions.row(0).transpose())[0], 1.0,
              1e-9);
}

TEST(Beta, MatchesDenseInverseOracle) {
  SeededRng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = static_cast<Eigen::Index>(2 + rng.uniform(0, 48));
    const auto s = random_sample(m, 3, 2, rng);
    const auto k = KernelSpec::gaussian(rng.uniform(0.3, 1.5));
    const auto l = KernelSpec::abel(rng.uniform(0.3, 1.5));
    const double lambda = rng.uniform(1e-3, 1e-1);
    const auto emb = Embedding::fit(s, k, l, lambda);
    const Eigen::VectorXd x = testing::random_points(1, 3, rng).row(0).transpose();
    const Eigen::VectorXd u = testing::random_points(1, 2, rng).row(0).transpose();
    const Eigen::VectorXd oracle = dense_inverse_beta(s, k, l, lambda, x, u);
    EXPECT_LE((emb.beta(x, u) - oracle).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Beta, DimensionMismatchThrows) {
  const auto emb = Embedding::fit(single_transition(), KernelSpec::gaussian(1.0));
  EXPECT_THROW(emb.beta(Eigen::Vector3d::Zero(), Eigen::VectorXd::Zero(1)), InvalidArgument);
  EXPECT_THROW(emb.beta(Eigen::Vector2d::Zero(), Eigen::VectorXd::Zero(2)), InvalidArgument);
}

TEST(Beta, ShrinksWithRegularization) {
  SeededRng rng(12);
  const auto s = random_sample(80, 2, 1, rng);
  const auto k = KernelSpec::gaussian(0.6);
  std::vector<Embedding> fits;
  for (double lambda : {1e-3, 1e-2, 1e-1, 1.0}) fits.push_back(Embedding::fit(s, k, lambda));
  for (int q = 0; q < 10; ++q) {
    const Eigen::VectorXd x = testing::random_points(1, 2, rng).row(0).transpose();
    const Eigen::VectorXd u = testing::random_points(1, 1, rng).row(0).transpose();
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& e : fits) {
      const double norm = e.beta(x, u).norm();
      EXPECT_LE(norm, prev + 1e-12);
      prev = norm;
    }
  }
}

TEST(Expectation, LinearityAndHandValue) {
  const auto s = single_transition();
  const auto emb = Embedding::fit(s, KernelSpec::gaussian(1.0), 1.0);
  const Eigen::VectorXd x = s.states.row(0).transpose(), u = s.actions.row(0).transpose();
  EXPECT_EQ(emb.expectation(Eigen::VectorXd::Zero(1), x, u), 0.0);
  EXPECT_NEAR(emb.expectation(Eigen::VectorXd::Constant(1, 4.0), x, u), 2.0, 1e-15);
  EXPECT_THROW(emb.expectation(Eigen::VectorXd::Zero(2), x, u), InvalidArgument);
}

TEST(Expectation, RecoversLinearGaussianConditionalMean) {
  const SystemSpec sys = make_system("integrator");
  SeededRng rng(1);
  const Box xbox = Box::cube(2, -1.0, 1.0), ubox = Box::cube(1, -1.0, 1.0);
  auto s = draw_transitions(sys, xbox, ubox, 2000, rng);
  const Eigen::VectorXd f = s.successors.col(0);
  const auto emb = Embedding::fit(s, KernelSpec::gaussian(1.0));
  double err = 0.0;
  for (int q = 0; q < 100; ++q) {
    const Eigen::VectorXd x = uniform_box(Box::cube(2, -0.8, 0.8), 1, rng).row(0).transpose();
    const Eigen::VectorXd u = uniform_box(Box::cube(1, -0.8, 0.8), 1, rng).row(0).transpose();
    err += std::abs(emb.expectation(f, x, u) - linear_gaussian_mean(sys, x, u)[0]);
  }
  EXPECT_LE(err / 100.0, 0.05);
}

TEST(BetaBatch, EmptyQueries) {
  const auto emb = Embedding::fit(single_transition(), KernelSpec::gaussian(1.0));
  const Eigen::MatrixXd b = emb.beta_batch(PointSet(0, 2), PointSet(0, 1), 4);
  EXPECT_EQ(b.rows(), 1);
  EXPECT_EQ(b.cols(), 0);
  EXPECT_THROW(emb.beta_batch(PointSet(0, 2), PointSet(0, 1), 0), InvalidArgument);
}

TEST(BetaBatch, ChunkInvariance) {
  SeededRng rng(31);
  const auto s = random_sample(150, 2, 1, rng);
  const auto emb = Embedding::fit(s, KernelSpec::gaussian(0.5));
  const PointSet qx = testing::random_points(100, 2, rng), qu = testing::random_points(100, 1, rng);
  const Eigen::MatrixXd full = emb.beta_batch(qx, qu, 100);
  for (Eigen::Index chunk : {1, 7}) {
    EXPECT_LE((emb.beta_batch(qx, qu, chunk) - full).cwiseAbs().maxCoeff(), 1e-10);
  }
  const Eigen::MatrixXd one = emb.beta_batch(qx.topRows(1), qu.topRows(1), 1);
  EXPECT_TRUE((one.col(0).array() == emb.beta(qx.row(0).transpose(), qu.row(0).transpose()).array()).all());
}

// The dual route alpha . z must agree with fvals . beta per query.
TEST(ExpectationGrid, AgreesWithBetaRoute) {
  SeededRng rng(8);
  const auto s = random_sample(120, 2, 1, rng);
  const auto emb = Embedding::fit(s, KernelSpec::gaussian(0.4), KernelSpec::gaussian(0.8), 0.01);
  const Eigen::VectorXd f = testing::random_points(120, 1, rng).col(0);
  const PointSet qs = testing::random_points(9, 2, rng), qa = testing::random_points(4, 1, rng);
  const Eigen::MatrixXd cached = emb.expectation_grid(f, emb.query_grid(qs, qa));
  const Eigen::MatrixXd chunked = emb.expectation_grid(f, qs, qa, 2);
  for (Eigen::Index i = 0; i < qs.rows(); ++i) {
    for (Eigen::Index j = 0; j < qa.rows(); ++j) {
      const double ref = emb.expectation(f, qs.row(i).transpose(), qa.row(j).transpose());
      EXPECT_NEAR(cached(i, j), ref, 1e-10);
      EXPECT_NEAR(chunked(i, j), ref, 1e-10);
    }
  }
}

}  // namespace
}  // namespace kernelctrl
