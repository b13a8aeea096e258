#include <limits>
#include <optional>
#include <vector>

#include <gtest/gtest.h>

#include "test_helpers.hpp"

namespace kernelctrl {
namespace {

void expect_feasible(const SimplexLP& lp, const LpSolution& sol) {
  EXPECT_NEAR(sol.weights.sum(), 1.0, 1e-9);
  EXPECT_GE(sol.weights.minCoeff(), -1e-12);
  if (lp.D.rows() > 0) EXPECT_LE((lp.D * sol.weights).maxCoeff(), 1e-9);
}

TEST(SolveLp, UnconstrainedPicksMinimumCost) {
  SimplexLP lp{Eigen::Vector3d(3, 1, 2), Eigen::MatrixXd(0, 3)};
  const auto sol = solve_lp(lp);
  ASSERT_TRUE(sol);
  EXPECT_EQ(sol->weights, Eigen::Vector3d(0, 1, 0));
  EXPECT_EQ(sol->objective, 1.0);
}

TEST(SolveLp, TiesResolveToLowestIndex) {
  SimplexLP lp{Eigen::Vector4d(2, 1, 1, 1), Eigen::MatrixXd(0, 4)};
  const auto sol = solve_lp(lp);
  ASSERT_TRUE(sol);
  EXPECT_EQ(sol->weights[1], 1.0);
}

TEST(SolveLp, OrderingConstraintSplitsMass) {
  Eigen::MatrixXd d(1, 2);
  d << 1, -1;
  SimplexLP lp{Eigen::Vector2d(0, 1), d};
  const auto sol = solve_lp(lp);
  ASSERT_TRUE(sol);
  EXPECT_NEAR(sol->weights[0], 0.5, 1e-12);
  EXPECT_NEAR(sol->weights[1], 0.5, 1e-12);
  EXPECT_NEAR(sol->objective, 0.5, 1e-12);
}

TEST(SolveLp, PositiveRowIsInfeasible) {
  Eigen::MatrixXd d(1, 3);
  d << 1, 1, 1;
  EXPECT_FALSE(solve_lp({Eigen::Vector3d(0.3, -2, 5), d}));
}

TEST(SolveLp, RejectsMalformedInput) {
  EXPECT_THROW(solve_lp({Eigen::VectorXd(0), Eigen::MatrixXd(0, 0)}), InvalidArgument);
  EXPECT_THROW(solve_lp({Eigen::Vector2d(1, 2), Eigen::MatrixXd::Zero(1, 3)}), InvalidArgument);
}

TEST(SolveLp, RedundantEqualityRow) {
  // Both rows together force g0 = g1 = 0 fractions of a degenerate setup.
  Eigen::MatrixXd d(2, 2);
  d << 1, 1, -1, -1;  // sum <= 0 and sum >= 0 cannot hold with sum = 1
  EXPECT_FALSE(solve_lp({Eigen::Vector2d(1, 0), d}));
}

TEST(SolveLpProperty, MatchesVertexEnumeration) {
  SeededRng rng(20240611);
  int feasible = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto P = static_cast<Eigen::Index>(1 + rng.uniform(0, 6));
    const auto p = static_cast<Eigen::Index>(rng.uniform(0, 4));
    SimplexLP lp{Eigen::VectorXd(P), Eigen::MatrixXd(p, P)};
    for (Eigen::Index j = 0; j < P; ++j) lp.c[j] = rng.uniform(-1, 1);
    for (Eigen::Index r = 0; r < p; ++r)
      for (Eigen::Index j = 0; j < P; ++j) lp.D(r, j) = rng.uniform(-1, 1);
    const auto oracle = testing::lp_vertex_oracle(lp);
    const auto sol = solve_lp(lp);
    ASSERT_EQ(oracle.has_value(), sol.has_value()) << "trial " << trial;
    if (!sol) continue;
    ++feasible;
    EXPECT_NEAR(sol->objective, *oracle, 1e-7) << "trial " << trial;
    expect_feasible(lp, *sol);
  }
  EXPECT_GT(feasible, 50);
}

TEST(SolveLpProperty, PositiveCostScalingKeepsSolution) {
  SeededRng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index P = 5, p = 2;
    SimplexLP lp{Eigen::VectorXd(P), Eigen::MatrixXd(p, P)};
    for (Eigen::Index j = 0; j < P; ++j) lp.c[j] = rng.uniform(-1, 1);
    for (Eigen::Index r = 0; r < p; ++r)
      for (Eigen::Index j = 0; j < P; ++j) lp.D(r, j) = rng.uniform(-1, 1);
    const auto base = solve_lp(lp);
    if (!base) continue;
    for (double scale : {0.37, 4.0, 1234.5}) {
      SimplexLP scaled{lp.c * scale, lp.D};
      const auto sol = solve_lp(scaled);
      ASSERT_TRUE(sol);
      EXPECT_LE((sol->weights - base->weights).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

}  // namespace
}  // namespace kernelctrl
