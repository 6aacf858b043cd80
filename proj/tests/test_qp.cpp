#include "swarmnet/minvo.hpp"
#include "swarmnet/qp.hpp"

#include "qp_oracle.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace swarmnet;

using test::KktCheck;
using test::kkt_on_active_set;
using test::random_state;

TEST(QpAssemble, ZeroStatePinsFirstThreeControlPoints)
{
  const KnotVector knots = build_clamped_knots(0.0, 1.0, kPlannerCps);
  std::mt19937_64 rng(21);
  const Eigen::VectorXd q_star = flatten_cps(test::random_cps(rng));
  const QpProblem prob = assemble(q_star, InitialState{}, Limits{}, std::nullopt, knots);
  ASSERT_EQ(prob.eq_matrix.rows(), 9);
  const QpSolution sol = solve(prob);
  ASSERT_EQ(sol.status, QpStatus::optimal);
  EXPECT_LT(sol.q.head(9).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(QpAssemble, InequalityRowCount)
{
  const KnotVector knots = build_clamped_knots(0.0, 1.0, kPlannerCps);
  const Eigen::VectorXd q_star = Eigen::VectorXd::Zero(30);
  const QpProblem prob = assemble(q_star, InitialState{}, Limits{}, std::nullopt, knots);
  // 7 segments x 3 velocity CPs and 7 x 2 acceleration CPs, 3 axes, two sides
  EXPECT_EQ(prob.ineq_matrix.rows(), 2 * 21 * 3 + 2 * 14 * 3);
  const QpProblem with_g = assemble(q_star, InitialState{}, Limits{}, CollisionConstraint{Eigen::VectorXd::Ones(30)}, knots);
  EXPECT_EQ(with_g.ineq_matrix.rows(), prob.ineq_matrix.rows() + 1);
}

TEST(QpAssemble, DimensionMismatchThrows)
{
  const KnotVector knots = build_clamped_knots(0.0, 1.0, kPlannerCps);
  EXPECT_THROW(assemble(Eigen::VectorXd::Zero(29), InitialState{}, Limits{}, std::nullopt, knots), std::invalid_argument);
  EXPECT_THROW(assemble(Eigen::VectorXd::Zero(30), InitialState{}, Limits{}, CollisionConstraint{Eigen::VectorXd::Zero(3)}, knots),
               std::invalid_argument);
  Limits bad;
  bad.v_max(1) = 0.0;
  EXPECT_THROW(assemble(Eigen::VectorXd::Zero(30), InitialState{}, bad, std::nullopt, knots), std::invalid_argument);
}

TEST(QpSolve, ZeroConstraintIsVacuous)
{
  const KnotVector knots = build_clamped_knots(0.0, 1.0, kPlannerCps);
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial)
  {
    const Eigen::VectorXd q_star = flatten_cps(test::random_cps(rng));
    const InitialState x0 = random_state(rng, Limits{});
    const QpSolution a = solve(assemble(q_star, x0, Limits{}, std::nullopt, knots));
    const QpSolution b = solve(assemble(q_star, x0, Limits{}, CollisionConstraint{Eigen::VectorXd::Zero(30)}, knots));
    ASSERT_EQ(a.status, QpStatus::optimal);
    ASSERT_EQ(b.status, QpStatus::optimal);
    EXPECT_LT((a.q - b.q).norm(), 1e-9);
  }
}

TEST(QpSolve, FeasibleGuessIsOptimal)
{
  const KnotVector knots = build_clamped_knots(0.0, 1.0, kPlannerCps);
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial)
  {
    const InitialState x0 = random_state(rng, Limits{});
    const QpSolution first = solve(assemble(flatten_cps(test::random_cps(rng)), x0, Limits{}, std::nullopt, knots));
    ASSERT_EQ(first.status, QpStatus::optimal);
    const QpSolution again = solve(assemble(first.q, x0, Limits{}, std::nullopt, knots));
    ASSERT_EQ(again.status, QpStatus::optimal);
    EXPECT_LE(again.objective, 1e-10);
  }
}

TEST(QpSolve, EqualityOnlyProjection)
{
  QpProblem prob;
  prob.q_star = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0);
  prob.eq_matrix = Eigen::MatrixXd::Zero(1, 5);
  prob.eq_matrix(0, 0) = 1.0;
  prob.eq_rhs = Eigen::VectorXd::Zero(1);
  prob.ineq_matrix.resize(0, 5);
  prob.ineq_rhs.resize(0);
  const QpSolution sol = solve(prob);
  ASSERT_EQ(sol.status, QpStatus::optimal);
  Eigen::VectorXd expected = prob.q_star;
  expected(0) = 0.0;
  EXPECT_LT((sol.q - expected).norm(), 1e-14);
  EXPECT_NEAR(sol.objective, 1.0, 1e-14);
}

TEST(QpSolve, MatchesKktOnActiveSet)
{
  const KnotVector knots = build_clamped_knots(0.0, 1.0, kPlannerCps);
  std::mt19937_64 rng(24);
  std::normal_distribution<double> n01;
  int solved = 0;
  for (int trial = 0; trial < 100; ++trial)
  {
    const Eigen::VectorXd q_star = flatten_cps(test::random_cps(rng, kPlannerCps, 4.0));
    const InitialState x0 = random_state(rng, Limits{});
    std::optional<CollisionConstraint> g;
    if (trial % 2 == 0)
    {
      Eigen::VectorXd gv(30);
      for (int i = 0; i < 30; ++i) gv(i) = n01(rng);
      gv.head(9).setZero();  // keep the pinned block out so the instance stays feasible
      g = CollisionConstraint{gv};
    }
    const QpProblem prob = assemble(q_star, x0, Limits{}, g, knots);
    const QpSolution sol = solve(prob);
    ASSERT_EQ(sol.status, QpStatus::optimal) << "trial " << trial;
    ++solved;
    EXPECT_LE(kkt_residual(prob, sol), 1e-6);
    const KktCheck ref = kkt_on_active_set(prob, sol);
    EXPECT_NEAR(sol.objective, ref.objective, 1e-6 * std::max(1.0, ref.objective));
    EXPECT_GE(ref.min_ineq_multiplier, -1e-8);
    EXPECT_LE(ref.max_violation, 1e-6);
  }
  EXPECT_EQ(solved, 100);
}

TEST(QpSolve, ProjectionProperty)
{
  const KnotVector knots = build_clamped_knots(0.0, 1.0, kPlannerCps);
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 30; ++trial)
  {
    const InitialState x0 = random_state(rng, Limits{});
    const Eigen::VectorXd q_star = flatten_cps(test::random_cps(rng));
    const QpSolution sol = solve(assemble(q_star, x0, Limits{}, std::nullopt, knots));
    ASSERT_EQ(sol.status, QpStatus::optimal);
    for (int k = 0; k < 10; ++k)
    {
      const QpSolution other = solve(assemble(flatten_cps(test::random_cps(rng)), x0, Limits{}, std::nullopt, knots));
      ASSERT_EQ(other.status, QpStatus::optimal);
      EXPECT_LE((sol.q - q_star).norm(), (other.q - q_star).norm() + 1e-6);
    }
  }
}

TEST(QpSolve, DerivativeBoundsHoldOnDenseSamples)
{
  const KnotVector knots = build_clamped_knots(0.0, 1.0, kPlannerCps);
  const Limits lim;
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 50; ++trial)
  {
    const QpSolution sol =
        solve(assemble(flatten_cps(test::random_cps(rng, kPlannerCps, 6.0)), random_state(rng, lim), lim, std::nullopt, knots));
    ASSERT_EQ(sol.status, QpStatus::optimal);
    SplineTrajectory traj{unflatten_cps(sol.q), knots, 0.0, 1.0};
    for (int i = 0; i <= 500; ++i)
    {
      const double t = i / 500.0;
      EXPECT_TRUE((eval_spline(traj, t, 1).cwiseAbs().array() <= lim.v_max.array() + 1e-6).all());
      EXPECT_TRUE((eval_spline(traj, t, 2).cwiseAbs().array() <= lim.a_max.array() + 1e-6).all());
    }
  }
}

TEST(QpSolve, InfeasibleConstraintIsReported)
{
  const KnotVector knots = build_clamped_knots(0.0, 1.0, kPlannerCps);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(30);
  g(0) = 1.0;  // first CP x is pinned to 0, so g.q <= -1 cannot hold
  const QpProblem prob = assemble(Eigen::VectorXd::Ones(30), InitialState{}, Limits{}, CollisionConstraint{g}, knots, 1.0);
  const QpSolution sol = solve(prob);
  EXPECT_EQ(sol.status, QpStatus::infeasible);

  const QpSolution ok = solve(assemble(Eigen::VectorXd::Ones(30), InitialState{}, Limits{}, CollisionConstraint{g}, knots));
  EXPECT_EQ(ok.status, QpStatus::optimal);
}

TEST(QpSolve, Deterministic)
{
  const KnotVector knots = build_clamped_knots(0.0, 1.0, kPlannerCps);
  std::mt19937_64 rng(27);
  const QpProblem prob = assemble(flatten_cps(test::random_cps(rng)), random_state(rng, Limits{}), Limits{}, std::nullopt, knots);
  const QpSolution a = solve(prob);
  const QpSolution b = solve(prob);
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.iterations, b.iterations);
}
