#include "ecodrive/lp.hpp"
#include "ecodrive/qp.hpp"
#include "ecodrive/rng.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <limits>

using namespace ecodrive;
using Eigen::MatrixXd;
using Eigen::VectorXd;


TEST(Lp, SmallKnownOptimum)
{
  // max x + y s.t. x + 2y <= 4, 3x + y <= 6.
  LpProblem p;
  p.c = VectorXd(2);
  p.c << -1, -1;
  p.A_ub = MatrixXd(2, 2);
  p.A_ub << 1, 2, 3, 1;
  p.b_ub = VectorXd(2);
  p.b_ub << 4, 6;
  p.A_eq = MatrixXd(0, 2);
  p.b_eq = VectorXd(0);
  const auto r = solve_lp(p);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.x(0), 1.6, 1e-9);
  EXPECT_NEAR(r.x(1), 1.2, 1e-9);
  EXPECT_NEAR(r.objective, -2.8, 1e-9);
}

TEST(Lp, InfeasibleAndUnbounded)
{
  LpProblem p;
  p.c = VectorXd::Ones(2);
  p.A_eq = MatrixXd(1, 2);
  p.A_eq << 1, 1;
  p.b_eq = VectorXd::Constant(1, -1);
  p.A_ub = MatrixXd(0, 2);
  p.b_ub = VectorXd(0);
  EXPECT_EQ(solve_lp(p).status, LpStatus::Infeasible);

  p.c << -1, 0;
  p.A_eq = MatrixXd(1, 2);
  p.A_eq << 1, -1;
  p.b_eq = VectorXd::Zero(1);
  EXPECT_EQ(solve_lp(p).status, LpStatus::Unbounded);
}

TEST(Lp, ConvexWeightsStrongDuality)
{
  // min J'lambda s.t. sum lambda_d x_d = x, sum lambda = 1 on random clouds;
  // the dual value must equal the primal value.
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 40;
    MatrixXd A(3, n);
    VectorXd J(n);
    for (int j = 0; j < n; ++j) {
      A(0, j) = rng.uniform(0, 10);
      A(1, j) = rng.uniform(0, 10);
      A(2, j) = 1;
      J(j) = rng.uniform(0, 5);
    }
    LpProblem p;
    p.c = J;
    p.A_eq = A;
    p.b_eq = VectorXd(3);
    p.b_eq << 5, 5, 1;
    p.A_ub = MatrixXd(0, n);
    p.b_ub = VectorXd(0);
    const auto r = solve_lp(p);
    ASSERT_EQ(r.status, LpStatus::Optimal);
    EXPECT_NEAR(r.objective, p.b_eq.dot(r.y), 1e-8);
    EXPECT_LE((A * r.x - p.b_eq).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GE((J - A.transpose() * r.y).minCoeff(), -1e-9);
  }
}

TEST(Qp, MatchesActiveSetOracle)
{
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = oracle::random_qp(rng, trial % 3 == 0);
    const auto r = solve_qp(p);
    ASSERT_EQ(r.status, QpStatus::Optimal);
    const VectorXd want = oracle::active_set_oracle(p);
    ASSERT_EQ(want.size(), p.size());
    EXPECT_LE((r.z - want).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    EXPECT_LE(kkt_residuals(p, r).max(), 1e-6);
  }
}

TEST(Qp, InteriorMinimizerMatchesClosedForm)
{
  Rng rng(2);
  QpProblem p;
  const MatrixXd R = oracle::random_matrix(rng, 4, 4);
  p.H = R * R.transpose() + MatrixXd::Identity(4, 4);
  p.c = VectorXd::NullaryExpr(4, [&]() { return rng.uniform(-1, 1); });
  p.A = MatrixXd(0, 4);
  p.b = VectorXd(0);
  p.G = MatrixXd(8, 4);
  p.G << MatrixXd::Identity(4, 4), -MatrixXd::Identity(4, 4);
  p.h = VectorXd::Constant(8, 100);
  const auto r = solve_qp(p);
  ASSERT_EQ(r.status, QpStatus::Optimal);
  const VectorXd z = p.H.ldlt().solve(-p.c);
  EXPECT_LE((r.z - z).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Qp, InfeasibleGivesFarkasCertificate)
{
  QpProblem p;
  p.H = MatrixXd::Identity(2, 2);
  p.c = VectorXd::Zero(2);
  p.A = MatrixXd(0, 2);
  p.b = VectorXd(0);
  p.G = MatrixXd(2, 2);
  p.G << 1, 0, -1, 0;
  p.h = VectorXd(2);
  p.h << -1, -1;  // x <= -1 and x >= 1
  const auto r = solve_qp(p);
  ASSERT_EQ(r.status, QpStatus::Infeasible);
  EXPECT_GE(r.farkas_ineq.minCoeff(), 0.0);
  EXPECT_LE((p.G.transpose() * r.farkas_ineq).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(p.h.dot(r.farkas_ineq), 0.0);
}

TEST(Qp, LinearObjectiveWithPsdHessian)
{
  // min t s.t. t >= x - 1, t >= -x - 1, -5 <= x <= 5: optimum t = -1.
  QpProblem p;
  p.H = MatrixXd::Zero(2, 2);
  p.H(0, 0) = 1e-3;
  p.c = VectorXd(2);
  p.c << 0, 1;
  p.A = MatrixXd(0, 2);
  p.b = VectorXd(0);
  p.G = MatrixXd(4, 2);
  p.G << 1, -1, -1, -1, 1, 0, -1, 0;
  p.h = VectorXd(4);
  p.h << 1, 1, 5, 5;
  const auto r = solve_qp(p);
  ASSERT_EQ(r.status, QpStatus::Optimal);
  EXPECT_NEAR(r.z(1), -1.0, 1e-7);
  EXPECT_LE(kkt_residuals(p, r).max(), 1e-6);
}

TEST(Qp, Deterministic)
{
  Rng rng(99);
  const auto p = oracle::random_qp(rng, true);
  const auto a = solve_qp(p);
  const auto b = solve_qp(p);
  EXPECT_EQ(a.z, b.z);
}

TEST(Qp, FarSlackRowDoesNotStall)
{
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = oracle::random_qp(rng, false);
    const Eigen::Index n = p.size(), m = p.h.size();
    p.G.conservativeResize(m + 1, n);
    p.h.conservativeResize(m + 1);
    p.G.row(m).setZero();
    p.G(m, 0) = -1.0;
    p.h(m) = 1e6;
    const auto r = solve_qp(p);
    ASSERT_EQ(r.status, QpStatus::Optimal);
    EXPECT_LE((r.z - oracle::active_set_oracle(p)).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    EXPECT_LE(kkt_residuals(p, r).max(), 1e-6);
  }
}

TEST(Qp, DegenerateScaledEpigraph)
{
  // min u^2/2 + t  s.t.  t >= a_k u + b_k, each plane repeated at scales 1 and 1000.
  std::vector<std::pair<double, double>> planes;
  for (int k = -20; k <= 20; ++k) {
    const double u0 = 0.25 * k;  // tangent of 3 (u - 1)^2 at u0
    planes.push_back({6.0 * (u0 - 1.0), 3.0 * (1.0 - u0 * u0)});
  }
  const Eigen::Index m = 2 * static_cast<Eigen::Index>(planes.size());
  QpProblem p;
  p.H = MatrixXd::Zero(2, 2);
  p.H(0, 0) = 1.0;
  p.c = VectorXd(2);
  p.c << 0, 1;
  p.A = MatrixXd(0, 2);
  p.b = VectorXd(0);
  p.G = MatrixXd(m, 2);
  p.h = VectorXd(m);
  for (std::size_t k = 0; k < planes.size(); ++k) {
    for (int rep = 0; rep < 2; ++rep) {
      const double sc = rep ? 1000.0 : 1.0;
      const auto i = static_cast<Eigen::Index>(2 * k + static_cast<std::size_t>(rep));
      p.G.row(i) << sc * planes[k].first, -sc;
      p.h(i) = -sc * planes[k].second;
    }
  }
  auto f = [&](double u) {
    double t = -std::numeric_limits<double>::infinity();
    for (const auto & [a, b] : planes) { t = std::max(t, a * u + b); }
    return 0.5 * u * u + t;
  };
  // Ternary search on the convex 1-D objective.
  double lo = -10, hi = 10;
  for (int it = 0; it < 300; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (f(m1) < f(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  const auto r = solve_qp(p);
  ASSERT_EQ(r.status, QpStatus::Optimal);
  EXPECT_NEAR(r.objective, f(0.5 * (lo + hi)), 1e-7);
  EXPECT_LE(kkt_residuals(p, r).max(), 1e-6);
}
