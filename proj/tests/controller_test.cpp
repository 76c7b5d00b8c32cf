#include "ecodrive/controller.hpp"

#include "oracles.hpp"

#include <Eigen/Cholesky>
#include <gtest/gtest.h>

#include <cmath>

using namespace ecodrive;

namespace {

// Light at s = 0 in the data frame.
const LearnedArtifacts & grid_artifacts()
{
  static const LearnedArtifacts art = [] {
    const auto d = oracle::grid_dataset({-40, 6, 2, 6, 0.5, -2, 2, 1});
    MpcConfig cfg;
    Rng rng(3);
    const auto noise = sample_terminal_noise(rng, cfg.M, 1, cfg.L, NoiseModel{});
    return learn(d, cfg, noise, {40, {}});
  }();
  return art;
}

SegmentContext green_ctx(double distance)
{
  SegmentContext ctx;
  ctx.has_light = true;
  ctx.signal = Signal::Green;
  ctx.remaining = 20;
  ctx.distance = distance;
  ctx.k_pass = 30;
  return ctx;
}

std::vector<double> zeros(int m) { return std::vector<double>(static_cast<std::size_t>(m), 0.0); }

double stage_sum(const MpcConfig & cfg, const MpcSolution & sol)
{
  double sum = 0;
  for (Eigen::Index i = 0; i < sol.u.size(); ++i) {
    sum += stage_cost(cfg.energy, sol.states[static_cast<std::size_t>(i)].y(), sol.u(i));
  }
  return sum;
}

}  // namespace

TEST(Mpc, TighteningAmounts)
{
  const MpcConfig cfg;
  EXPECT_NEAR(cfg.red_tightening(), 3.3, 1e-12);
  EXPECT_NEAR(cfg.terminal_tightening(), 4.5, 1e-12);
}

TEST(Mpc, RedRowAndTerminalSets)
{
  const auto & art = grid_artifacts();
  MpcConfig cfg;
  auto ctx = green_ctx(30);
  ctx.signal = Signal::Red;
  ctx.remaining = 5;
  const auto S = art.set(TargetKind::BeforeLight, 3);
  const auto P = art.set(TargetKind::AfterLight, 8);
  ASSERT_TRUE(S && P);
  const Point2 x(170, 4);  // light at 200
  const auto prob = build_mpc(x, ctx, &*S, *P, *art.V, zeros(cfg.M), cfg);
  ASSERT_TRUE(prob.spec.red_limit.has_value());
  EXPECT_NEAR(*prob.spec.red_limit, 200 - 3.3, 1e-12);

  const std::vector<ConvexRegion2> parts{translate_s(erode_s(S->region, 4.5), 200),
    translate_s(erode_s(P->region, 4.5), 200), speed_band(0, cfg.limits.v_max)};
  const auto expect = intersect(parts);
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const Point2 q(rng.uniform(150, 210), rng.uniform(-1, 8));
    if (std::abs(expect.halfplanes().front().eval(q)) < 1e-6) { continue; }
    EXPECT_EQ(contains(prob.terminal, q, 1e-9), contains(expect, q, 1e-9)) << q.transpose();
  }
}

TEST(Mpc, NoRedRowOnGreenAndNoSRowsWhenInactive)
{
  const auto & art = grid_artifacts();
  MpcConfig cfg;
  const auto P = art.set(TargetKind::AfterLight, 8);
  const auto prob = build_mpc({170, 4}, green_ctx(30), nullptr, *P, *art.V, zeros(cfg.M), cfg);
  EXPECT_FALSE(prob.spec.red_limit.has_value());
  const auto expect = intersect(translate_s(erode_s(P->region, 4.5), 200), speed_band(0, cfg.limits.v_max));
  EXPECT_EQ(prob.terminal.halfplanes().size(), expect.halfplanes().size());
}

TEST(Mpc, GreenEndingNextStepAddsRedRow)
{
  const auto & art = grid_artifacts();
  MpcConfig cfg;
  auto ctx = green_ctx(30);
  ctx.remaining = 1;
  const auto P = art.set(TargetKind::AfterLight, 8);
  EXPECT_TRUE(build_mpc({170, 4}, ctx, nullptr, *P, *art.V, zeros(cfg.M), cfg).spec.red_limit.has_value());
}

TEST(Mpc, SingleZeroSampleCostIsValueFunction)
{
  const auto & art = grid_artifacts();
  MpcConfig cfg;
  cfg.M = 1;
  const auto P = art.set(TargetKind::AfterLight, 10);
  const auto prob = build_mpc({-30, 3}, green_ctx(30), nullptr, *P, *art.V, zeros(1), cfg);
  const auto sol = solve_mpc(prob);
  ASSERT_EQ(sol.status, MpcStatus::Optimal);
  const double terminal = sol.objective - stage_sum(cfg, sol);
  EXPECT_NEAR(terminal, evaluate_V(*art.V, sol.states.back()), 1e-6);
  EXPECT_NEAR(sampled_terminal_cost(prob.spec, sol.states.back()), terminal, 1e-6);
}

TEST(Mpc, EpigraphMatchesConvexWeights)
{
  const auto & art = grid_artifacts();
  Rng rng(5);
  MpcConfig cfg;
  const auto sn = sample_terminal_noise(rng, cfg.M, cfg.N, cfg.L, NoiseModel{});
  const auto P = art.set(TargetKind::AfterLight, 10);
  for (const Point2 & x : {Point2(-32, 3), Point2(-28, 5)}) {
    cfg.form = TerminalCostForm::Epigraph;
    const auto a = solve_mpc(build_mpc(x, green_ctx(-x.x()), nullptr, *P, *art.V, sn, cfg));
    cfg.form = TerminalCostForm::Weights;
    const auto b = solve_mpc(build_mpc(x, green_ctx(-x.x()), nullptr, *P, *art.V, sn, cfg));
    ASSERT_EQ(a.status, MpcStatus::Optimal);
    ASSERT_EQ(b.status, MpcStatus::Optimal);
    EXPECT_NEAR(a.objective, b.objective, 1e-5);
  }
}

TEST(Mpc, EmptyTerminalSetIsPreflagged)
{
  const auto & art = grid_artifacts();
  MpcConfig cfg;
  const ControllableSet P{5, ConvexRegion2::empty_region(), TargetKind::AfterLight, 0.0};
  const auto prob = build_mpc({-30, 3}, green_ctx(30), nullptr, P, *art.V, zeros(cfg.M), cfg);
  EXPECT_TRUE(prob.infeasible);
  EXPECT_EQ(solve_mpc(prob).status, MpcStatus::Infeasible);
}

TEST(Mpc, InteriorInstanceMatchesClosedForm)
{
  MpcConfig cfg;
  cfg.limits = {100, -50, 50};
  MpcSpec spec;
  spec.x0 = Point2(0, 20);
  const auto prob = assemble_mpc(spec, cfg);
  const Eigen::VectorXd u_star = prob.qp.H.ldlt().solve(-prob.qp.c);
  ASSERT_TRUE(((prob.qp.G * u_star - prob.qp.h).array() < -1e-3).all());
  const auto sol = solve_mpc(prob);
  ASSERT_EQ(sol.status, MpcStatus::Optimal);
  EXPECT_LE((sol.u - u_star).lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_NEAR(sol.objective, stage_sum(cfg, sol), 1e-9);
}

TEST(Mpc, OptimalSolutionsPassIndependentChecks)
{
  const auto & art = grid_artifacts();
  MpcConfig cfg;
  Rng rng(9);
  const auto sn = sample_terminal_noise(rng, cfg.M, cfg.N, cfg.L, NoiseModel{});
  int optimal = 0;
  for (int i = 0; i < 40; ++i) {
    const Point2 x(rng.uniform(-38, -15), rng.uniform(0, 6));
    auto ctx = green_ctx(-x.x());
    if (i % 3 == 0) {
      ctx.signal = Signal::Red;
      ctx.remaining = 4;
    }
    const auto S = art.set(TargetKind::BeforeLight, 2);
    const auto P = art.set(TargetKind::AfterLight, 6 + i % 10);
    const auto prob = build_mpc(x, ctx, i % 2 ? &*S : nullptr, *P, *art.V, sn, cfg);
    const auto sol = solve_mpc(prob);
    if (sol.status != MpcStatus::Optimal) { continue; }
    ++optimal;
    EXPECT_LE(constraint_violation(prob, sol, cfg), 1e-6);
    EXPECT_LE(sol.kkt, 1e-6);
  }
  EXPECT_GT(optimal, 10);
}

TEST(Cruise, StoppingDistance)
{
  EXPECT_NEAR(stopping_distance(6, 3), 6 - 1.5 + 3 - 1.5, 1e-12);
  EXPECT_NEAR(stopping_distance(1, 3), 0.5, 1e-12);
  EXPECT_EQ(stopping_distance(0, 3), 0.0);
}

TEST(Cruise, TracksWhenFarOnGreen)
{
  const TrafficLight tl{200, 30, 5, 25, 0};
  CruiseMemory mem;
  EXPECT_NEAR(cruise_control({0, 5}, 0, &tl, 0, {}, {}, 3, mem), 0.0, 1e-12);
  EXPECT_NEAR(cruise_control({0, 3}, 0, &tl, 0, {}, {}, 3, mem), 1.0, 1e-12);
}

TEST(Cruise, BrakesBeforeRed)
{
  // Braking distance 25/6 m exceeds 6 - 3 - 1 m of room.
  const TrafficLight tl{200, 30, 5, 25, 30};
  ASSERT_EQ(signal_at(tl, 0), Signal::Yellow);
  CruiseMemory mem;
  const double u = cruise_control({194, 5}, 0, &tl, 0, {}, {}, 3, mem);
  EXPECT_NEAR(u, -3.0, 1e-12);
  EXPECT_NEAR(cruise_control({195, 0}, 0, &tl, 0, {}, {}, 3, mem), 0.0, 1e-12);
}

TEST(Cruise, NeverCrossesOnRedFromAnyStart)
{
  const TrafficLight tl{100, 20, 4, 16, 0};
  const Limits lim;
  Rng rng(2);
  int trials = 0;
  for (int r = 0; r < 300; ++r) {
    // Start stoppable: enough room for a full brake from the initial speed.
    const double v0 = rng.uniform(0, 10);
    const double s0 = rng.uniform(0, 100 - 3 - 1 - stopping_distance(v0, 3) - v0);
    if (s0 < 0) { continue; }
    ++trials;
    CruiseConfig cc;
    cc.v_ref = rng.uniform(2, 12);
    CruiseMemory mem;
    const long k0 = static_cast<long>(rng.uniform(0, 40));
    Point2 x(s0, v0);
    double ds = rng.uniform(-3, 3);
    for (long k = k0; k < k0 + 200 && x.x() < 100; ++k) {
      const Point2 xh(x.x() - ds, x.y());
      const double u = cruise_control(xh, k, &tl, 0, cc, lim, 3, mem);
      const Point2 xn = step_true(SystemMatrices<double>::zoh(), x, u);
      if (xn.x() >= 100) { ASSERT_EQ(signal_at(tl, k + 1), Signal::Green) << r; }
      x = xn;
      ds = std::clamp(ds + rng.uniform(-0.3, 0.3), -3.0, 3.0);
    }
  }
  EXPECT_GT(trials, 100);
}

TEST(Controller, EmptyDataAlwaysFallsBack)
{
  RouteSpec route{{{200, 30, 5, 25, 5}}, 200};
  Controller c({}, route, {{20}}, std::make_shared<LearnedArtifacts>());
  for (int k = 0; k < 5; ++k) { EXPECT_TRUE(c.step(k, {10.0 * k, 5}, 0).fallback()); }
}

TEST(Controller, AppliesFirstPlannedInputAndIsDeterministic)
{
  auto art = std::make_shared<LearnedArtifacts>(grid_artifacts());
  RouteSpec route{{{40, 30, 5, 25, 0}}, 40};
  const PassSchedule sched{{20}};
  ControllerConfig cfg;
  Controller a(cfg, route, sched, art), b(cfg, route, sched, art);
  const Point2 x(8, 3);
  const auto oa = a.step(0, x, 0), ob = b.step(0, x, 0);
  ASSERT_EQ(oa.mode, ControlMode::Mpc);
  EXPECT_EQ(oa.u, ob.u);

  const SegmentContext ctx = segment_context(route, sched, 0, x.x(), 0, cfg.mpc.N);
  ASSERT_TRUE(ctx.windows.has_value());
  Rng rng = Rng(cfg.noise_seed).split(0);
  const auto sn = sample_terminal_noise(rng, cfg.mpc.M, cfg.mpc.N, cfg.mpc.L, NoiseModel{cfg.mpc.W});
  const auto P = art->set(TargetKind::AfterLight, ctx.windows->t_green);
  const auto sol = solve_mpc(build_mpc(x, ctx, nullptr, *P, art->value(ctx.windows->t_green), sn, cfg.mpc));
  ASSERT_EQ(sol.status, MpcStatus::Optimal);
  EXPECT_NEAR(oa.u, sol.u(0), 1e-12);
}
