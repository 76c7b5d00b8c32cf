#pragma once

#include "ecodrive/energy.hpp"
#include "ecodrive/geometry.hpp"
#include "ecodrive/learning.hpp"
#include "ecodrive/plant.hpp"
#include "ecodrive/qp.hpp"
#include "ecodrive/traffic.hpp"

#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace ecodrive {

/// How the sampled terminal cost enters the QP.
enum class TerminalCostForm {
  /// One epigraph variable per noise sample, bounded below by the envelope facets.
  Epigraph,
  /// Convex weights over the value points for every noise sample.
  Weights,
};

struct MpcConfig
{
  int N{5};
  int M{10};
  double L{0.05};
  SInterval W{-3, 3};
  Limits limits;
  EnergyModel<double> energy = default_energy_model();
  TerminalCostForm form{TerminalCostForm::Epigraph};
  QpOptions qp;

  double pos_err() const { return W.max_abs(); }
  /// (2L + 1) max|W|: one step of lumped noise on top of the estimate error.
  double red_tightening() const { return (2.0 * L + 1.0) * pos_err(); }
  /// (2LN + 1) max|W|.
  double terminal_tightening() const { return (2.0 * L * N + 1.0) * pos_err(); }

  RobustModel robust_model() const { return {SystemMatrices<double>::zoh(), limits, L, W}; }
  void validate() const;
};

/// Everything the QP assembly needs, in the frame of the vehicle position.
struct MpcSpec
{
  Point2 x0{0, 0};
  /// s_1 <= red_limit.
  std::optional<double> red_limit;
  /// s_i >= value at step i (1 <= i <= N).
  std::optional<std::pair<int, double>> deadline;
  /// Tightened terminal set; the speed box is added separately.
  ConvexRegion2 terminal = s_at_least(-1e6);
  /// Null: no terminal cost (the horizon ends past the last light).
  const CostToGoTable * V{nullptr};
  /// Position of the table's origin in this frame.
  double shift{0};
  std::vector<double> sn;
};

struct MpcProblem
{
  MpcSpec spec;
  int N{0};
  QpProblem qp;
  /// Constant part of the stage costs, added to the QP objective.
  double constant{0};
  TerminalCostForm form{TerminalCostForm::Epigraph};
  /// Terminal set after intersecting with the speed box.
  ConvexRegion2 terminal;
  bool infeasible{false};
  /// Extra decision variables after the N inputs.
  int extra{0};
};

enum class MpcStatus { Optimal, Infeasible };

const char * to_string(MpcStatus s);

struct MpcSolution
{
  MpcStatus status{MpcStatus::Infeasible};
  Eigen::VectorXd u;
  /// x_0 .. x_N.
  std::vector<Point2> states;
  double objective{0};
  double solve_ms{0};
  double kkt{0};
};

/// x_i for an input sequence, from x0.
std::vector<Point2> predict(const Point2 & x0, const Eigen::VectorXd & u);

MpcProblem assemble_mpc(const MpcSpec & spec, const MpcConfig & cfg);

/**
 * Standard segment: robust red row on s_1 when the light is not green now or
 * at the next step, terminal set S and P both eroded by the terminal
 * tightening, and sampled terminal cost from V. S, P and V are in the light
 * frame (light at S/P's s_tl); the light sits at x_hat.s + ctx.distance.
 */
MpcProblem build_mpc(const Point2 & x_hat, const SegmentContext & ctx, const ControllableSet * S,
  const ControllableSet & P, const CostToGoTable & V, std::span<const double> sn, const MpcConfig & cfg);

MpcSolution solve_mpc(const MpcProblem & p);

/// Largest violation of the box, red, deadline and terminal constraints by the solution.
double constraint_violation(const MpcProblem & p, const MpcSolution & sol, const MpcConfig & cfg);

/// Terminal cost of the plan: mean over the samples of V at x_N + sn (0 without a table).
double sampled_terminal_cost(const MpcSpec & spec, const Point2 & xN);

struct CruiseConfig
{
  double v_ref{5};
  double k_p{0.5};
  double stop_margin{1};
};

/// Go/stop decision the cruise law keeps across steps for one light.
struct CruiseMemory
{
  std::optional<std::size_t> committed_light;
  bool full_throttle{false};
};

/// Distance covered while braking at constant deceleration |a| from speed v, with the last step cut at v = 0.
double stopping_distance(double v, double a);

/**
 * Speed tracking with a robust stop. The vehicle keeps the ability to stop
 * with its true position before the light unless it has committed to cross:
 * commitment happens only when every step at which the true position may
 * first pass the light is green under a deterministic plan (keep tracking,
 * or full throttle). Without a light ahead it only tracks v_ref.
 */
double cruise_control(const Point2 & x_hat, long k, const TrafficLight * light, std::size_t light_index,
  const CruiseConfig & cfg, const Limits & lim, double pos_err, CruiseMemory & memory);

/// Learned sets and cost-to-go in the light frame (light at s = 0).
struct LearnedArtifacts
{
  Dataset data;
  std::shared_ptr<const SetSequence> before;
  std::shared_ptr<const SetSequence> after;
  std::shared_ptr<const CostToGoTable> V;
  /// stages[t - 1]: cost to reach past the light within t steps.
  std::vector<std::shared_ptr<const CostToGoTable>> stages;

  bool empty() const { return !V || !before || !after; }
  /// Value for a t-step window; the converged table past the stored stages.
  const CostToGoTable & value(int t) const;
  /// R_t for the target, or nullopt past the computed stages of an unsettled sequence.
  std::optional<ControllableSet> set(TargetKind kind, int t) const;
};

struct LearnOptions
{
  int t_max{160};
  /// Closed-loop data converges slowly near the noise-blurred target boundary.
  CostToGoOptions cost{1e-6, 2000, {}};
};

/**
 * Builds sets and cost-to-go from a light-frame dataset. An empty dataset
 * gives empty artifacts. `noise` are one-step lumped noise samples.
 */
LearnedArtifacts learn(const Dataset & d, const MpcConfig & cfg, std::span<const double> noise,
  const LearnOptions & opt = {});

enum class ControlMode { Mpc, Fallback, Tail, Cruise };

const char * to_string(ControlMode m);

struct ControlOutput
{
  double u{0};
  ControlMode mode{ControlMode::Fallback};
  bool fallback() const { return mode == ControlMode::Fallback; }
  MpcStatus status{MpcStatus::Infeasible};
  double objective{0};
  double solve_ms{0};
  std::optional<Windows> windows;
  /// Planned nominal states crossing a light that is red at that step.
  bool intermediate_red_crossing{false};
};

struct ControllerConfig
{
  MpcConfig mpc;
  CruiseConfig cruise;
  /// Seed for the per-segment terminal noise samples.
  std::uint64_t noise_seed{7};
};

/**
 * Receding-horizon controller for one vehicle. Terminal noise samples are
 * drawn once per segment. Falls back to cruise control when the MPC is
 * infeasible or nothing has been learned; after the last light it cruises.
 */
class Controller
{
public:
  Controller(const ControllerConfig & cfg, const RouteSpec & route, const PassSchedule & schedule,
    std::shared_ptr<const LearnedArtifacts> artifacts);

  ControlOutput step(int k, const Point2 & x_hat, std::size_t light);

  /// The cruise baseline: the cruise law with the configured v_ref at every step.
  ControlOutput cruise_step(int k, const Point2 & x_hat, std::size_t light);

private:
  const std::vector<double> & samples(std::size_t light);
  double kinematic_v_ref(int k, const Point2 & x_hat, std::size_t light) const;

  ControllerConfig cfg_;
  RouteSpec route_;
  PassSchedule schedule_;
  std::shared_ptr<const LearnedArtifacts> art_;
  CruiseMemory memory_;
  std::optional<std::size_t> sn_light_;
  std::vector<double> sn_;
};

}  // namespace ecodrive
