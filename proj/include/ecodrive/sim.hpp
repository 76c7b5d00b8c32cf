#pragma once

#include "ecodrive/controller.hpp"
#include "ecodrive/energy.hpp"
#include "ecodrive/learning.hpp"
#include "ecodrive/plant.hpp"
#include "ecodrive/rng.hpp"
#include "ecodrive/traffic.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ecodrive {

/// Environment of one episode; the vehicle starts at s = 0.
struct Scenario
{
  RouteSpec route;
  PassSchedule schedule;
  double v0{0};
};

/// Single light 200 m ahead, green with 25 s left of a 30/5/25 cycle, pass within 20 s, start at rest.
Scenario table_one_scenario();

/// Four lights at 189/378/490/553 m passable at a steady 5 m/s, deadlines 43/81/103/116 s, goal 575 m.
Scenario four_light_scenario();

struct RandomScenarioRanges
{
  int green_lo{20}, green_hi{40};
  int yellow_lo{3}, yellow_hi{6};
  int red_lo{15}, red_hi{30};
  double dist_lo{120}, dist_hi{300};
  double v0_lo{0}, v0_hi{8};
};

/// Random single-light scenario; the deadline comes from the green-wave search.
Scenario random_scenario(Rng & rng, const RandomScenarioRanges & r, const Limits & lim);

enum class ControllerKind { Mpc, Cruise };

const char * to_string(ControllerKind k);
ControllerKind controller_kind_from_string(const std::string & s);

struct SimConfig
{
  Scenario scenario;
  ControllerKind controller{ControllerKind::Mpc};
  std::uint64_t seed{1};
  int max_steps{400};
  NoiseModel noise;
  ControllerConfig control;
  /// Ground-truth energy model used for the metrics.
  EnergyModel<double> truth = default_energy_model();

  void validate() const;
};

struct LogRow
{
  int t{0};
  double s_true{0};
  double s_hat{0};
  double v{0};
  double u{0};
  Signal signal{Signal::Green};
  std::size_t segment{0};
  double dE{0};
  ControlMode mode{ControlMode::Mpc};
  /// Diagnostics of the control step.
  double v_hat{0};
  MpcStatus status{MpcStatus::Infeasible};
  double objective{0};
  double solve_ms{0};
  std::optional<Windows> windows;
};

struct TrajectoryLog
{
  std::vector<LogRow> rows;
  double energy{0};
  /// Steps until the route was complete (max_steps when incomplete).
  int travel_time{0};
  int red_violations{0};
  int deadline_misses{0};
  bool complete{false};
  int fallback_steps{0};
  /// Step at which the true position first reached each light.
  std::vector<std::optional<int>> crossing;
  /// Light-frame state-input pairs.
  std::vector<DataPair> pairs;
  /// Solve times of the MPC steps.
  std::vector<double> solve_ms;
  int intermediate_red_crossings{0};
};

/**
 * Closed loop at 1 s steps: measure, estimate, control, then advance the
 * true plant and charge the true energy. A crossing is checked at the first
 * step where the true position reaches the light.
 */
TrajectoryLog run_closed_loop(const SimConfig & cfg, std::shared_ptr<const LearnedArtifacts> artifacts);

struct Stat
{
  double mean{0};
  double min{0};
  double max{0};
  double stddev{0};
};

Stat make_stat(const std::vector<double> & xs);

struct McSummary
{
  int runs{0};
  Stat energy;
  Stat travel_time;
  int red_violations{0};
  int deadline_misses{0};
  int incomplete{0};
  int runs_with_fallback{0};
  /// Runs that never fell back yet reached some light after its deadline.
  int late_without_fallback{0};
  double fallback_rate{0};
  std::vector<double> solve_ms;
};

struct McResult
{
  McSummary summary;
  std::vector<TrajectoryLog> logs;
};

/// Seed of Monte Carlo run i.
std::uint64_t run_seed(std::uint64_t base, int i);

/// Independent seeded runs, spread over worker threads (0: hardware concurrency).
McResult monte_carlo(const SimConfig & cfg, int runs, std::shared_ptr<const LearnedArtifacts> artifacts,
  int threads = 0);

McSummary summarize(const std::vector<TrajectoryLog> & logs);

struct TrainConfig
{
  Scenario fixed = table_one_scenario();
  int iterations{15};
  int mc_runs{100};
  /// Closed-loop episodes whose pairs are added per iteration.
  int augment_runs{5};
  std::vector<double> init_speeds{8, 10, 12, 13, 14};
  /// Noisy cruise runs per initialization speed.
  int init_runs{5};
  int random_augmentations{10};
  RandomScenarioRanges ranges;
  /// Noise, controller, truth and step budget for every episode.
  SimConfig base;
  LearnOptions learn;
  /// Stop early once the mean energy changed less than settle_tol for settle_window iterations in a row (0: never).
  int settle_window{3};
  double settle_tol{0.01};
  std::uint64_t seed{1};
  int threads{0};

  void validate() const;
};

struct CurveRow
{
  int iter{0};
  std::size_t dataset_size{0};
  double mean_energy{0};
  double std_energy{0};
  double fallback_rate{0};
};

struct TrainResult
{
  Dataset data;
  std::vector<CurveRow> curve;
  std::shared_ptr<const LearnedArtifacts> artifacts;
};

/// One-step lumped noise samples used for the cost-to-go of a training run.
std::vector<double> value_noise(const TrainConfig & cfg);

/// Light-frame pairs from init_runs cruise runs on the fixed scenario at each speed.
Dataset init_dataset(const TrainConfig & cfg);

/**
 * Cruise-initialized data, then per iteration: learn, evaluate with
 * mc_runs Monte Carlo runs (fixed seeds), add the pairs of augment_runs
 * fresh-seeded MPC runs. A randomized-scenario phase follows; it adds data but
 * no curve rows.
 */
TrainResult train(const TrainConfig & cfg, const std::function<void(const CurveRow &)> & progress = {});

}  // namespace ecodrive
