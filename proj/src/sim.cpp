#include "ecodrive/sim.hpp"

#include "ecodrive/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace ecodrive {

Scenario table_one_scenario()
{
  Scenario sc;
  sc.route.lights = {{200, 30, 5, 25, 5}};
  sc.route.goal_s = 200;
  sc.schedule.k_pass = {20};
  sc.v0 = 0;
  return sc;
}

Scenario four_light_scenario()
{
  Scenario sc;
  const double pos[4] = {189, 378, 490, 553};
  const int k_pass[4] = {43, 81, 103, 116};
  for (int i = 0; i < 4; ++i) {
    // Green from k_pass - 22 to k_pass + 7.
    const int offset = ((22 - k_pass[i]) % 60 + 60) % 60;
    sc.route.lights.push_back({pos[i], 30, 4, 26, offset});
    sc.schedule.k_pass.push_back(k_pass[i]);
  }
  sc.route.goal_s = 575;
  sc.v0 = 0;
  return sc;
}

Scenario random_scenario(Rng & rng, const RandomScenarioRanges & r, const Limits & lim)
{
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng.next() % static_cast<std::uint64_t>(hi - lo + 1)); };
  Scenario sc;
  TrafficLight tl;
  tl.green = pick(r.green_lo, r.green_hi);
  tl.yellow = pick(r.yellow_lo, r.yellow_hi);
  tl.red = pick(r.red_lo, r.red_hi);
  tl.offset = pick(0, tl.cycle() - 1);
  tl.s_tl = std::round(rng.uniform(r.dist_lo, r.dist_hi));
  sc.route.lights = {tl};
  sc.route.goal_s = tl.s_tl;
  sc.route.v_max = lim.v_max;
  sc.route.a_min = lim.a_min;
  sc.route.a_max = lim.a_max;
  sc.v0 = rng.uniform(r.v0_lo, r.v0_hi);
  sc.schedule = green_wave(sc.route, 0, sc.v0);
  return sc;
}

const char * to_string(ControllerKind k) { return k == ControllerKind::Mpc ? "mpc" : "cruise"; }

ControllerKind controller_kind_from_string(const std::string & s)
{
  if (s == "mpc") { return ControllerKind::Mpc; }
  if (s == "cruise") { return ControllerKind::Cruise; }
  throw Error("unknown controller kind '" + s + "'");
}

void SimConfig::validate() const
{
  scenario.route.validate();
  if (scenario.schedule.k_pass.size() != scenario.route.lights.size()) {
    throw Error("schedule and route disagree on the light count");
  }
  if (max_steps < 1) { throw Error("max_steps must be positive"); }
  if (noise.bound.lo > noise.bound.hi) { throw Error("noise bound lo > hi"); }
  if (!(scenario.v0 >= 0 && scenario.v0 <= scenario.route.v_max)) { throw Error("initial speed outside [0, v_max]"); }
  control.mpc.validate();
}

TrajectoryLog run_closed_loop(const SimConfig & cfg, std::shared_ptr<const LearnedArtifacts> artifacts)
{
  cfg.validate();
  const RouteSpec & route = cfg.scenario.route;
  const auto sys = SystemMatrices<double>::zoh();
  const double e = cfg.control.mpc.pos_err();
  const double L = cfg.control.mpc.L;
  Rng rng(cfg.seed);
  Controller ctl(cfg.control, route, cfg.scenario.schedule, std::move(artifacts));

  TrajectoryLog log;
  log.crossing.assign(route.lights.size(), std::nullopt);
  VehicleState x(0.0, cfg.scenario.v0);
  Observer<double> obs = observer_init<double>(measure(x, cfg.noise.sample(rng), cfg.noise), L);
  std::size_t light = advance_segment(route, 0, obs.estimate.x(), e);

  log.travel_time = cfg.max_steps;
  for (int k = 0; k < cfg.max_steps; ++k) {
    const Point2 xh = obs.estimate;
    if (route_complete(route, light, xh.x(), e)) {
      log.complete = true;
      log.travel_time = k;
      break;
    }
    const ControlOutput out =
      cfg.controller == ControllerKind::Mpc ? ctl.step(k, xh, light) : ctl.cruise_step(k, xh, light);
    if (out.fallback()) { ++log.fallback_steps; }
    if (out.mode == ControlMode::Mpc) { log.solve_ms.push_back(out.solve_ms); }
    if (out.intermediate_red_crossing) { ++log.intermediate_red_crossings; }
    if (light < route.lights.size()) {
      log.pairs.push_back({Point2(xh.x() - route.lights[light].s_tl, xh.y()), out.u, 0, 0});
    }

    LogRow row;
    row.t = k;
    row.s_true = x.x();
    row.s_hat = xh.x();
    row.v = x.y();
    row.u = out.u;
    row.signal = light < route.lights.size() ? signal_at(route.lights[light], k) : Signal::Green;
    row.segment = light;
    row.dE = true_energy(cfg.truth, x.y(), out.u);
    row.mode = out.mode;
    row.v_hat = xh.y();
    row.status = out.status;
    row.objective = out.objective;
    row.solve_ms = out.solve_ms;
    row.windows = out.windows;
    log.rows.push_back(row);
    log.energy += row.dE;

    const VehicleState xn = step_true(sys, x, out.u);
    for (std::size_t i = 0; i < route.lights.size(); ++i) {
      const double s_tl = route.lights[i].s_tl;
      if (x.x() < s_tl && xn.x() >= s_tl) {
        log.crossing[i] = k + 1;
        if (signal_at(route.lights[i], k + 1) != Signal::Green) { ++log.red_violations; }
      }
    }
    x = xn;
    obs = observer_update(sys, obs, out.u, measure(x, cfg.noise.sample(rng), cfg.noise));
    light = advance_segment(route, light, obs.estimate.x(), e);
  }
  for (std::size_t i = 0; i < route.lights.size(); ++i) {
    if (!log.crossing[i] || *log.crossing[i] > cfg.scenario.schedule.k_pass[i]) { ++log.deadline_misses; }
  }
  return log;
}

Stat make_stat(const std::vector<double> & xs)
{
  Stat s;
  if (xs.empty()) { return s; }
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  s.min = *std::min_element(xs.begin(), xs.end());
  s.max = *std::max_element(xs.begin(), xs.end());
  double ss = 0;
  for (double x : xs) { ss += (x - s.mean) * (x - s.mean); }
  s.stddev = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
  return s;
}

McSummary summarize(const std::vector<TrajectoryLog> & logs)
{
  McSummary s;
  s.runs = static_cast<int>(logs.size());
  std::vector<double> energy, time;
  long steps = 0, fb = 0;
  for (const auto & l : logs) {
    energy.push_back(l.energy);
    time.push_back(l.travel_time);
    s.red_violations += l.red_violations;
    s.deadline_misses += l.deadline_misses;
    if (!l.complete) { ++s.incomplete; }
    if (l.fallback_steps > 0) {
      ++s.runs_with_fallback;
    } else if (l.deadline_misses > 0) {
      ++s.late_without_fallback;
    }
    steps += static_cast<long>(l.rows.size());
    fb += l.fallback_steps;
    s.solve_ms.insert(s.solve_ms.end(), l.solve_ms.begin(), l.solve_ms.end());
  }
  s.energy = make_stat(energy);
  s.travel_time = make_stat(time);
  s.fallback_rate = steps > 0 ? static_cast<double>(fb) / static_cast<double>(steps) : 0.0;
  return s;
}

std::uint64_t run_seed(std::uint64_t base, int i) { return Rng(base).split(static_cast<std::uint64_t>(i)).seed(); }

McResult monte_carlo(const SimConfig & cfg, int runs, std::shared_ptr<const LearnedArtifacts> artifacts, int threads)
{
  if (runs < 1) { throw Error("runs must be at least 1"); }
  cfg.validate();
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, runs);
  McResult res;
  res.logs.resize(static_cast<std::size_t>(runs));
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  auto work = [&](int w) {
    try {
      for (int i = next++; i < runs; i = next++) {
        SimConfig c = cfg;
        c.seed = run_seed(cfg.seed, i);
        res.logs[static_cast<std::size_t>(i)] = run_closed_loop(c, artifacts);
      }
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) { pool.emplace_back(work, w); }
    for (auto & t : pool) { t.join(); }
  }
  for (const auto & e : errors) {
    if (e) { std::rethrow_exception(e); }
  }
  res.summary = summarize(res.logs);
  return res;
}

void TrainConfig::validate() const
{
  if (iterations < 1) { throw Error("iterations must be at least 1"); }
  if (mc_runs < 1) { throw Error("mc_runs must be at least 1"); }
  if (augment_runs < 0 || augment_runs > mc_runs) { throw Error("augment_runs must lie in [0, mc_runs]"); }
  if (init_speeds.empty() || init_runs < 1) { throw Error("need at least one initialization run"); }
  if (random_augmentations < 0) { throw Error("random_augmentations must be nonnegative"); }
  SimConfig c = base;
  c.scenario = fixed;
  c.validate();
}

std::vector<double> value_noise(const TrainConfig & cfg)
{
  Rng rng = Rng(cfg.seed).split(0xC057);
  const auto & m = cfg.base.control.mpc;
  return sample_terminal_noise(rng, m.M, 1, m.L, cfg.base.noise);
}

namespace {

Dataset add_pairs(const Dataset & d, const std::vector<TrajectoryLog> & logs, int count, int iter, int scenario,
  const Limits & lim)
{
  std::vector<DataPair> pairs;
  for (int i = 0; i < count && i < static_cast<int>(logs.size()); ++i) {
    for (auto p : logs[static_cast<std::size_t>(i)].pairs) {
      p.iter = iter;
      p.scenario = scenario;
      pairs.push_back(p);
    }
  }
  return augment(d, pairs, lim);
}

}  // namespace

Dataset init_dataset(const TrainConfig & cfg)
{
  cfg.validate();
  Dataset d;
  const Limits lim = cfg.fixed.route.limits();
  std::vector<TrajectoryLog> logs;
  const std::uint64_t base = Rng(cfg.seed).split(0x1417).seed();
  for (double v : cfg.init_speeds) {
    for (int r = 0; r < cfg.init_runs; ++r) {
      SimConfig c = cfg.base;
      c.scenario = cfg.fixed;
      c.controller = ControllerKind::Cruise;
      c.control.cruise.v_ref = std::min(v, lim.v_max);
      c.seed = run_seed(base, static_cast<int>(logs.size()));
      logs.push_back(run_closed_loop(c, nullptr));
    }
  }
  return add_pairs(d, logs, static_cast<int>(logs.size()), 0, 0, lim);
}

TrainResult train(const TrainConfig & cfg, const std::function<void(const CurveRow &)> & progress)
{
  cfg.validate();
  const auto noise = value_noise(cfg);
  const Limits lim = cfg.fixed.route.limits();
  TrainResult out;
  out.data = init_dataset(cfg);

  SimConfig eval = cfg.base;
  eval.scenario = cfg.fixed;
  eval.controller = ControllerKind::Mpc;
  eval.seed = Rng(cfg.seed).split(0xE7A1).seed();

  int settled = 0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    auto art = std::make_shared<const LearnedArtifacts>(learn(out.data, cfg.base.control.mpc, noise, cfg.learn));
    const McResult mc = monte_carlo(eval, cfg.mc_runs, art, cfg.threads);
    CurveRow row{it, out.data.size(), mc.summary.energy.mean, mc.summary.energy.stddev, mc.summary.fallback_rate};
    if (!out.curve.empty()) {
      const double prev = out.curve.back().mean_energy;
      settled = std::abs(row.mean_energy - prev) < cfg.settle_tol * std::abs(prev) ? settled + 1 : 0;
    }
    out.curve.push_back(row);
    if (progress) { progress(row); }
    // Augmentation episodes draw fresh noise so new iterations add new states.
    SimConfig explore = eval;
    explore.seed = Rng(cfg.seed).split(0xA000 + static_cast<std::uint64_t>(it)).seed();
    const McResult aug = monte_carlo(explore, std::max(cfg.augment_runs, 1), art, cfg.threads);
    out.data = add_pairs(out.data, aug.logs, cfg.augment_runs, it, 0, lim);
    if (cfg.settle_window > 0 && settled >= cfg.settle_window) { break; }
  }

  Rng scen = Rng(cfg.seed).split(0x5CE7);
  for (int r = 0; r < cfg.random_augmentations; ++r) {
    auto art = std::make_shared<const LearnedArtifacts>(learn(out.data, cfg.base.control.mpc, noise, cfg.learn));
    std::vector<TrajectoryLog> logs;
    for (int e = 0; e < cfg.augment_runs; ++e) {
      SimConfig c = cfg.base;
      c.scenario = random_scenario(scen, cfg.ranges, lim);
      c.controller = ControllerKind::Mpc;
      c.seed = scen.next();
      logs.push_back(run_closed_loop(c, art));
    }
    out.data = add_pairs(out.data, logs, static_cast<int>(logs.size()), cfg.iterations + r + 1, 1, lim);
  }
  out.artifacts = std::make_shared<const LearnedArtifacts>(learn(out.data, cfg.base.control.mpc, noise, cfg.learn));
  return out;
}

}  // namespace ecodrive
