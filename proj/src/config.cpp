#include "ecodrive/config.hpp"

#include <initializer_list>
#include <set>

namespace ecodrive::io {

namespace {

void check_keys(const Json & j, const char * section, std::initializer_list<const char *> allowed)
{
  if (!j.is_object()) { throw FormatError(std::string(section) + ": expected an object"); }
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto & [k, v] : j.items()) {
    if (!ok.contains(k)) { throw FormatError(std::string(section) + ": unknown key '" + k + "'"); }
  }
}

template <typename T>
void read(const Json & j, const char * key, T & out)
{
  if (j.contains(key)) { out = j.at(key).get<T>(); }
}

Scenario parse_scenario(const Json & j)
{
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "table_one") { return table_one_scenario(); }
    if (name == "four_light") { return four_light_scenario(); }
    throw FormatError("unknown scenario preset '" + name + "'");
  }
  check_keys(j, "scenario", {"route", "schedule", "v0"});
  Scenario sc;
  sc.route = route_from_json(j.at("route"));
  read(j, "v0", sc.v0);
  sc.schedule = j.contains("schedule") ? schedule_from_json(j.at("schedule")) : green_wave(sc.route, 0, sc.v0);
  return sc;
}

void parse_ranges(const Json & j, RandomScenarioRanges & r)
{
  check_keys(j, "training.ranges", {"green", "yellow", "red", "distance", "v0"});
  auto pair_i = [&](const char * key, int & lo, int & hi) {
    if (j.contains(key)) {
      const auto p = j.at(key).get<std::vector<int>>();
      if (p.size() != 2 || p[0] > p[1]) { throw FormatError(std::string("training.ranges.") + key + ": expected [lo, hi]"); }
      lo = p[0];
      hi = p[1];
    }
  };
  auto pair_d = [&](const char * key, double & lo, double & hi) {
    if (j.contains(key)) {
      const auto p = j.at(key).get<std::vector<double>>();
      if (p.size() != 2 || p[0] > p[1]) { throw FormatError(std::string("training.ranges.") + key + ": expected [lo, hi]"); }
      lo = p[0];
      hi = p[1];
    }
  };
  pair_i("green", r.green_lo, r.green_hi);
  pair_i("yellow", r.yellow_lo, r.yellow_hi);
  pair_i("red", r.red_lo, r.red_hi);
  pair_d("distance", r.dist_lo, r.dist_hi);
  pair_d("v0", r.v0_lo, r.v0_hi);
}

}  // namespace

ExperimentConfig parse_config(const Json & j)
{
  check_keys(j, "config", {"scenario", "vehicle", "noise", "mpc", "cruise", "energy", "training", "evaluation"});
  ExperimentConfig c;
  SimConfig & s = c.sim;
  try {
    s.scenario = j.contains("scenario") ? parse_scenario(j.at("scenario")) : table_one_scenario();

    if (j.contains("vehicle")) {
      const Json & v = j.at("vehicle");
      check_keys(v, "vehicle", {"v_max", "a_min", "a_max"});
      read(v, "v_max", s.scenario.route.v_max);
      read(v, "a_min", s.scenario.route.a_min);
      read(v, "a_max", s.scenario.route.a_max);
    }
    s.control.mpc.limits = s.scenario.route.limits();

    if (j.contains("noise")) {
      const Json & n = j.at("noise");
      check_keys(n, "noise", {"bound", "L"});
      if (n.contains("bound")) {
        const auto b = n.at("bound").get<std::vector<double>>();
        if (b.size() != 2) { throw FormatError("noise.bound: expected [lo, hi]"); }
        s.noise.bound = {b[0], b[1]};
      }
      read(n, "L", s.control.mpc.L);
    }
    s.control.mpc.W = s.noise.bound;

    if (j.contains("mpc")) {
      const Json & m = j.at("mpc");
      check_keys(m, "mpc", {"N", "M", "terminal_cost", "noise_seed"});
      read(m, "N", s.control.mpc.N);
      read(m, "M", s.control.mpc.M);
      read(m, "noise_seed", s.control.noise_seed);
      if (m.contains("terminal_cost")) {
        const auto f = m.at("terminal_cost").get<std::string>();
        if (f == "epigraph") {
          s.control.mpc.form = TerminalCostForm::Epigraph;
        } else if (f == "weights") {
          s.control.mpc.form = TerminalCostForm::Weights;
        } else {
          throw FormatError("mpc.terminal_cost: expected 'epigraph' or 'weights'");
        }
      }
    }

    if (j.contains("cruise")) {
      const Json & cr = j.at("cruise");
      check_keys(cr, "cruise", {"v_ref", "k_p", "stop_margin"});
      read(cr, "v_ref", s.control.cruise.v_ref);
      read(cr, "k_p", s.control.cruise.k_p);
      read(cr, "stop_margin", s.control.cruise.stop_margin);
    }

    if (j.contains("energy")) {
      const Json & e = j.at("energy");
      check_keys(e, "energy", {"truth", "model"});
      if (e.contains("truth")) { s.truth = energy_model_from_json(e.at("truth")); }
      if (e.contains("model")) { s.control.mpc.energy = energy_model_from_json(e.at("model")); }
    }

    if (j.contains("evaluation")) {
      const Json & ev = j.at("evaluation");
      check_keys(ev, "evaluation", {"controller", "runs", "seed", "max_steps", "threads"});
      if (ev.contains("controller")) { s.controller = controller_kind_from_string(ev.at("controller").get<std::string>()); }
      read(ev, "runs", c.runs);
      read(ev, "seed", s.seed);
      read(ev, "max_steps", s.max_steps);
      read(ev, "threads", c.threads);
    }

    TrainConfig & t = c.train;
    if (j.contains("training")) {
      const Json & tr = j.at("training");
      check_keys(tr, "training",
        {"iterations", "mc_runs", "augment_runs", "init_speeds", "init_runs", "random_augmentations", "ranges",
          "settle_window", "settle_tol", "seed", "t_max", "cost_tol", "cost_max_iter"});
      read(tr, "iterations", t.iterations);
      read(tr, "mc_runs", t.mc_runs);
      read(tr, "augment_runs", t.augment_runs);
      read(tr, "init_speeds", t.init_speeds);
      read(tr, "init_runs", t.init_runs);
      read(tr, "random_augmentations", t.random_augmentations);
      read(tr, "settle_window", t.settle_window);
      read(tr, "settle_tol", t.settle_tol);
      read(tr, "seed", t.seed);
      read(tr, "t_max", t.learn.t_max);
      read(tr, "cost_tol", t.learn.cost.tol);
      read(tr, "cost_max_iter", t.learn.cost.max_iter);
      if (tr.contains("ranges")) { parse_ranges(tr.at("ranges"), t.ranges); }
    }
    t.fixed = s.scenario;
    t.base = s;
    t.threads = c.threads;
  } catch (const FormatError &) {
    throw;
  } catch (const Json::exception & e) {
    throw FormatError(std::string("config: ") + e.what());
  } catch (const Error & e) {
    throw FormatError(e.what());
  }

  if (c.runs < 1) { throw FormatError("evaluation.runs must be at least 1"); }
  if (c.train.learn.t_max < 1) { throw FormatError("training.t_max must be at least 1"); }
  try {
    s.validate();
    c.train.validate();
  } catch (const FormatError &) {
    throw;
  } catch (const Error & e) {
    throw FormatError(e.what());
  }
  c.hash = hex64(fnv1a(j.dump()));
  return c;
}

ExperimentConfig load_config(const std::string & path)
{
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error & e) {
    throw FormatError(path + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace ecodrive::io
