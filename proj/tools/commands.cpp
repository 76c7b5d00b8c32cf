#include "commands.hpp"

#include "ecodrive/config.hpp"
#include "ecodrive/io.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace ecodrive::cli {

const char * const kToolVersion = "ecodrive 0.1.0";

namespace fs = std::filesystem;
using io::Json;

namespace {

class UsageError : public Error
{
public:
  using Error::Error;
};

void require_file(const std::string & path, const char * what)
{
  if (!fs::is_regular_file(path)) { throw UsageError(std::string(what) + " not found: " + path); }
}

io::ExperimentConfig config_at(const std::string & path)
{
  require_file(path, "config");
  return io::load_config(path);
}

/// Writes the manifest listing each output file with its content hash.
void write_manifest(const fs::path & dir, const char * command, const io::ExperimentConfig & cfg, std::uint64_t seed,
  const std::vector<std::string> & files, const std::string & artifacts = {})
{
  Json hashes = Json::object();
  for (const auto & f : files) { hashes[f] = io::hex64(io::fnv1a(io::read_file(dir / f))); }
  Json m{{"tool_version", kToolVersion}, {"command", command}, {"config_hash", cfg.hash}, {"seed", seed},
    {"files", hashes}};
  if (!artifacts.empty()) { m["artifacts"] = artifacts; }
  io::write_file(dir / "manifest.json", m.dump(2) + "\n");
}

std::shared_ptr<const LearnedArtifacts> artifacts_for(const io::ExperimentConfig & cfg, const std::string & dir)
{
  if (cfg.sim.controller == ControllerKind::Cruise) { return nullptr; }
  if (dir.empty()) { throw UsageError("controller 'mpc' needs --artifacts"); }
  require_file((fs::path(dir) / "dataset.csv").string(), "artifact");
  require_file((fs::path(dir) / "values.json").string(), "artifact");
  return std::make_shared<LearnedArtifacts>(io::load_artifacts(dir, cfg.sim.control.mpc, cfg.train.learn.t_max));
}

/// Stages that differ from their predecessor; later stages repeat the last entry.
Json distinct_stages(const SetSequence & seq, TargetKind kind)
{
  Json out = Json::array();
  std::string prev;
  for (int t = 0; t <= seq.t_max(); ++t) {
    Json r = io::to_json(ControllableSet{t, seq[t], kind, 0.0});
    std::string region = r["region"].dump();
    if (region != prev) { out.push_back(std::move(r)); }
    prev = std::move(region);
  }
  return out;
}

double pct(double base, double cand) { return base != 0 ? 100.0 * (cand - base) / base : 0.0; }

}  // namespace

int guarded(const std::function<int()> & body, std::ostream & err)
{
  try {
    return body();
  } catch (const UsageError & e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const io::FormatError & e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception & e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

int regress_energy(const std::string & csv_in, const std::string & json_out, std::ostream & out)
{
  require_file(csv_in, "CSV");
  std::istringstream in(io::read_file(csv_in));
  const auto samples = io::read_energy_csv(in);
  EnergyFit fit;
  try {
    fit = fit_energy_model(samples);
  } catch (const Error & e) {
    throw UsageError(e.what());
  }
  io::write_file(json_out, io::to_json(fit.model, &fit).dump(2) + "\n");
  out << "samples " << samples.size() << "\n"
      << "rms residual [kJ] " << fit.rms_residual << "\n"
      << "total energy error " << 100.0 * fit.total_rel_error << " %\n"
      << "PSD projection " << (fit.projected ? "applied" : "not needed") << "\n";
  return kOk;
}

int train(const std::string & config, const std::string & out_dir, std::ostream & out)
{
  const auto cfg = config_at(config);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const TrainResult res = ecodrive::train(cfg.train, [&](const CurveRow & r) {
    out << "iter " << r.iter << "  data " << r.dataset_size << "  energy " << r.mean_energy << " +- " << r.std_energy
        << " kJ  fallback " << r.fallback_rate << "\n";
  });
  io::save_artifacts(dir, *res.artifacts);
  Json sets{{"s_tl", 0.0}};
  sets["before"] = res.artifacts->before ? distinct_stages(*res.artifacts->before, TargetKind::BeforeLight) : Json::array();
  sets["after"] = res.artifacts->after ? distinct_stages(*res.artifacts->after, TargetKind::AfterLight) : Json::array();
  io::write_file(dir / "sets.json", sets.dump() + "\n");
  std::ostringstream curve;
  io::write_curve_csv(curve, res.curve);
  io::write_file(dir / "curve.csv", curve.str());
  io::write_file(dir / "config.json", io::read_file(config));
  write_manifest(dir, "train", cfg, cfg.train.seed, {"dataset.csv", "values.json", "sets.json", "curve.csv", "config.json"});
  return kOk;
}

int run(const std::string & config, const std::string & artifacts_dir, const std::string & out_dir, std::ostream & out)
{
  const auto cfg = config_at(config);
  const auto art = artifacts_for(cfg, artifacts_dir);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const TrajectoryLog log = run_closed_loop(cfg.sim, art);
  std::ostringstream traj, diag;
  io::write_trajectory_csv(traj, log);
  io::write_diagnostics_jsonl(diag, log);
  io::write_file(dir / "trajectory.csv", traj.str());
  io::write_file(dir / "diagnostics.jsonl", diag.str());
  write_manifest(dir, "run", cfg, cfg.sim.seed, {"trajectory.csv", "diagnostics.jsonl"}, artifacts_dir);
  out << "energy " << log.energy << " kJ  time " << log.travel_time << " s  red " << log.red_violations << "  late "
      << log.deadline_misses << "  fallback steps " << log.fallback_steps << (log.complete ? "" : "  INCOMPLETE")
      << "\n";
  return kOk;
}

int evaluate(const std::string & config, const std::string & artifacts_dir, const std::string & out_dir,
  std::ostream & out)
{
  const auto cfg = config_at(config);
  const auto art = artifacts_for(cfg, artifacts_dir);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const McResult mc = monte_carlo(cfg.sim, cfg.runs, art, cfg.threads);
  Json j = io::to_json(mc.summary);
  j["controller"] = to_string(cfg.sim.controller);
  io::write_file(dir / "summary.json", j.dump(2) + "\n");
  write_manifest(dir, "evaluate", cfg, cfg.sim.seed, {"summary.json"}, artifacts_dir);
  const auto & s = mc.summary;
  out << to_string(cfg.sim.controller) << ": " << s.runs << " runs  energy " << s.energy.mean << " [" << s.energy.min
      << ", " << s.energy.max << "] kJ  time " << s.travel_time.mean << " [" << s.travel_time.min << ", "
      << s.travel_time.max << "] s  red " << s.red_violations << "  fallback rate " << s.fallback_rate << "\n";
  return kOk;
}

int sets(const std::string & config, const std::string & dataset_csv, int t, const std::string & target,
  const std::string & json_out)
{
  const auto cfg = config_at(config);
  if (t < 0) { throw UsageError("t must be nonnegative"); }
  TargetKind kind = TargetKind::AfterLight;
  bool absorbing = false;
  if (target == "before") {
    kind = TargetKind::BeforeLight;
  } else if (target == "after-absorbing") {
    absorbing = true;
  } else if (target != "after") {
    throw UsageError("target must be 'before', 'after' or 'after-absorbing'");
  }
  require_file(dataset_csv, "dataset");
  std::istringstream in(io::read_file(dataset_csv));
  const Dataset d = io::read_dataset_csv(in);
  const SetSequence seq(d, light_target(kind, 0.0), cfg.sim.control.mpc.robust_model(), t, absorbing);
  const ControllableSet s{t, seq[t], kind, 0.0};
  io::write_file(json_out, io::to_json(s).dump(2) + "\n");
  return kOk;
}

int compare(const std::string & baseline, const std::string & candidate, const std::string & json_out,
  std::ostream & out)
{
  require_file(baseline, "summary");
  require_file(candidate, "summary");
  Json b, c;
  try {
    b = Json::parse(io::read_file(baseline));
    c = Json::parse(io::read_file(candidate));
  } catch (const Json::parse_error & e) {
    throw io::FormatError(e.what());
  }
  Json report = Json::object();
  for (const char * metric : {"energy_kJ", "travel_time_s"}) {
    if (!b.contains(metric) || !c.contains(metric)) { throw io::FormatError(std::string("summary lacks ") + metric); }
    Json m = Json::object();
    for (const char * k : {"mean", "min", "max"}) {
      const double bv = b[metric][k].get<double>(), cv = c[metric][k].get<double>();
      m[k] = {{"baseline", bv}, {"candidate", cv}, {"delta_pct", pct(bv, cv)}};
    }
    report[metric] = m;
  }
  report["baseline"] = b.value("controller", "baseline");
  report["candidate"] = c.value("controller", "candidate");
  io::write_file(json_out, report.dump(2) + "\n");
  const double e = report["energy_kJ"]["mean"]["delta_pct"].get<double>();
  const double tt = report["travel_time_s"]["mean"]["delta_pct"].get<double>();
  char buf[160];
  std::snprintf(buf, sizeof buf, "mean energy %+.2f %%  mean travel time %+.2f %%\n", e, tt);
  out << buf;
  return kOk;
}

}  // namespace ecodrive::cli
