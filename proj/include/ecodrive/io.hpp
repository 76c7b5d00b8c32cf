#pragma once

#include "ecodrive/controller.hpp"
#include "ecodrive/energy.hpp"
#include "ecodrive/error.hpp"
#include "ecodrive/geometry.hpp"
#include "ecodrive/learning.hpp"
#include "ecodrive/sim.hpp"
#include "ecodrive/traffic.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ecodrive::io {

using Json = nlohmann::json;

/// Malformed input: bad schema, header or value. The CLI maps it to exit code 2.
class FormatError : public Error
{
public:
  using Error::Error;
};

Json to_json(const ConvexRegion2 & r);
ConvexRegion2 region_from_json(const Json & j);

Json to_json(const ControllableSet & s);
ControllableSet controllable_set_from_json(const Json & j);

/// Row-major P plus fit metadata when given.
Json to_json(const EnergyModel<double> & m, const EnergyFit * fit = nullptr);
EnergyModel<double> energy_model_from_json(const Json & j);

Json to_json(const RouteSpec & r);
RouteSpec route_from_json(const Json & j);
Json to_json(const PassSchedule & s);
PassSchedule schedule_from_json(const Json & j);

/// Infinite values are written as "inf". The envelope is rebuilt on reading.
Json to_json(const CostToGoTable & t);
CostToGoTable cost_to_go_from_json(const Json & j);

/// Header `v,u,dE`.
std::vector<EnergySample> read_energy_csv(std::istream & in);
void write_energy_csv(std::ostream & out, const std::vector<EnergySample> & samples);

/// Header `s,v,u,iter,scenario`.
Dataset read_dataset_csv(std::istream & in);
void write_dataset_csv(std::ostream & out, const Dataset & d);

/// Header `t,s_true,s_hat,v,u,signal,segment,dE,fallback`.
void write_trajectory_csv(std::ostream & out, const TrajectoryLog & log);

/// One JSON object per control step.
void write_diagnostics_jsonl(std::ostream & out, const TrajectoryLog & log);

/// Header `iter,dataset_size,mean_energy,std_energy,fallback_rate`.
void write_curve_csv(std::ostream & out, const std::vector<CurveRow> & curve);
std::vector<CurveRow> read_curve_csv(std::istream & in);

/// {"mean","min","max","std"} per metric plus counts.
Json to_json(const McSummary & s);

/// Converged table plus the stage tables.
Json values_to_json(const LearnedArtifacts & a);

/// Writes dataset.csv and values.json into dir.
void save_artifacts(const std::filesystem::path & dir, const LearnedArtifacts & a);

/// Reads dataset.csv and values.json and recomputes the sets from the data.
LearnedArtifacts load_artifacts(const std::filesystem::path & dir, const MpcConfig & cfg, int t_max);

std::uint64_t fnv1a(const std::string & bytes);
std::string hex64(std::uint64_t h);

std::string read_file(const std::filesystem::path & p);
void write_file(const std::filesystem::path & p, const std::string & content);

}  // namespace ecodrive::io
