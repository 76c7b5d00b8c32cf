#pragma once

#include <functional>
#include <iosfwd>
#include <string>

namespace ecodrive::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kRuntime = 3;

extern const char * const kToolVersion;

/// Runs a command body and maps exceptions to exit codes, printing the message to err.
int guarded(const std::function<int()> & body, std::ostream & err);

/// Fits an energy model to a `v,u,dE` CSV; writes the model JSON and prints the residual report.
int regress_energy(const std::string & csv_in, const std::string & json_out, std::ostream & out);

/// Trains from the config; writes dataset.csv, values.json, sets.json, curve.csv, config.json and manifest.json.
int train(const std::string & config, const std::string & out_dir, std::ostream & out);

/// One closed-loop run: trajectory.csv, diagnostics.jsonl, manifest.json.
int run(const std::string & config, const std::string & artifacts_dir, const std::string & out_dir, std::ostream & out);

/// Monte Carlo runs: summary.json, manifest.json.
int evaluate(const std::string & config, const std::string & artifacts_dir, const std::string & out_dir,
  std::ostream & out);

/// R_t from a light-frame dataset. Target "before" or "after" runs the exact-t
/// recursion; "after-absorbing" gives the set the controller uses.
int sets(const std::string & config, const std::string & dataset_csv, int t, const std::string & target,
  const std::string & json_out);

/// Percentage deltas of a candidate summary against a baseline summary.
int compare(const std::string & baseline, const std::string & candidate, const std::string & json_out,
  std::ostream & out);

}  // namespace ecodrive::cli
