#pragma once

#include "ecodrive/io.hpp"
#include "ecodrive/sim.hpp"

#include <string>

namespace ecodrive::io {

/// Everything a CLI command needs; see docs/config.md for the schema.
struct ExperimentConfig
{
  /// Scenario, noise, controller and truth for closed-loop runs.
  SimConfig sim;
  /// Training settings; `fixed` and `base` mirror `sim`.
  TrainConfig train;
  int runs{100};
  int threads{0};
  /// Hash of the normalized config text.
  std::string hash;
};

/// Parses and validates a config. Unknown keys and invalid values throw FormatError.
ExperimentConfig parse_config(const Json & j);
ExperimentConfig load_config(const std::string & path);

}  // namespace ecodrive::io
