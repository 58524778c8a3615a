#pragma once

// Sectioned key-value run configuration:
//
//   [network]
//   input_size = 256
//   foreground = true
//   ...
//   [train]
//   batch_size = 8
//
// Unknown sections or keys are rejected so typos do not silently fall back to
// defaults.

#include <filesystem>
#include <string>

#include "mccsod/data.hpp"
#include "mccsod/metrics.hpp"
#include "mccsod/network.hpp"
#include "mccsod/trainer.hpp"

namespace mccsod {

struct RunConfig {
  NetworkConfig network;
  TrainConfig train;
  int edge_band = 1;
  EvalOptions eval;

  PrepareOptions prepare_options() const;
};

/// Sets one key; throws ConfigError for unknown keys or unparsable values.
void set_config_value(RunConfig& config, const std::string& section, const std::string& key,
                      const std::string& value);

/// Applies every key of an INI-style file on top of `config`.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Every key with its resolved value, in the same format the parser reads.
std::string to_config_text(const RunConfig& config);

}  // namespace mccsod
