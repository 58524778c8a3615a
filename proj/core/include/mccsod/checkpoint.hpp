#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <torch/optim/adam.h>

#include "mccsod/archive.hpp"
#include "mccsod/network.hpp"

namespace mccsod {

inline constexpr const char* kCheckpointFormat = "mccsod-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct TrainProgress {
  int epoch = 0;
  std::int64_t iteration = 0;
  double learning_rate = 0.0;
};

/// Parameters are stored as "<name>" in their own dtype; Adam moments as
/// "adam.exp_avg.<name>" / "adam.exp_avg_sq.<name>" / "adam.step.<name>".
/// Metadata is a JSON record holding the format tag, network config and progress.
void save_checkpoint(const std::filesystem::path& path, MccNetImpl& net, const TrainProgress& progress = {},
                     torch::optim::Adam* optimizer = nullptr);

struct Checkpoint {
  MccNet net{nullptr};
  TrainProgress progress;
  TensorArchive archive;
};

/// Rebuilds the network described by the metadata and copies every parameter.
/// Throws IoError (format), MissingWeightError or DimensionError.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Restores Adam moments saved by save_checkpoint into `optimizer`, whose
/// parameters must be `net`'s parameters in registration order.
void restore_optimizer(const TensorArchive& archive, MccNetImpl& net, torch::optim::Adam& optimizer);

std::string network_config_to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(const std::string& text);

}  // namespace mccsod
