#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <torch/types.h>
#include <c10/core/Device.h>

#include "mccsod/data.hpp"
#include "mccsod/losses.hpp"
#include "mccsod/metrics.hpp"
#include "mccsod/network.hpp"

namespace mccsod {

struct TrainConfig {
  int batch_size = 8;
  double initial_lr = 1e-4;
  /// Last epoch (1-based) trained at initial_lr.
  int lr_decay_epoch = 30;
  double lr_decay_factor = 10.0;
  int epochs = 39;
  std::uint64_t seed = 0;
  bool augment = true;
  LossOptions loss;
  /// Max global gradient norm; unset disables clipping.
  std::optional<double> grad_clip;
  int snapshot_every = 5;
  /// Stops after this many optimizer steps when positive.
  std::int64_t max_iterations = 0;
  torch::Dtype dtype = torch::kFloat32;
  torch::Device device = torch::kCPU;
  /// Archive with encoder weights, used when the network config asks for a
  /// pretrained encoder.
  std::filesystem::path pretrained_archive;

  static TrainConfig eorssd();  // 39 epochs
  static TrainConfig orssd();   // 34 epochs

  void validate() const;
};

/// initial_lr through lr_decay_epoch, initial_lr / lr_decay_factor afterwards.
double learning_rate_for_epoch(const TrainConfig& config, int epoch);

/// Originals plus seven dihedral variants each when augmenting.
std::int64_t samples_per_epoch(std::size_t originals, bool augment);

struct StepRecord {
  std::int64_t iteration = 0;  // 1-based
  int epoch = 0;               // 1-based
  double learning_rate = 0.0;
  LossBundle loss;  // objective tensor released
};

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  /// One JSON object per step: iteration, epoch, lr, the five saliency and five
  /// edge losses, their bce/iou/fm parts and the total.
  void write_jsonl(const std::filesystem::path& path) const;
};

/// Indexable training data; `load(i)` returns original sample i.
struct SampleSource {
  std::size_t size = 0;
  std::function<Sample(std::size_t)> load;

  static SampleSource from_manifest(const DatasetManifest& manifest, const PrepareOptions& opts);
  static SampleSource from_samples(std::vector<Sample> samples);
};

/// Seeded visiting order for one epoch: pairs (original index, dihedral index).
std::vector<std::pair<std::size_t, int>> epoch_order(std::size_t originals, bool augment, std::uint64_t seed,
                                                     int epoch);

struct TrainOutputs {
  /// Snapshots, final checkpoint and train_log.jsonl go here; empty disables writing.
  std::filesystem::path directory;
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  MccNet net{nullptr};
  TrainLog log;
  std::filesystem::path final_checkpoint;
};

/// Adam optimization of the deep-supervision objective over the (augmented)
/// source. Throws NumericError naming the component and iteration when a
/// loss turns non-finite.
TrainResult train(const NetworkConfig& net_config, const TrainConfig& config, const SampleSource& data,
                  const TrainOutputs& outputs = {});

/// Same loop on an existing network (e.g. after restoring a checkpoint).
TrainLog train_network(MccNet& net, const TrainConfig& config, const SampleSource& data,
                       const TrainOutputs& outputs = {});

struct OverfitResult {
  TrainLog log;
  std::vector<ImageMetrics> metrics;  // per training image, S^1 against its own mask
  double mean_f_max = 0.0;
  MccNet net{nullptr};
};

/// Trains on the first `n_images` samples without augmentation for
/// `iterations` steps and scores the result on those same images.
OverfitResult overfit_smoke(const NetworkConfig& net_config, TrainConfig config, const SampleSource& data,
                            std::size_t n_images, std::int64_t iterations, const TrainOutputs& outputs = {});

}  // namespace mccsod
