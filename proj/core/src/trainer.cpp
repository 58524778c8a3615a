#include "mccsod/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>
#include <torch/torch.h>

#include "mccsod/archive.hpp"
#include "mccsod/checkpoint.hpp"
#include "mccsod/errors.hpp"

namespace mccsod {

namespace fs = std::filesystem;

TrainConfig TrainConfig::eorssd() {
  TrainConfig c;
  c.epochs = 39;
  return c;
}

TrainConfig TrainConfig::orssd() {
  TrainConfig c;
  c.epochs = 34;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(initial_lr > 0)) throw ConfigError("initial_lr must be positive");
  if (!(lr_decay_factor > 0)) throw ConfigError("lr_decay_factor must be positive");
  if (grad_clip && !(*grad_clip > 0)) throw ConfigError("grad_clip must be positive");
  if (!loss.use_bce && !loss.use_iou && !loss.use_fmeasure) throw ConfigError("at least one saliency loss is required");
}

double learning_rate_for_epoch(const TrainConfig& config, int epoch) {
  return epoch <= config.lr_decay_epoch ? config.initial_lr : config.initial_lr / config.lr_decay_factor;
}

std::int64_t samples_per_epoch(std::size_t originals, bool augment) {
  return static_cast<std::int64_t>(originals) * (augment ? 8 : 1);
}

void TrainLog::write_jsonl(const fs::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  for (const auto& s : steps) {
    nlohmann::json j;
    j["iteration"] = s.iteration;
    j["epoch"] = s.epoch;
    j["lr"] = s.learning_rate;
    for (int t = 0; t < kLevels; ++t) {
      const auto lvl = std::to_string(t + 1);
      j["sal" + lvl] = s.loss.per_level_saliency[t];
      j["edge" + lvl] = s.loss.per_level_edge[t];
      j["bce" + lvl] = s.loss.components[t].bce;
      j["iou" + lvl] = s.loss.components[t].iou;
      j["fm" + lvl] = s.loss.components[t].fm;
    }
    j["total"] = s.loss.total;
    os << j.dump() << "\n";
  }
}

SampleSource SampleSource::from_manifest(const DatasetManifest& manifest, const PrepareOptions& opts) {
  return {manifest.size(), [manifest, opts](std::size_t i) { return load_sample(manifest, i, opts); }};
}

SampleSource SampleSource::from_samples(std::vector<Sample> samples) {
  auto shared = std::make_shared<std::vector<Sample>>(std::move(samples));
  return {shared->size(), [shared](std::size_t i) { return shared->at(i); }};
}

std::vector<std::pair<std::size_t, int>> epoch_order(std::size_t originals, bool augment, std::uint64_t seed,
                                                     int epoch) {
  std::vector<std::pair<std::size_t, int>> order;
  const int variants = augment ? 8 : 1;
  order.reserve(originals * variants);
  for (std::size_t i = 0; i < originals; ++i)
    for (int v = 0; v < variants; ++v) order.emplace_back(i, v);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  // Fisher-Yates with our own index draws so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

namespace {

const char* component_name(int which) {
  static const char* names[] = {"bce", "iou", "fm", "edge"};
  return names[which];
}

void check_finite(const LossBundle& b, std::int64_t iteration) {
  for (int t = 0; t < kLevels; ++t) {
    const double vals[] = {b.components[t].bce, b.components[t].iou, b.components[t].fm, b.per_level_edge[t]};
    for (int k = 0; k < 4; ++k)
      if (!std::isfinite(vals[k]))
        throw NumericError("non-finite " + std::string(component_name(k)) + " loss at level " + std::to_string(t + 1) +
                           ", iteration " + std::to_string(iteration));
  }
  if (!std::isfinite(b.total)) throw NumericError("non-finite total loss at iteration " + std::to_string(iteration));
}

struct Batch {
  torch::Tensor image, gt, edge_gt;
};

Batch make_batch(const std::vector<Sample>& items, torch::Dtype dtype, torch::Device device) {
  std::vector<torch::Tensor> im, g, e;
  for (const auto& s : items) {
    im.push_back(s.image);
    g.push_back(s.gt);
    e.push_back(s.edge_gt);
  }
  return {torch::stack(im).to(device, dtype), torch::stack(g).to(device, dtype), torch::stack(e).to(device, dtype)};
}

}  // namespace

TrainLog train_network(MccNet& net, const TrainConfig& config, const SampleSource& data, const TrainOutputs& outputs) {
  config.validate();
  if (data.size == 0) throw EmptyManifestError("training set is empty");
  if (!outputs.directory.empty()) fs::create_directories(outputs.directory);

  net->train();
  torch::optim::Adam optimizer(net->parameters(),
                               torch::optim::AdamOptions(config.initial_lr).betas({0.9, 0.999}).eps(1e-8).weight_decay(0));
  TrainLog log;
  std::int64_t iteration = 0;
  std::vector<Sample> originals_cache;
  const bool cache = data.size <= 64;
  if (cache)
    for (std::size_t i = 0; i < data.size; ++i) originals_cache.push_back(data.load(i));
  const auto group = dihedral_group();

  bool done = false;
  for (int epoch = 1; epoch <= config.epochs && !done; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = learning_rate_for_epoch(config, epoch);
    for (auto& g : optimizer.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);

    const auto order = epoch_order(data.size, config.augment, config.seed, epoch);
    for (std::size_t start = 0; start < order.size() && !done; start += config.batch_size) {
      const auto stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<Sample> items;
      for (std::size_t k = start; k < stop; ++k) {
        const auto& [idx, variant] = order[k];
        Sample s = cache ? originals_cache[idx] : data.load(idx);
        items.push_back(variant == 0 ? std::move(s) : transform(s, group[variant]));
      }
      auto batch = make_batch(items, config.dtype, config.device);

      ++iteration;
      optimizer.zero_grad();
      auto out = net->forward(batch.image);
      auto loss = total_loss(out, batch.gt, batch.edge_gt, config.loss);
      check_finite(loss, iteration);
      loss.objective.backward();
      if (config.grad_clip) torch::nn::utils::clip_grad_norm_(net->parameters(), *config.grad_clip);
      optimizer.step();

      StepRecord rec{iteration, epoch, lr, loss};
      rec.loss.objective = torch::Tensor();
      if (outputs.on_step) outputs.on_step(rec);
      log.steps.push_back(std::move(rec));
      if (config.max_iterations > 0 && iteration >= config.max_iterations) done = true;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.epochs.push_back({epoch, lr, secs});

    const TrainProgress progress{epoch, iteration, lr};
    if (!outputs.directory.empty() && config.snapshot_every > 0 && epoch % config.snapshot_every == 0 && !done &&
        epoch != config.epochs)
      save_checkpoint(outputs.directory / ("snapshot_epoch" + std::to_string(epoch) + ".ckpt"), *net, progress,
                      &optimizer);
    if (!outputs.directory.empty() && (done || epoch == config.epochs)) {
      save_checkpoint(outputs.directory / "final.ckpt", *net, progress, &optimizer);
      log.write_jsonl(outputs.directory / "train_log.jsonl");
    }
  }
  net->eval();
  return log;
}

TrainResult train(const NetworkConfig& net_config, const TrainConfig& config, const SampleSource& data,
                  const TrainOutputs& outputs) {
  config.validate();
  TrainResult r;
  r.net = make_network(net_config, config.seed);
  if (net_config.use_pretrained_encoder) {
    if (config.pretrained_archive.empty())
      throw ConfigError("network config asks for a pretrained encoder but no archive was given");
    load_pretrained(*r.net->encoder, TensorArchive::load(config.pretrained_archive));
  }
  r.net->to(config.device, config.dtype);
  r.log = train_network(r.net, config, data, outputs);
  if (!outputs.directory.empty()) r.final_checkpoint = outputs.directory / "final.ckpt";
  return r;
}

OverfitResult overfit_smoke(const NetworkConfig& net_config, TrainConfig config, const SampleSource& data,
                            std::size_t n_images, std::int64_t iterations, const TrainOutputs& outputs) {
  if (n_images == 0 || n_images > data.size)
    throw ConfigError("overfit_smoke: need 1.." + std::to_string(data.size) + " images");
  if (iterations < 1) throw ConfigError("overfit_smoke: iterations must be positive");
  std::vector<Sample> subset;
  for (std::size_t i = 0; i < n_images; ++i) subset.push_back(data.load(i));
  const auto steps_per_epoch = (static_cast<std::int64_t>(n_images) + config.batch_size - 1) / config.batch_size;
  config.augment = false;
  config.max_iterations = iterations;
  config.epochs = static_cast<int>((iterations + steps_per_epoch - 1) / steps_per_epoch);
  // The tiny subset is memorized at a constant learning rate.
  config.lr_decay_epoch = config.epochs;

  OverfitResult res;
  auto tr = train(net_config, config, SampleSource::from_samples(subset), outputs);
  res.net = tr.net;
  res.log = std::move(tr.log);

  Predictor predictor(res.net);
  double sum = 0;
  for (const auto& s : subset) {
    auto pred = predictor.predict(s.image.unsqueeze(0).to(config.dtype));
    auto m = evaluate_image(tensor_to_mat(pred), tensor_to_mat(s.gt));
    sum += m.f.max;
    res.metrics.push_back(std::move(m));
  }
  res.mean_f_max = sum / static_cast<double>(subset.size());
  return res;
}

}  // namespace mccsod
