#include "mccsod/checkpoint.hpp"

#include <json.hpp>
#include <torch/torch.h>

#include "mccsod/archive.hpp"
#include "mccsod/errors.hpp"

namespace mccsod {

using nlohmann::json;

namespace {

json to_json(const NetworkConfig& c) {
  json j;
  j["mccm"] = {{"foreground", c.mccm.foreground},
               {"edge", c.mccm.edge},
               {"background", c.mccm.background},
               {"global", c.mccm.global},
               {"short_connection", c.mccm.short_connection}};
  j["reduction"] = c.mccm_options.reduction;
  j["spatial_kernel"] = c.mccm_options.spatial_kernel;
  j["input_size"] = c.input_size;
  j["use_pretrained_encoder"] = c.use_pretrained_encoder;
  j["channels"] = c.channels;
  if (c.normalization) j["normalization"] = {{"mean", c.normalization->mean}, {"stddev", c.normalization->stddev}};
  return j;
}

NetworkConfig from_json(const json& j) {
  NetworkConfig c;
  const auto& m = j.at("mccm");
  c.mccm = {m.at("foreground").get<bool>(), m.at("edge").get<bool>(), m.at("background").get<bool>(),
            m.at("global").get<bool>(), m.at("short_connection").get<bool>()};
  c.mccm_options.reduction = j.at("reduction").get<std::int64_t>();
  c.mccm_options.spatial_kernel = j.at("spatial_kernel").get<std::int64_t>();
  c.input_size = j.at("input_size").get<std::int64_t>();
  c.use_pretrained_encoder = j.at("use_pretrained_encoder").get<bool>();
  c.channels = j.at("channels").get<LevelChannels>();
  if (j.contains("normalization"))
    c.normalization = Normalization{j["normalization"].at("mean").get<std::array<double, 3>>(),
                                    j["normalization"].at("stddev").get<std::array<double, 3>>()};
  return c;
}

}  // namespace

std::string network_config_to_json(const NetworkConfig& config) { return to_json(config).dump(); }

NetworkConfig network_config_from_json(const std::string& text) {
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed network config record: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, MccNetImpl& net, const TrainProgress& progress,
                     torch::optim::Adam* optimizer) {
  TensorArchive ar;
  for (const auto& item : net.named_parameters()) ar.put(item.key(), item.value());
  if (optimizer != nullptr) {
    auto& state = optimizer->state();
    for (const auto& item : net.named_parameters()) {
      auto it = state.find(item.value().unsafeGetTensorImpl());
      if (it == state.end()) continue;
      auto& s = static_cast<torch::optim::AdamParamState&>(*it->second);
      ar.put("adam.exp_avg." + item.key(), s.exp_avg());
      ar.put("adam.exp_avg_sq." + item.key(), s.exp_avg_sq());
      ar.put("adam.step." + item.key(), torch::tensor({s.step()}, torch::kInt64));
    }
  }
  json meta;
  meta["format"] = kCheckpointFormat;
  meta["version"] = kCheckpointVersion;
  meta["config"] = to_json(net.config());
  meta["epoch"] = progress.epoch;
  meta["iteration"] = progress.iteration;
  meta["learning_rate"] = progress.learning_rate;
  meta["has_optimizer_state"] = optimizer != nullptr;
  ar.set_metadata(meta.dump(2));
  ar.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Checkpoint ck;
  ck.archive = TensorArchive::load(path);
  json meta;
  try {
    meta = json::parse(ck.archive.metadata());
  } catch (const json::exception&) {
    throw IoError(path.string() + ": checkpoint metadata is not valid JSON");
  }
  if (meta.value("format", std::string{}) != kCheckpointFormat)
    throw IoError(path.string() + " is an archive but not a checkpoint");
  if (meta.value("version", -1) != kCheckpointVersion)
    throw IoError(path.string() + ": unsupported checkpoint version");

  NetworkConfig config;
  try {
    config = from_json(meta.at("config"));
    ck.progress.epoch = meta.at("epoch").get<int>();
    ck.progress.iteration = meta.at("iteration").get<std::int64_t>();
    ck.progress.learning_rate = meta.at("learning_rate").get<double>();
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": incomplete checkpoint metadata (" + e.what() + ")");
  }

  ck.net = MccNet(config);
  auto dtype = torch::kFloat32;
  bool first = true;
  torch::NoGradGuard guard;
  for (const auto& item : ck.net->named_parameters()) {
    const auto& src = ck.archive.at(item.key());
    if (src.sizes() != item.value().sizes())
      throw DimensionError("checkpoint entry '" + item.key() + "' does not match the network shape");
    if (first) {
      dtype = src.scalar_type();
      first = false;
    }
  }
  ck.net->to(dtype);
  for (auto& item : ck.net->named_parameters()) item.value().copy_(ck.archive.at(item.key()));
  return ck;
}

void restore_optimizer(const TensorArchive& archive, MccNetImpl& net, torch::optim::Adam& optimizer) {
  auto& state = optimizer.state();
  for (const auto& item : net.named_parameters()) {
    const auto key = "adam.exp_avg." + item.key();
    if (!archive.contains(key)) continue;
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->exp_avg(archive.at(key).to(item.value().scalar_type()).clone());
    s->exp_avg_sq(archive.at("adam.exp_avg_sq." + item.key()).to(item.value().scalar_type()).clone());
    s->step(archive.at("adam.step." + item.key()).item<std::int64_t>());
    state[item.value().unsafeGetTensorImpl()] = std::move(s);
  }
}

}  // namespace mccsod
