#include "mccsod/attention.hpp"

#include <algorithm>

#include <torch/torch.h>

#include "mccsod/errors.hpp"

namespace mccsod {

bool AttentionMap::within_range() const {
  if (!values.defined()) return false;
  if (values.numel() == 0) return true;
  auto v = values.detach();
  return v.min().item<double>() >= range.lo && v.max().item<double>() <= range.hi;
}

void check_feature_map(const torch::Tensor& f, const char* what) {
  if (!f.defined() || f.dim() != 4)
    throw DimensionError(std::string(what) + ": expected a rank-4 (batch, channels, height, width) tensor");
  if (!f.is_floating_point()) throw DimensionError(std::string(what) + ": expected floating-point values");
}

ChannelAttentionImpl::ChannelAttentionImpl(std::int64_t channels, std::int64_t reduction)
    : channels_(channels), hidden_(std::max<std::int64_t>(channels / std::max<std::int64_t>(reduction, 1), 1)) {
  if (channels < 1) throw ConfigError("channel attention needs at least one channel");
  fc1 = register_module("fc1", torch::nn::Linear(channels_, hidden_));
  fc2 = register_module("fc2", torch::nn::Linear(hidden_, channels_));
}

ChannelWeights ChannelAttentionImpl::forward(const torch::Tensor& f) {
  check_feature_map(f, "channel_attention");
  if (f.size(1) != channels_)
    throw DimensionError("channel_attention: input has " + std::to_string(f.size(1)) +
                         " channels, parameters expect " + std::to_string(channels_));
  auto pooled = f.amax({2, 3});  // (B, C)
  return {torch::sigmoid(fc2(fc1(pooled)))};
}

torch::Tensor apply_channel_weights(const torch::Tensor& f, const ChannelWeights& w) {
  check_feature_map(f, "apply_channel_weights");
  const auto& v = w.values;
  if (!v.defined() || v.dim() != 2 || v.size(0) != f.size(0) || v.size(1) != f.size(1))
    throw DimensionError("apply_channel_weights: weights must be (batch, channels) matching the feature map");
  return f * v.unsqueeze(-1).unsqueeze(-1);
}

SpatialAttentionImpl::SpatialAttentionImpl(std::int64_t kernel_size) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw ConfigError("spatial attention kernel must be a positive odd size");
  conv = register_module(
      "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(1, 1, kernel_size).padding(kernel_size / 2)));
}

AttentionMap SpatialAttentionImpl::forward(const torch::Tensor& f) {
  check_feature_map(f, "spatial_attention");
  auto pooled = f.amax({1}, /*keepdim=*/true);
  return {torch::sigmoid(conv(pooled)), kUnitRange};
}

}  // namespace mccsod
