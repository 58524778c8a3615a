#pragma once

// Channel and spatial attention primitives shared by every MCCM instance.

#include <cstdint>

#include <torch/nn/module.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/pimpl.h>

namespace mccsod {

struct ValueRange {
  double lo;
  double hi;
};

inline constexpr ValueRange kUnitRange{0.0, 1.0};
inline constexpr ValueRange kForegroundEdgeRange{0.0, 2.0};
inline constexpr ValueRange kBackgroundRange{-1.0, 1.0};

/// Per-channel gating weights, shape (batch, channels), every element in (0,1).
struct ChannelWeights {
  torch::Tensor values;

  std::int64_t channels() const { return values.size(1); }
};

/// Single-channel map (batch, 1, h, w) with a declared closed value range.
struct AttentionMap {
  torch::Tensor values;
  ValueRange range = kUnitRange;

  /// True when every element lies in [range.lo, range.hi].
  bool within_range() const;
};

// Throws DimensionError unless `f` is a rank-4 floating tensor.
void check_feature_map(const torch::Tensor& f, const char* what);

/// Squeeze-and-excitation style gate: spatial global max pool, two fully
/// connected layers (c -> c/r -> c) and a sigmoid. The two layers are applied
/// back to back with no activation between them.
class ChannelAttentionImpl : public torch::nn::Module {
 public:
  explicit ChannelAttentionImpl(std::int64_t channels, std::int64_t reduction = 16);

  ChannelWeights forward(const torch::Tensor& f);

  std::int64_t channels() const { return channels_; }
  std::int64_t hidden() const { return hidden_; }

  torch::nn::Linear fc1{nullptr};
  torch::nn::Linear fc2{nullptr};

 private:
  std::int64_t channels_;
  std::int64_t hidden_;
};
TORCH_MODULE(ChannelAttention);

/// Scales every channel of `f` by its weight: out[b,c,h,w] = f[b,c,h,w] * w[b,c].
torch::Tensor apply_channel_weights(const torch::Tensor& f, const ChannelWeights& w);

/// Channel global max pool, one 1->1 convolution (odd kernel, same padding)
/// and a sigmoid. Output range (0,1).
class SpatialAttentionImpl : public torch::nn::Module {
 public:
  explicit SpatialAttentionImpl(std::int64_t kernel_size = 7);

  AttentionMap forward(const torch::Tensor& f);

  torch::nn::Conv2d conv{nullptr};
};
TORCH_MODULE(SpatialAttention);

}  // namespace mccsod
