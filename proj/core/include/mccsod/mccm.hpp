#pragma once

// Multi-Content Complementation Module: fuses foreground, edge, background and
// global image-level content of one encoder level.

#include <cstdint>
#include <optional>
#include <string>

#include "mccsod/attention.hpp"
#include "mccsod/layers.hpp"

namespace mccsod {

struct MccmConfig {
  bool foreground = true;
  bool edge = true;
  bool background = true;
  bool global = true;
  bool short_connection = true;

  static MccmConfig full() { return {}; }
  /// All content branches removed; the module is an identity skip.
  static MccmConfig baseline() { return {false, false, false, false, true}; }

  /// Throws ConfigError for background without foreground/edge, or for a
  /// module with neither branches nor short connection.
  void validate() const;

  bool has_foreground_edge() const { return foreground || edge; }
  bool is_identity() const { return branch_count() == 0 && short_connection; }
  /// Number of polished feature streams entering the fusion convolution.
  int branch_count() const;
  /// "Baseline", "Baseline+FG+EG", ..., with " w/o original content" appended
  /// when the short connection is off.
  std::string label() const;

  bool operator==(const MccmConfig&) const = default;
};

struct MccmOptions {
  std::int64_t reduction = 16;
  std::int64_t spatial_kernel = 7;

  bool operator==(const MccmOptions&) const = default;
};

struct MccmOutputs {
  torch::Tensor features;               // f_mccm, same shape as f_e
  std::optional<AttentionMap> edge_map;  // a_e, present when the edge branch is on
};

/// Every intermediate of one forward pass; maps for disabled branches stay undefined.
struct MccmTrace {
  torch::Tensor f_ca;
  AttentionMap a_f, a_e, a_fe, a_b, a_g;
  torch::Tensor f_fe, f_b, f_g;
  torch::Tensor polished_fe, polished_b, polished_g;
  torch::Tensor fused;
  torch::Tensor features;
};

/// a_fe = a_f + a_e, range [0,2].
AttentionMap foreground_edge_map(const AttentionMap& a_f, const AttentionMap& a_e);

/// Reverse attention a_b = 1 - a_fe. Debug builds reject inputs outside [0,2].
AttentionMap background_map(const AttentionMap& a_fe);

/// Broadcasts a single-channel map over every channel of `f`.
torch::Tensor apply_spatial_map(const AttentionMap& a, const torch::Tensor& f);

class MccmImpl : public torch::nn::Module {
 public:
  MccmImpl(std::int64_t channels, MccmConfig config = {}, MccmOptions options = {});

  MccmOutputs forward(const torch::Tensor& f_e);
  MccmTrace trace(const torch::Tensor& f_e);

  /// f_ca = CA(f_e) (.) f_e.
  torch::Tensor purify(const torch::Tensor& f_e);
  /// a_g = SA(up(conv1x1(GAP_s(f_e)))).
  AttentionMap global_image_map(const torch::Tensor& f_e);

  const MccmConfig& config() const { return config_; }
  std::int64_t channels() const { return channels_; }

  // Submodules that the configuration does not need are left null.
  ChannelAttention ca{nullptr};
  SpatialAttention sa_fg{nullptr};
  SpatialAttention sa_edge{nullptr};
  torch::nn::Conv2d gic_conv{nullptr};
  SpatialAttention sa_gic{nullptr};
  torch::nn::Conv2d polish_fe{nullptr};
  torch::nn::Conv2d polish_bg{nullptr};
  torch::nn::Conv2d polish_gic{nullptr};
  torch::nn::Conv2d fuse{nullptr};

 private:
  void check_input(const torch::Tensor& f_e) const;

  std::int64_t channels_;
  MccmConfig config_;
};
TORCH_MODULE(Mccm);

}  // namespace mccsod
