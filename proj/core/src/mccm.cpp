#include "mccsod/mccm.hpp"

#include <torch/torch.h>

#include "mccsod/errors.hpp"

namespace mccsod {

void MccmConfig::validate() const {
  if (background && !has_foreground_edge())
    throw ConfigError("MCCM: the background branch is defined from the foreground-edge map; "
                      "enable foreground or edge as well");
  if (branch_count() == 0 && !short_connection)
    throw ConfigError("MCCM: no content branch and no short connection leaves nothing to output");
}

int MccmConfig::branch_count() const {
  return static_cast<int>(has_foreground_edge()) + static_cast<int>(background) + static_cast<int>(global);
}

std::string MccmConfig::label() const {
  std::string s = "Baseline";
  if (foreground) s += "+FG";
  if (edge) s += "+EG";
  if (background) s += "+BG";
  if (global) s += "+GIC";
  if (!short_connection) s += " w/o original content";
  return s;
}

AttentionMap foreground_edge_map(const AttentionMap& a_f, const AttentionMap& a_e) {
  if (a_f.values.sizes() != a_e.values.sizes())
    throw DimensionError("foreground_edge_map: foreground and edge maps differ in shape");
  return {a_f.values + a_e.values, kForegroundEdgeRange};
}

AttentionMap background_map(const AttentionMap& a_fe) {
#ifndef NDEBUG
  AttentionMap probe{a_fe.values, kForegroundEdgeRange};
  if (!probe.within_range()) throw ContractError("background_map: foreground-edge map leaves [0,2]");
#endif
  return {1.0 - a_fe.values, kBackgroundRange};
}

torch::Tensor apply_spatial_map(const AttentionMap& a, const torch::Tensor& f) {
  check_feature_map(f, "apply_spatial_map");
  const auto& v = a.values;
  if (v.dim() != 4 || v.size(1) != 1 || v.size(0) != f.size(0) || v.size(2) != f.size(2) ||
      v.size(3) != f.size(3))
    throw DimensionError("apply_spatial_map: map must be (batch, 1, h, w) matching the features");
  return v * f;
}

MccmImpl::MccmImpl(std::int64_t channels, MccmConfig config, MccmOptions options)
    : channels_(channels), config_(config) {
  config_.validate();
  const auto c = channels_;
  if (config_.has_foreground_edge()) {
    ca = register_module("ca", ChannelAttention(c, options.reduction));
    if (config_.foreground) sa_fg = register_module("sa_fg", SpatialAttention(options.spatial_kernel));
    if (config_.edge) sa_edge = register_module("sa_edge", SpatialAttention(options.spatial_kernel));
    polish_fe = register_module("polish_fe", conv3x3(c, c));
  }
  if (config_.background) polish_bg = register_module("polish_bg", conv3x3(c, c));
  if (config_.global) {
    gic_conv = register_module("gic_conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, c, 1)));
    sa_gic = register_module("sa_gic", SpatialAttention(options.spatial_kernel));
    polish_gic = register_module("polish_gic", conv3x3(c, c));
  }
  if (config_.branch_count() > 0) fuse = register_module("fuse", conv3x3(config_.branch_count() * c, c));
}

void MccmImpl::check_input(const torch::Tensor& f_e) const {
  check_feature_map(f_e, "mccm");
  if (f_e.size(1) != channels_)
    throw DimensionError("mccm: input has " + std::to_string(f_e.size(1)) + " channels, module built for " +
                         std::to_string(channels_));
}

torch::Tensor MccmImpl::purify(const torch::Tensor& f_e) {
  if (ca.is_empty()) throw StateError("mccm: purify needs the foreground or edge branch");
  check_input(f_e);
  return apply_channel_weights(f_e, ca->forward(f_e));
}

AttentionMap MccmImpl::global_image_map(const torch::Tensor& f_e) {
  if (gic_conv.is_empty()) throw StateError("mccm: global content branch is disabled");
  check_input(f_e);
  auto pooled = f_e.mean({2, 3}, /*keepdim=*/true);
  auto smoothed = gic_conv(pooled);
  auto restored = torch::nn::functional::interpolate(
      smoothed, torch::nn::functional::InterpolateFuncOptions()
                    .size(std::vector<std::int64_t>{f_e.size(2), f_e.size(3)})
                    .mode(torch::kBilinear)
                    .align_corners(false));
  return sa_gic->forward(restored);
}

MccmTrace MccmImpl::trace(const torch::Tensor& f_e) {
  check_input(f_e);
  MccmTrace tr;
  std::vector<torch::Tensor> streams;
  if (config_.has_foreground_edge()) {
    tr.f_ca = purify(f_e);
    if (config_.foreground) tr.a_f = sa_fg->forward(tr.f_ca);
    if (config_.edge) tr.a_e = sa_edge->forward(tr.f_ca);
    if (config_.foreground && config_.edge) {
      tr.a_fe = foreground_edge_map(tr.a_f, tr.a_e);
    } else {
      tr.a_fe = config_.foreground ? tr.a_f : tr.a_e;
    }
    tr.f_fe = apply_spatial_map(tr.a_fe, tr.f_ca);
    tr.polished_fe = torch::relu(polish_fe(tr.f_fe));
    streams.push_back(tr.polished_fe);
    if (config_.background) {
      tr.a_b = background_map(tr.a_fe);
      tr.f_b = apply_spatial_map(tr.a_b, tr.f_ca);
      tr.polished_b = torch::relu(polish_bg(tr.f_b));
      streams.push_back(tr.polished_b);
    }
  }
  if (config_.global) {
    tr.a_g = global_image_map(f_e);
    tr.f_g = apply_spatial_map(tr.a_g, f_e);
    tr.polished_g = torch::relu(polish_gic(tr.f_g));
    streams.push_back(tr.polished_g);
  }

  if (streams.empty()) {
    tr.features = f_e;
    return tr;
  }
  tr.fused = torch::relu(fuse(streams.size() == 1 ? streams.front() : torch::cat(streams, 1)));
  tr.features = config_.short_connection ? tr.fused + f_e : tr.fused;
  return tr;
}

MccmOutputs MccmImpl::forward(const torch::Tensor& f_e) {
  auto tr = trace(f_e);
  MccmOutputs out{std::move(tr.features), std::nullopt};
  if (config_.edge) out.edge_map = std::move(tr.a_e);
  return out;
}

}  // namespace mccsod
