#include "mccsod/losses.hpp"

#include <torch/torch.h>

#include "mccsod/errors.hpp"
#include "mccsod/network.hpp"

namespace mccsod {

namespace {

void check_pair(const torch::Tensor& s, const torch::Tensor& g, const char* what) {
  if (!s.defined() || !g.defined() || s.sizes() != g.sizes() || s.dim() < 2)
    throw DimensionError(std::string(what) + ": prediction and ground truth must share a shape with a batch axis");
}

// Per-image sums over every non-batch axis.
torch::Tensor image_sum(const torch::Tensor& t) { return t.flatten(1).sum(1); }

}  // namespace

torch::Tensor bce_loss(const torch::Tensor& s, const torch::Tensor& g, BceReduction reduction) {
  check_pair(s, g, "bce_loss");
  auto sc = s.clamp(kLossEpsilon, 1.0 - kLossEpsilon);
  auto per_pixel = -(g * torch::log(sc) + (1.0 - g) * torch::log(1.0 - sc));
  if (reduction == BceReduction::kSum) return image_sum(per_pixel).mean();
  return per_pixel.mean();
}

torch::Tensor iou_loss(const torch::Tensor& s, const torch::Tensor& g) {
  check_pair(s, g, "iou_loss");
  auto inter = image_sum(s * g);
  auto uni = image_sum(s + g - s * g);
  return (1.0 - (inter + kLossEpsilon) / (uni + kLossEpsilon)).mean();
}

torch::Tensor fmeasure_loss(const torch::Tensor& s, const torch::Tensor& g) {
  check_pair(s, g, "fmeasure_loss");
  auto tp = image_sum(s * g);
  auto fp = image_sum(s * (1.0 - g));
  auto fn = image_sum((1.0 - s) * g);
  auto precision = tp / (tp + fp + kLossEpsilon);
  auto recall = tp / (tp + fn + kLossEpsilon);
  auto f = (1.0 + kBetaSquared) * precision * recall / (kBetaSquared * precision + recall + kLossEpsilon);
  return (1.0 - f).mean();
}

torch::Tensor upsample_to(const torch::Tensor& map, const torch::Tensor& like) {
  if (map.dim() != 4 || like.dim() != 4) throw DimensionError("upsample_to: expected rank-4 maps");
  if (map.size(2) == like.size(2) && map.size(3) == like.size(3)) return map;
  return torch::nn::functional::interpolate(
      map, torch::nn::functional::InterpolateFuncOptions()
               .size(std::vector<std::int64_t>{like.size(2), like.size(3)})
               .mode(torch::kBilinear)
               .align_corners(false));
}

SaliencyLossTerms saliency_loss(const torch::Tensor& s_t, const torch::Tensor& g, const LossOptions& opts) {
  auto up = upsample_to(s_t, g);
  auto zero = torch::zeros({}, up.options());
  return {opts.use_bce ? bce_loss(up, g, opts.bce_reduction) : zero,
          opts.use_iou ? iou_loss(up, g) : zero,
          opts.use_fmeasure ? fmeasure_loss(up, g) : zero};
}

torch::Tensor edge_loss(const torch::Tensor& a_e, const torch::Tensor& g_e, const LossOptions& opts) {
  return bce_loss(upsample_to(a_e, g_e), g_e, opts.bce_reduction);
}

LossBundle total_loss(const NetworkOutputs& outputs, const torch::Tensor& g, const torch::Tensor& g_e,
                      const LossOptions& opts) {
  int edge_levels = 0;
  for (int t = 0; t < kLevels; ++t) {
    if (!outputs.saliency[t].defined())
      throw ContractError("total_loss: side output S^" + std::to_string(t + 1) + " is missing");
    edge_levels += outputs.edges[t].defined() ? 1 : 0;
  }
  if (edge_levels != 0 && edge_levels != kLevels)
    throw ContractError("total_loss: edge maps present on only some levels");
  const bool with_edges = opts.use_edge && edge_levels == kLevels;

  LossBundle b;
  for (int t = 0; t < kLevels; ++t) {
    auto terms = saliency_loss(outputs.saliency[t], g, opts);
    auto level = terms.total();
    b.components[t] = {terms.bce.item<double>(), terms.iou.item<double>(), terms.fm.item<double>()};
    b.per_level_saliency[t] = b.components[t].bce + b.components[t].iou + b.components[t].fm;
    if (with_edges) {
      auto e = edge_loss(outputs.edges[t], g_e, opts);
      b.per_level_edge[t] = e.item<double>();
      level = level + e;
    }
    b.objective = b.objective.defined() ? b.objective + level : level;
  }
  for (int t = 0; t < kLevels; ++t) b.total += b.per_level_saliency[t] + b.per_level_edge[t];
  return b;
}

}  // namespace mccsod
