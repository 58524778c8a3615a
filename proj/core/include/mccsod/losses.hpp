#pragma once

// Deep-supervision losses: BCE + IoU + F-measure on every side output and BCE
// on every edge map.

#include <array>

#include <torch/types.h>

#include "mccsod/encoder.hpp"

namespace mccsod {

struct NetworkOutputs;

/// Smoothing added to log arguments (as a clamp) and ratio denominators.
inline constexpr double kLossEpsilon = 1e-7;
/// F-measure weight; fixed.
inline constexpr double kBetaSquared = 0.3;

enum class BceReduction {
  kMean,  // mean over pixels (default)
  kSum,   // sum over the pixels of each image, averaged over the batch
};

struct LossOptions {
  BceReduction bce_reduction = BceReduction::kMean;
  bool use_bce = true;
  bool use_iou = true;
  bool use_fmeasure = true;
  /// Edge BCE on a_e when the network produces edge maps.
  bool use_edge = true;
};

// S and G are (batch, 1, h, w) or any equal shapes with a leading batch
// dimension. Ratio losses are computed per image and averaged over the batch.
// Shape mismatch throws DimensionError.
torch::Tensor bce_loss(const torch::Tensor& s, const torch::Tensor& g,
                       BceReduction reduction = BceReduction::kMean);
torch::Tensor iou_loss(const torch::Tensor& s, const torch::Tensor& g);
torch::Tensor fmeasure_loss(const torch::Tensor& s, const torch::Tensor& g);

/// Bilinear (align_corners = false) resize of `map` to `like`'s spatial size.
torch::Tensor upsample_to(const torch::Tensor& map, const torch::Tensor& like);

struct SaliencyLossTerms {
  torch::Tensor bce, iou, fm;  // disabled terms are zero scalars
  torch::Tensor total() const { return bce + iou + fm; }
};

/// Loss of one side output against the full-resolution mask.
SaliencyLossTerms saliency_loss(const torch::Tensor& s_t, const torch::Tensor& g, const LossOptions& opts = {});
torch::Tensor edge_loss(const torch::Tensor& a_e, const torch::Tensor& g_e, const LossOptions& opts = {});

struct LevelComponents {
  double bce = 0.0;
  double iou = 0.0;
  double fm = 0.0;
};

struct LossBundle {
  std::array<double, kLevels> per_level_saliency{};
  std::array<double, kLevels> per_level_edge{};
  std::array<LevelComponents, kLevels> components{};
  /// Sum of the ten per-level values above, accumulated in level order.
  double total = 0.0;
  /// Differentiable total for backpropagation.
  torch::Tensor objective;
};

/// Sums saliency and edge losses over all five levels. Throws ContractError if
/// a side output is missing or only some levels carry edge maps.
LossBundle total_loss(const NetworkOutputs& outputs, const torch::Tensor& g, const torch::Tensor& g_e,
                      const LossOptions& opts = {});

}  // namespace mccsod
