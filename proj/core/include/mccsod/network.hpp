#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <opencv2/core/mat.hpp>
#include <torch/nn/modules/conv.h>

#include "mccsod/encoder.hpp"
#include "mccsod/mccm.hpp"

namespace mccsod {

/// Per-channel RGB normalization applied before the encoder.
struct Normalization {
  std::array<double, 3> mean;
  std::array<double, 3> stddev;

  /// Statistics the public VGG-16 weights were trained with.
  static Normalization imagenet() { return {{0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}}; }
  /// Maps [0,1] to [-1,1]; used for randomly initialized encoders.
  static Normalization symmetric() { return {{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}}; }

  bool operator==(const Normalization&) const = default;
};

struct NetworkConfig {
  MccmConfig mccm;
  MccmOptions mccm_options;
  std::int64_t input_size = 256;
  bool use_pretrained_encoder = false;
  /// Channel plan per level; the VGG-16 plan unless a reduced surrogate is wanted.
  LevelChannels channels = kVggChannels;
  /// Unset means imagenet() for a pretrained encoder, symmetric() otherwise.
  std::optional<Normalization> normalization;

  Normalization resolved_normalization() const;
  /// input_size must be a positive multiple of 16; mccm must be valid.
  void validate() const;

  bool operator==(const NetworkConfig&) const = default;
};

/// Index 0 is level 1 (full resolution).
struct NetworkOutputs {
  std::array<torch::Tensor, kLevels> saliency;  // S^t, (batch, 1, s/2^(t-1), s/2^(t-1)) in [0,1]
  std::array<torch::Tensor, kLevels> edges;     // a_e^t; undefined when the edge branch is off
};

/// Encoder, five MCCMs and the mirrored decoder with one side output per block.
class MccNetImpl : public torch::nn::Module {
 public:
  explicit MccNetImpl(NetworkConfig config = {});

  /// `image` is normalized (batch, 3, input_size, input_size).
  NetworkOutputs forward(const torch::Tensor& image);

  const NetworkConfig& config() const { return config_; }

  Encoder encoder{nullptr};
  std::array<Mccm, kLevels> mccm{Mccm{nullptr}, Mccm{nullptr}, Mccm{nullptr}, Mccm{nullptr}, Mccm{nullptr}};
  std::array<ConvBlock, kLevels> decoder{ConvBlock{nullptr}, ConvBlock{nullptr}, ConvBlock{nullptr},
                                         ConvBlock{nullptr}, ConvBlock{nullptr}};
  // upsample[t] maps decoder level t+2 to level t+1 (0-based: t+1 -> t).
  std::array<torch::nn::ConvTranspose2d, kLevels - 1> upsample{
      torch::nn::ConvTranspose2d{nullptr}, torch::nn::ConvTranspose2d{nullptr},
      torch::nn::ConvTranspose2d{nullptr}, torch::nn::ConvTranspose2d{nullptr}};
  std::array<torch::nn::Conv2d, kLevels> heads{torch::nn::Conv2d{nullptr}, torch::nn::Conv2d{nullptr},
                                               torch::nn::Conv2d{nullptr}, torch::nn::Conv2d{nullptr},
                                               torch::nn::Conv2d{nullptr}};

 private:
  NetworkConfig config_;
};
TORCH_MODULE(MccNet);

/// Builds a network with normally initialized parameters drawn after seeding
/// the global generator with `seed`.
MccNet make_network(const NetworkConfig& config, std::uint64_t seed);

/// Converts an 8-bit BGR (OpenCV) image into a normalized (1, 3, size, size)
/// float tensor, resizing bilinearly when needed.
torch::Tensor image_to_tensor(const cv::Mat& bgr, std::int64_t size, const Normalization& norm);

/// Inference wrapper returning S^1 at the caller's image size.
class Predictor {
 public:
  Predictor() = default;
  explicit Predictor(MccNet net);

  bool loaded() const { return !net_.is_empty(); }
  /// Throws StateError when no network is loaded. Returns CV_64F in [0,1]
  /// with the size of `bgr`.
  cv::Mat predict(const cv::Mat& bgr);
  /// Same, for an already-normalized (batch, 3, s, s) tensor; returns S^1.
  torch::Tensor predict(const torch::Tensor& image);

  MccNet& network();

 private:
  MccNet net_{nullptr};
};

}  // namespace mccsod
