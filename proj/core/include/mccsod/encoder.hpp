#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mccsod/layers.hpp"

namespace mccsod {

class TensorArchive;

inline constexpr int kLevels = 5;
using LevelChannels = std::array<std::int64_t, kLevels>;

/// VGG-16 channel plan for blocks E1..E5.
inline constexpr LevelChannels kVggChannels{64, 128, 256, 512, 512};
/// Convolutions per block.
inline constexpr std::array<int, kLevels> kBlockDepth{2, 2, 3, 3, 3};

/// f_e for levels 1..5; level t (0-based index t-1) has spatial size input/2^(t-1).
struct EncoderFeatures {
  std::array<torch::Tensor, kLevels> levels;
};

/// VGG-16 with its last max-pool and fully connected head removed.
class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(LevelChannels channels = kVggChannels, std::int64_t input_size = 256);

  /// `image` is (batch, 3, input_size, input_size), already normalized.
  /// Throws DimensionError on any other shape; the encoder never resizes.
  EncoderFeatures forward(const torch::Tensor& image);

  const LevelChannels& channels() const { return channels_; }
  std::int64_t input_size() const { return input_size_; }

  std::array<ConvBlock, kLevels> blocks{ConvBlock{nullptr}, ConvBlock{nullptr}, ConvBlock{nullptr},
                                        ConvBlock{nullptr}, ConvBlock{nullptr}};

 private:
  LevelChannels channels_;
  std::int64_t input_size_;
};
TORCH_MODULE(Encoder);

/// Archive names for the 13 encoder convolutions, in network order:
/// "enc.b1.c1.weight", "enc.b1.c1.bias", ..., "enc.b5.c3.bias".
std::vector<std::string> pretrained_weight_names();

/// Copies the 13 kernel/bias pairs from `archive` into `encoder`. Every entry
/// is validated before anything is written, so a failed load leaves the
/// encoder untouched. Throws MissingWeightError or DimensionError.
void load_pretrained(EncoderImpl& encoder, const TensorArchive& archive);

}  // namespace mccsod
