#include "mccsod/encoder.hpp"

#include <torch/torch.h>

#include "mccsod/archive.hpp"
#include "mccsod/attention.hpp"
#include "mccsod/errors.hpp"

namespace mccsod {

namespace {

std::string shape_str(at::IntArrayRef s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
  return out + ")";
}

}  // namespace

EncoderImpl::EncoderImpl(LevelChannels channels, std::int64_t input_size)
    : channels_(channels), input_size_(input_size) {
  if (input_size_ < 16 || input_size_ % 16 != 0)
    throw ConfigError("encoder input size must be a positive multiple of 16");
  std::int64_t in = 3;
  for (int t = 0; t < kLevels; ++t) {
    blocks[t] = register_module("b" + std::to_string(t + 1), ConvBlock(in, channels_[t], kBlockDepth[t]));
    in = channels_[t];
  }
}

EncoderFeatures EncoderImpl::forward(const torch::Tensor& image) {
  check_feature_map(image, "encode");
  if (image.size(1) != 3 || image.size(2) != input_size_ || image.size(3) != input_size_)
    throw DimensionError("encode: expected (batch, 3, " + std::to_string(input_size_) + ", " +
                         std::to_string(input_size_) + "), got " + shape_str(image.sizes()));
  EncoderFeatures out;
  torch::Tensor x = image;
  for (int t = 0; t < kLevels; ++t) {
    if (t > 0) x = torch::max_pool2d(x, 2, 2);
    x = blocks[t]->forward(x);
    out.levels[t] = x;
  }
  return out;
}

std::vector<std::string> pretrained_weight_names() {
  std::vector<std::string> names;
  for (int t = 0; t < kLevels; ++t) {
    for (int i = 0; i < kBlockDepth[t]; ++i) {
      const auto base = "enc.b" + std::to_string(t + 1) + ".c" + std::to_string(i + 1);
      names.push_back(base + ".weight");
      names.push_back(base + ".bias");
    }
  }
  return names;
}

void load_pretrained(EncoderImpl& encoder, const TensorArchive& archive) {
  std::vector<std::pair<torch::Tensor, const torch::Tensor*>> copies;
  for (const auto& item : encoder.named_parameters()) {
    const auto key = "enc." + item.key();
    const auto& param = item.value();
    if (!archive.contains(key)) throw MissingWeightError("pretrained archive is missing '" + key + "'");
    const auto& src = archive.at(key);
    if (src.sizes() != param.sizes())
      throw DimensionError("pretrained entry '" + key + "' has shape " + shape_str(src.sizes()) +
                           ", encoder expects " + shape_str(param.sizes()));
    copies.emplace_back(param, &src);
  }
  torch::NoGradGuard guard;
  for (auto& [dst, src] : copies) dst.copy_(*src);
}

}  // namespace mccsod
