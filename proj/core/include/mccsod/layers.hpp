#pragma once

#include <cstdint>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/pimpl.h>

namespace mccsod {

/// `depth` 3x3 convolutions (padding 1), each followed by ReLU. Submodules are
/// registered as c1, c2, ...
class ConvBlockImpl : public torch::nn::Module {
 public:
  ConvBlockImpl(std::int64_t in_channels, std::int64_t out_channels, int depth);

  torch::Tensor forward(torch::Tensor x);

  std::vector<torch::nn::Conv2d> convs;
};
TORCH_MODULE(ConvBlock);

torch::nn::Conv2d conv3x3(std::int64_t in_channels, std::int64_t out_channels);

/// Zero-mean normal weights with He (fan-in, ReLU gain) scale and zero biases
/// for every convolution, transposed convolution and linear layer under
/// `module`. Draws from the global torch generator; seed it first.
void init_normal(torch::nn::Module& module);

/// Total number of scalar parameters.
std::int64_t parameter_count(const torch::nn::Module& module);

}  // namespace mccsod
