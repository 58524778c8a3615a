#include "mccsod/layers.hpp"

#include <cmath>

#include <torch/torch.h>

namespace mccsod {

torch::nn::Conv2d conv3x3(std::int64_t in_channels, std::int64_t out_channels) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3).padding(1));
}

ConvBlockImpl::ConvBlockImpl(std::int64_t in_channels, std::int64_t out_channels, int depth) {
  for (int i = 0; i < depth; ++i) {
    convs.push_back(register_module("c" + std::to_string(i + 1),
                                    conv3x3(i == 0 ? in_channels : out_channels, out_channels)));
  }
}

torch::Tensor ConvBlockImpl::forward(torch::Tensor x) {
  for (auto& c : convs) x = torch::relu(c(x));
  return x;
}

namespace {

void he_normal_(torch::Tensor& weight, std::int64_t fan_in) {
  torch::NoGradGuard guard;
  weight.normal_(0.0, std::sqrt(2.0 / static_cast<double>(std::max<std::int64_t>(fan_in, 1))));
}

}  // namespace

void init_normal(torch::nn::Module& module) {
  torch::NoGradGuard guard;
  for (auto& m : module.modules(/*include_self=*/true)) {
    if (auto* c = m->as<torch::nn::Conv2d>()) {
      he_normal_(c->weight, c->weight.size(1) * c->weight.size(2) * c->weight.size(3));
      if (c->bias.defined()) c->bias.zero_();
    } else if (auto* t = m->as<torch::nn::ConvTranspose2d>()) {
      // weight is (in, out, kh, kw); each output sees in*kh*kw/(stride^2) inputs
      he_normal_(t->weight, t->weight.size(0));
      if (t->bias.defined()) t->bias.zero_();
    } else if (auto* l = m->as<torch::nn::Linear>()) {
      he_normal_(l->weight, l->weight.size(1));
      if (l->bias.defined()) l->bias.zero_();
    }
  }
}

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

}  // namespace mccsod
