#include "mccsod/network.hpp"

#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "mccsod/errors.hpp"

namespace mccsod {

namespace F = torch::nn::functional;

Normalization NetworkConfig::resolved_normalization() const {
  if (normalization) return *normalization;
  return use_pretrained_encoder ? Normalization::imagenet() : Normalization::symmetric();
}

void NetworkConfig::validate() const {
  if (input_size < 16 || input_size % 16 != 0)
    throw ConfigError("input_size must be a positive multiple of 16, got " + std::to_string(input_size));
  for (auto c : channels)
    if (c < 1) throw ConfigError("every level needs at least one channel");
  for (double s : resolved_normalization().stddev)
    if (!(s > 0.0)) throw ConfigError("normalization stddev must be positive");
  mccm.validate();
}

MccNetImpl::MccNetImpl(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& ch = config_.channels;
  encoder = register_module("enc", Encoder(ch, config_.input_size));
  for (int t = 0; t < kLevels; ++t) {
    const auto idx = std::to_string(t + 1);
    mccm[t] = register_module("mccm" + idx, Mccm(ch[t], config_.mccm, config_.mccm_options));
    decoder[t] = register_module("dec" + idx, ConvBlock(ch[t], ch[t], kBlockDepth[t]));
    heads[t] = register_module("head" + idx, torch::nn::Conv2d(torch::nn::Conv2dOptions(ch[t], 1, 1)));
    if (t + 1 < kLevels) {
      upsample[t] = register_module(
          "up" + idx, torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(ch[t + 1], ch[t], 2).stride(2)));
    }
  }
}

NetworkOutputs MccNetImpl::forward(const torch::Tensor& image) {
  auto features = encoder->forward(image);

  std::array<MccmOutputs, kLevels> fused;
  for (int t = 0; t < kLevels; ++t) fused[t] = mccm[t]->forward(features.levels[t]);

  NetworkOutputs out;
  torch::Tensor deeper;
  for (int t = kLevels - 1; t >= 0; --t) {
    auto x = fused[t].features;
    if (deeper.defined()) x = x + upsample[t]->forward(deeper);
    deeper = decoder[t]->forward(x);
    out.saliency[t] = torch::sigmoid(heads[t]->forward(deeper));
    if (fused[t].edge_map) out.edges[t] = fused[t].edge_map->values;
  }
  return out;
}

MccNet make_network(const NetworkConfig& config, std::uint64_t seed) {
  torch::manual_seed(seed);
  MccNet net(config);
  init_normal(*net);
  return net;
}

torch::Tensor image_to_tensor(const cv::Mat& bgr, std::int64_t size, const Normalization& norm) {
  if (bgr.empty() || bgr.channels() != 3) throw DimensionError("image_to_tensor: expected a 3-channel image");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (rgb.rows != size || rgb.cols != size)
    cv::resize(rgb, rgb, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0, cv::INTER_LINEAR);
  cv::Mat f;
  rgb.convertTo(f, CV_32FC3, 1.0 / 255.0);
  auto t = torch::from_blob(f.data, {size, size, 3}, torch::kFloat32).permute({2, 0, 1}).clone();
  auto mean = torch::tensor({norm.mean[0], norm.mean[1], norm.mean[2]}, torch::kFloat32).view({3, 1, 1});
  auto sd = torch::tensor({norm.stddev[0], norm.stddev[1], norm.stddev[2]}, torch::kFloat32).view({3, 1, 1});
  return ((t - mean) / sd).unsqueeze(0);
}

Predictor::Predictor(MccNet net) : net_(std::move(net)) {}

MccNet& Predictor::network() {
  if (!loaded()) throw StateError("predictor: no parameters loaded");
  return net_;
}

torch::Tensor Predictor::predict(const torch::Tensor& image) {
  auto& net = network();
  torch::NoGradGuard guard;
  net->eval();
  const auto ref = net->parameters().front();
  return net->forward(image.to(ref.device(), ref.scalar_type())).saliency[0].cpu();
}

cv::Mat Predictor::predict(const cv::Mat& bgr) {
  auto& net = network();
  const auto& cfg = net->config();
  auto dtype = net->parameters().front().scalar_type();
  auto x = image_to_tensor(bgr, cfg.input_size, cfg.resolved_normalization()).to(dtype);
  auto s = predict(x).to(torch::kFloat64).contiguous();
  cv::Mat map(static_cast<int>(cfg.input_size), static_cast<int>(cfg.input_size), CV_64F);
  std::memcpy(map.data, s.data_ptr<double>(), sizeof(double) * map.total());
  if (map.rows != bgr.rows || map.cols != bgr.cols)
    cv::resize(map, map, bgr.size(), 0, 0, cv::INTER_LINEAR);
  return cv::min(cv::max(map, 0.0), 1.0);
}

}  // namespace mccsod
