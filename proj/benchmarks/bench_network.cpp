#include <benchmark/benchmark.h>

#include <torch/torch.h>

#include "mccsod/losses.hpp"
#include "mccsod/network.hpp"

namespace {

void BM_MccmLevel(benchmark::State& state) {
  torch::NoGradGuard g;
  const int level = static_cast<int>(state.range(0));
  const auto c = mccsod::kVggChannels[level];
  const std::int64_t s = 256 >> level;
  mccsod::Mccm m(c);
  auto f = torch::randn({1, c, s, s});
  for (auto _ : state) benchmark::DoNotOptimize(m->forward(f).features);
}
BENCHMARK(BM_MccmLevel)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

void BM_NetworkForward(benchmark::State& state) {
  torch::NoGradGuard g;
  mccsod::NetworkConfig cfg;
  cfg.input_size = state.range(0);
  mccsod::MccNet net(cfg);
  net->eval();
  auto x = torch::randn({1, 3, cfg.input_size, cfg.input_size});
  for (auto _ : state) benchmark::DoNotOptimize(net->forward(x).saliency[0]);
}
BENCHMARK(BM_NetworkForward)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_TrainingStep(benchmark::State& state) {
  mccsod::NetworkConfig cfg;
  cfg.input_size = state.range(0);
  mccsod::MccNet net(cfg);
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(1e-4));
  const auto s = cfg.input_size;
  auto x = torch::randn({1, 3, s, s});
  auto gt = (torch::rand({1, 1, s, s}) > 0.5).to(torch::kFloat32);
  auto edge = (torch::rand({1, 1, s, s}) > 0.9).to(torch::kFloat32);
  for (auto _ : state) {
    opt.zero_grad();
    auto loss = mccsod::total_loss(net->forward(x), gt, edge);
    loss.objective.backward();
    opt.step();
  }
}
BENCHMARK(BM_TrainingStep)->Arg(128)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace
