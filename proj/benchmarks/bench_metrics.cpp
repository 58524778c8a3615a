#include <benchmark/benchmark.h>

#include <opencv2/core.hpp>

#include "mccsod/data.hpp"
#include "mccsod/metrics.hpp"
#include "mccsod/synthetic.hpp"

namespace {

struct Pair {
  cv::Mat s, g;
};

Pair make_pair(int size) {
  auto scene = mccsod::synthesize_scene(0, 0, size);
  Pair p;
  scene.gt.convertTo(p.g, CV_64F, 1.0 / 255.0);
  p.s = cv::Mat(size, size, CV_64F);
  cv::randu(p.s, 0.0, 1.0);
  p.s = 0.5 * p.s + 0.5 * p.g;
  return p;
}

void BM_FMeasureSuite(benchmark::State& state) {
  auto p = make_pair(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mccsod::f_measure_suite(p.s, p.g));
}
BENCHMARK(BM_FMeasureSuite)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_EMeasureSuite(benchmark::State& state) {
  auto p = make_pair(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mccsod::e_measure_suite(p.s, p.g));
}
BENCHMARK(BM_EMeasureSuite)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_SMeasure(benchmark::State& state) {
  auto p = make_pair(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mccsod::s_measure(p.s, p.g));
}
BENCHMARK(BM_SMeasure)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_EvaluateImage(benchmark::State& state) {
  auto p = make_pair(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mccsod::evaluate_image(p.s, p.g));
}
BENCHMARK(BM_EvaluateImage)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_EdgeGroundTruth(benchmark::State& state) {
  auto scene = mccsod::synthesize_scene(0, 0, static_cast<int>(state.range(0)));
  cv::Mat mask = scene.gt / 255;
  for (auto _ : state) benchmark::DoNotOptimize(mccsod::edge_ground_truth(mask));
}
BENCHMARK(BM_EdgeGroundTruth)->Arg(256);

}  // namespace
