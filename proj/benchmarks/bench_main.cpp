#include <benchmark/benchmark.h>

#include "cxrseg/augment.hpp"
#include "cxrseg/losses.hpp"
#include "cxrseg/model.hpp"
#include "cxrseg/ops.hpp"
#include "cxrseg/preprocess.hpp"
#include "cxrseg/rng.hpp"

using namespace cxrseg;

namespace {

Tensor filled(const Shape& shape, Rng& rng, bool grad = false) {
  Tensor t(shape, grad);
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor x = filled({1, 8, size, size}, rng);
  const Tensor k = filled({8, 8, 3, 3}, rng);
  const Tensor b = filled({8}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(size * size * 8 * 8 * 9));
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64)->Arg(128);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor x = filled({1, 8, size, size}, rng, true);
  const Tensor k = filled({8, 8, 3, 3}, rng, true);
  const Tensor b = filled({8}, rng, true);
  for (auto _ : state) {
    Tensor y = sum(conv2d(x, k, b, 1, 1));
    y.backward();
    x.zero_grad();
    k.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(32)->Arg(64);

void BM_ModelTrainStep(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  ModelConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 4;
  auto model = build_model(cfg, 3);
  Rng rng(3);
  Tensor x({4, 1, size, size});
  for (auto& v : x.values()) v = rng.uniform(0.0, 1.0);
  Tensor target({4, 3, size, size});
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t i = 0; i < size * size; ++i)
      target.at((n * 3 + rng.below(3)) * size * size + i) = 1.0;
  const LossConfig loss;
  const auto params = model.trainable();
  for (auto _ : state) {
    Tensor l = focal_tversky_loss(forward(model, x, true), target, loss);
    l.backward();
    for (const auto& p : params) p.zero_grad();
  }
}
BENCHMARK(BM_ModelTrainStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Clahe(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  RawImage img(size, size, 12);
  for (auto& p : img.pixels) p = static_cast<std::uint16_t>(rng.below(4096));
  const ClaheConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(clahe(img, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(size * size));
}
BENCHMARK(BM_Clahe)->Arg(128)->Arg(512);

void BM_BetaSample(benchmark::State& state) {
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(sample_beta(0.2, rng));
}
BENCHMARK(BM_BetaSample);

}  // namespace

BENCHMARK_MAIN();
