// Microbenchmarks for the attention stack and its supporting kernels.
// Run: ./amt_bench [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include "amt/model.hpp"
#include "amt/ops.hpp"
#include "amt/spectrogram.hpp"
#include "amt/threads.hpp"

using namespace amt;

namespace {

nn::Tensor<float> random_tensor(nn::Shape shape, uint64_t seed) {
  nn::Tensor<float> t(std::move(shape));
  Rng rng(seed);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal());
  return t;
}

model::ModelConfig encoder_config(int bins) {
  model::ModelConfig cfg;
  cfg.bank = "full";
  int blocks = 1;
  while (blocks < 3 && (bins << (blocks + 1)) <= 1024) ++blocks;
  cfg.conv_channels.assign(static_cast<size_t>(blocks), 128);
  cfg.spec_bins = bins << blocks;
  cfg.window_seconds = 300 * 0.020;
  return cfg;
}

void BM_encoder_forward(benchmark::State& state) {
  const int bins = static_cast<int>(state.range(0));
  const model::ModelConfig cfg = encoder_config(bins);
  model::TranscriptionModel<float> m(cfg, 1);
  const nn::Tensor<float> features = random_tensor({300, bins, 128}, 2);
  for (auto _ : state) {
    nn::Graph<float> g;
    g.set_grad_enabled(false);
    model::ForwardCtx<float> ctx;
    ctx.graph = &g;
    auto out = m.forward_features(ctx, g.constant(features));
    benchmark::DoNotOptimize(out.onset.value().data());
  }
  const auto cost = model::attention_cost(cfg, 300, bins);
  state.counters["score_pairs"] = static_cast<double>(cost.total);
}
BENCHMARK(BM_encoder_forward)->Arg(32)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_stft(benchmark::State& state) {
  AudioClip clip;
  clip.samples.assign(96000, 0.0f);
  Rng rng(3);
  for (auto& v : clip.samples) v = static_cast<float>(rng.normal(0.0, 0.1));
  for (auto _ : state) {
    auto spec = dsp::stft_logmag<float>(clip);
    benchmark::DoNotOptimize(spec.data());
  }
}
BENCHMARK(BM_stft)->Unit(benchmark::kMillisecond);

void BM_conv_frontend(benchmark::State& state) {
  model::ModelConfig cfg;  // full size: (300,1024) -> (300,128,128)
  cfg.bank = "full";
  nn::ParamStore<float> store;
  model::ConvFrontend<float> conv(cfg, store, 4);
  const nn::Tensor<float> spec = random_tensor({300, 1024}, 5);
  for (auto _ : state) {
    nn::Graph<float> g;
    g.set_grad_enabled(false);
    auto out = conv.forward(g, spec);
    benchmark::DoNotOptimize(out.value().data());
  }
}
BENCHMARK(BM_conv_frontend)->Unit(benchmark::kMillisecond);

void BM_gemm(benchmark::State& state) {
  const int64_t n = state.range(0);
  const nn::Tensor<float> a = random_tensor({n, n}, 6);
  const nn::Tensor<float> b = random_tensor({n, n}, 7);
  nn::Tensor<float> c({n, n});
  for (auto _ : state) {
    nn::gemm<float>(false, false, n, n, n, 1.0f, a.data(), b.data(), 0.0f, c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsRate,
                                                 benchmark::Counter::OneK::kIs1000);
}
BENCHMARK(BM_gemm)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
