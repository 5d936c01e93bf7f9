// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "flamed/pipeline.hpp"

namespace flamed {
namespace {

using ag::Var;

denoise::DenoiserConfig probe_config(denoise::Variant v) {
  denoise::DenoiserConfig c;
  c.n_blocks = 2;
  c.dim = 32;
  c.kernel = 7;
  c.expansion = 2;
  c.heads = 1;
  c.time_dim = 16;
  c.variant = v;
  return c;
}

void denoiser_forward(benchmark::State& state, denoise::Variant v) {
  const auto L = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const denoise::Denoiser model(42, probe_config(v), rng);
  const Var x = ag::constant(Tensor::randn(L, 42, rng));
  const Tensor spk = Tensor::randn(1, 8, rng);
  ag::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model(x, 0.5, spk));
  state.SetComplexityN(static_cast<benchmark::IterationCount>(L));
}

void BM_DenoiserAttentionFree(benchmark::State& state) { denoiser_forward(state, denoise::Variant::kAttentionFree); }
void BM_DenoiserAttention(benchmark::State& state) { denoiser_forward(state, denoise::Variant::kAttention); }
BENCHMARK(BM_DenoiserAttentionFree)->RangeMultiplier(2)->Range(128, 4096)->Complexity(benchmark::oN);
BENCHMARK(BM_DenoiserAttention)->RangeMultiplier(2)->Range(128, 4096)->Complexity(benchmark::oNSquared);

void BM_DepthwiseConv(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Var x = ag::constant(Tensor::randn(1024, d, rng));
  const Var w = ag::constant(Tensor::randn(7, d, rng));
  const Var b = ag::constant(Tensor::randn(1, d, rng));
  ag::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ag::depthwise_conv1d(x, w, b));
  state.SetComplexityN(static_cast<benchmark::IterationCount>(d));
}
BENCHMARK(BM_DepthwiseConv)->RangeMultiplier(2)->Range(32, 256)->Complexity(benchmark::oN);

void BM_CodecDecode(benchmark::State& state) {
  task::TaskSpec spec;
  const task::Dataset ds = task::generate_dataset(spec, 1);
  const Tensor& latent = ds.utterances[0].latent;
  for (auto _ : state) benchmark::DoNotOptimize(task::codec_decode(latent, ds.codec));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(latent.rows()));
}
BENCHMARK(BM_CodecDecode);

TrainConfig small_config() {
  TrainConfig c;
  c.codegen.dim = 32;
  c.codegen.ffn_dim = 64;
  c.codegen.encoder_blocks = 1;
  c.codegen.stage1_blocks = 1;
  c.codegen.stage_blocks = 1;
  c.codegen.fold_dim = 8;
  c.codegen.fold_hidden = 32;
  c.generator.hidden = 32;
  c.generator.blocks = 2;
  c.generator.time_dim = 16;
  c.denoiser.n_blocks = 2;
  c.denoiser.dim = 32;
  c.denoiser.expansion = 2;
  c.denoiser.time_dim = 16;
  c.denoiser.heads = 2;
  return c;
}

void BM_Synthesize(benchmark::State& state) {
  TrainConfig cfg = small_config();
  const pipeline::Model model(cfg);
  const task::Dataset ds = task::generate_dataset(cfg.task, 2);
  Rng prng(3);
  const auto prompt = pipeline::make_prompt(ds.utterances[1], cfg.prompt_frames, prng);
  pipeline::SynthesisOptions opts;
  opts.flow.nfe = static_cast<int>(state.range(0));
  opts.forced_durations = ds.utterances[0].durations;
  opts.forced_silences = ds.utterances[0].silences;
  for (auto _ : state) {
    Rng rng(4);
    benchmark::DoNotOptimize(pipeline::synthesize(model, ds.codec, ds.utterances[0].phonemes, prompt, opts, rng));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Synthesize)->RangeMultiplier(2)->Range(2, 32)->Complexity(benchmark::oN);

void BM_TrainingLoss(benchmark::State& state) {
  const TrainConfig cfg = small_config();
  const pipeline::Model model(cfg);
  const task::Dataset ds = task::generate_dataset(cfg.task, 2);
  Rng prng(5);
  const auto prompt = pipeline::make_prompt(ds.utterances[1], cfg.prompt_frames, prng);
  std::uint64_t i = 0;
  for (auto _ : state) {
    Rng rng(mix_seed(6, i++));
    const auto loss = pipeline::total_loss(model, ds.utterances[0], prompt, rng);
    ag::backward(loss.total);
  }
}
BENCHMARK(BM_TrainingLoss);

}  // namespace
}  // namespace flamed

BENCHMARK_MAIN();
