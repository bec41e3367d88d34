// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "dnas/config.hpp"
#include "dnas/latency.hpp"
#include "dnas/prunode.hpp"
#include "dnas/rng.hpp"
#include "dnas/search.hpp"
#include "dnas/supernet.hpp"

namespace {

using namespace dnas;

SuperNetConfig bench_config(int width, int layers) {
  SuperNetConfig c;
  c.input_width = width;
  c.classes = 10;
  c.granularity = 16;
  c.max_expansion = 4;
  StageSpec st;
  st.layers = layers;
  st.filters = width;
  st.skippable.assign(static_cast<std::size_t>(layers), true);
  st.variants = {{"k3", false, true}, {"k3", true, true}};
  c.stages.push_back(st);
  return c;
}

Tensor random_batch(Rng& rng, std::size_t rows, std::size_t cols) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.normal();
  return Tensor::constant({rows, cols}, v);
}

// One IRB candidate at mask width state.range(0).
void BM_BlockForward(benchmark::State& state) {
  Rng rng(1);
  SuperNet net = build_supernet(bench_config(64, 1), rng);
  auto& layer = net.layers[0];
  CandidateBlock block = layer.candidates[0];
  block.mask_width = static_cast<int>(state.range(0));
  const Tensor x = random_batch(rng, 64, 64);
  for (auto _ : state) benchmark::DoNotOptimize(block_forward(layer.spec, block, x).values().data());
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_BlockForward)->Arg(16)->Arg(64)->Arg(256);

// Forward and backward through a whole SuperNet, as in one weight step.
void BM_SearchStep(benchmark::State& state) {
  const auto cfg = bench_config(32, static_cast<int>(state.range(0)));
  Rng rng(1);
  SuperNet net = build_supernet(cfg, rng);
  const auto lut = build_analytic(cfg, 0.001);
  const Tensor x = random_batch(rng, 64, 32);
  std::vector<int> labels(64);
  std::iota(labels.begin(), labels.end(), 0);
  for (int& l : labels) l %= 10;
  for (auto _ : state) {
    for (ParamSlot* p : net.psi_slots()) p->value.zero_grad();
    for (ParamSlot* p : net.theta_slots()) p->value.zero_grad();
    const ForwardPass pass = supernet_forward(net, x, rng, SkipMultipliers{});
    const Tensor total = loss(softmax_cross_entropy(pass.logits, labels),
                              total_latency(net, pass.coefficients, lut), 1.0, 0.6, LossForm::kLogPower);
    total.backward();
    benchmark::DoNotOptimize(total.item());
  }
}
BENCHMARK(BM_SearchStep)->Arg(1)->Arg(4)->Arg(8);

void BM_UpdateMasks(benchmark::State& state) {
  MaskState st = init_mask_state(1024, 32);
  long step = 0;
  for (auto _ : state) {
    const double progress = static_cast<double>(step++ % 1000000) / 1e6;
    benchmark::DoNotOptimize(update_masks(st, progress, 0.01).state.s);
  }
}
BENCHMARK(BM_UpdateMasks);

void BM_CountSearchSpace(benchmark::State& state) {
  const auto cfg = bench_config(64, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(count_search_space(cfg));
}
BENCHMARK(BM_CountSearchSpace)->Arg(4)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
