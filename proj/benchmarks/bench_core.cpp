// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "centerscan/experiment.hpp"
#include "centerscan/ops.hpp"
#include "centerscan/rng.hpp"
#include "centerscan/ssm_scan.hpp"

using namespace centerscan;

static void BM_ScanOrder(benchmark::State& state) {
  const auto part = partition(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)), 3);
  for (auto _ : state) {
    for (const auto& r : part.regions) benchmark::DoNotOptimize(scan_order(r, ScanStrategy::CenterPriority));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(part.regions.size()));
}
BENCHMARK(BM_ScanOrder)->Arg(6)->Arg(48);

static void BM_SsmScan(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  ParameterSet reg;
  Rng rng(1);
  SsmParams p = SsmParams::create(reg, "s.", 8, 4, rng);
  Tensor seq = randn({len, 8}, rng, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(ssm_scan(seq, p).data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_SsmScan)->Arg(9)->Arg(81)->Arg(1024);

static void BM_SsmScanBackward(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  ParameterSet reg;
  Rng rng(2);
  SsmParams p = SsmParams::create(reg, "s.", 8, 4, rng);
  Tensor seq = randn({len, 8}, rng, 1.0, true);
  for (auto _ : state) {
    reg.zero_grad();
    backward(ops::sum(ssm_scan(seq, p)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_SsmScanBackward)->Arg(81)->Arg(1024);

static void BM_CenterBlock(benchmark::State& state) {
  const auto e = static_cast<std::size_t>(state.range(0));
  ParameterSet reg;
  Rng rng(3);
  CenterBlock b = CenterBlock::create(reg, "b.", 4, CenterBlockConfig{}, rng);
  Tensor x = randn({1, 4, e, e}, rng, 1.0);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(b.forward(x).data().data());
}
BENCHMARK(BM_CenterBlock)->Arg(4)->Arg(16)->Arg(32);

static void BM_Conv2d(benchmark::State& state) {
  const auto e = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  Tensor x = randn({1, 16, e, e}, rng, 1.0);
  Tensor w = randn({16, 16, 3, 3}, rng, 0.1);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, 1, 1).data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(e * e));
}
BENCHMARK(BM_Conv2d)->Arg(8)->Arg(32);

static void BM_EffectiveKernel(benchmark::State& state) {
  ParameterSet reg;
  Rng rng(5);
  SsmParams p = SsmParams::create(reg, "s.", 4, 4, rng);
  const Region region{0, 0, 3, 3};
  const ScanPath path = consumed_paths(region, CenterBlockConfig{}).front();
  for (auto _ : state) benchmark::DoNotOptimize(measure_effective_kernel(p, region, path).weights.data());
}
BENCHMARK(BM_EffectiveKernel);

static void BM_ForwardSlice(benchmark::State& state) {
  ModelConfig mc;
  mc.sync();
  SegmentationModel model(mc, 7);
  SyntheticVolume vol = generate_volume(DatasetSpec{}, 11);
  NoGradGuard ng;
  for (auto _ : state) {
    VolumeState st = model.new_volume_state();
    for (std::size_t s = 0; s < vol.slices(); ++s)
      benchmark::DoNotOptimize(model.forward_slice(vol.slice_tensor(s), st, static_cast<int>(s)).front().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(vol.slices()));
}
BENCHMARK(BM_ForwardSlice)->Unit(benchmark::kMillisecond);

static void BM_TrainStep(benchmark::State& state) {
  ModelConfig mc;
  mc.sync();
  SegmentationModel model(mc, 7);
  std::vector<SyntheticVolume> vols{generate_volume(DatasetSpec{}, 11)};
  TrainConfig tc;
  tc.steps = 1;
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(train_model(model, vols, tc, rng).back().total);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
