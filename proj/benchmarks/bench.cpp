#include <benchmark/benchmark.h>

#include <random>

#include "brp/data.hpp"
#include "brp/labels.hpp"
#include "brp/metrics.hpp"
#include "brp/proposals.hpp"
#include "brp/tafe.hpp"

using namespace brp;

namespace {

InstanceMap synthetic_labels(int side, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.height = side;
  cfg.width = side;
  cfg.density = 8;
  cfg.seed = seed;
  return synth_generate(1, cfg).samples.front().instances;
}

void BM_Aji(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto gt = synthetic_labels(side, 1);
  const auto pred = dilate_instances(gt, 1);
  for (auto _ : state) benchmark::DoNotOptimize(aji(gt, pred));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Aji)->Arg(128)->Arg(256)->Arg(512);

void BM_Propose(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto gt = synthetic_labels(side, 2);
  const auto seg = instance_to_semantic(gt);
  const auto bnd = instance_to_boundary(gt, 2);
  ProbabilityPair pp{ProbMap(side, side, 0.0f), ProbMap(side, side, 0.0f)};
  for (std::size_t i = 0; i < seg.size(); ++i) pp.seg[i] = seg[i], pp.bnd[i] = bnd[i];
  const PostprocParams params;
  for (auto _ : state) benchmark::DoNotOptimize(propose(pp, params));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Propose)->Arg(128)->Arg(256)->Arg(512);

void BM_TafeForward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  torch::manual_seed(0);
  Tafe net(TafeConfig::desk_scale());
  net->eval();
  torch::NoGradGuard no_grad;
  const auto x = torch::rand({1, 3, side, side});
  for (auto _ : state) benchmark::DoNotOptimize(net->forward(x).seg_prob);
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_TafeForward)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
