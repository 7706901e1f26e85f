#include <benchmark/benchmark.h>

#include "rcnet/approximator.hpp"
#include "rcnet/bit_extract.hpp"
#include "rcnet/floor_net.hpp"
#include "rcnet/rng.hpp"
#include "rcnet/target.hpp"
#include "rcnet/verify.hpp"

namespace {

using namespace rcnet;

void BM_FloorEval(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const RCNet net = build_floor_rcnet({n, n, 0.25});
  Rng rng(1);
  Vec x(1);
  for (auto _ : state) {
    x(0) = rng.uniform(0.0, static_cast<double>(n));
    benchmark::DoNotOptimize(eval_rcnet_scalar(net, x));
  }
}
BENCHMARK(BM_FloorEval)->Arg(4)->Arg(8);

void BM_PrefixExtract(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  const RCNet net = build_prefix_extract_rcnet(r);
  Rng rng(2);
  std::vector<int> bits(static_cast<std::size_t>(r));
  for (auto& b : bits) b = static_cast<int>(rng.below(2));
  const double v = BitString(bits).encode();
  Vec x(2);
  x(1) = v;
  for (auto _ : state) {
    x(0) = static_cast<double>(rng.below(static_cast<std::uint64_t>(r) + 1));
    benchmark::DoNotOptimize(eval_rcnet_scalar(net, x));
  }
}
BENCHMARK(BM_PrefixExtract)->Arg(10)->Arg(53);

void BM_GapBuild(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  const TargetFunction target = make_abs1_target(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_gap_rcnet(target, r));
  }
}
BENCHMARK(BM_GapBuild)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_GapBatchEval(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  const TargetFunction target = make_abs1_target(1);
  const GapNet gap = build_gap_rcnet(target, r);
  const RCNet lean = strip_inert_units(gap.net);
  const Mat X = make_grid(1, 1024);
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval_rcnet_batch(lean, X));
  }
  state.SetItemsProcessed(state.iterations() * X.cols());
}
BENCHMARK(BM_GapBatchEval)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
