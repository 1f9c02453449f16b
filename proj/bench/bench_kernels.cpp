// Serial reference vs OpenMP path for the hot kernels. The second range
// argument selects the path: 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "graph_fixtures.hpp"
#include "oracles.hpp"
#include "posefuse/dataio.hpp"
#include "posefuse/metrics.hpp"
#include "posefuse/pose_graph.hpp"
#include "posefuse/relpose.hpp"

using namespace posefuse;

namespace {

Exec exec_of(const benchmark::State& state) {
  return state.range(1) ? Exec::kParallel : Exec::kSerial;
}

void label(benchmark::State& state) { state.SetLabel(state.range(1) ? "parallel" : "serial"); }

void BM_GraphCost(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto truth = fixture::smooth_truth(static_cast<int>(state.range(0)));
  const PoseGraph g = fixture::noisy_graph(truth, rng);
  for (auto _ : state) benchmark::DoNotOptimize(graph_cost(g, g.initial, {}, exec_of(state)));
  label(state);
}

void BM_Optimize(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto truth = fixture::smooth_truth(static_cast<int>(state.range(0)));
  const PoseGraph g = fixture::noisy_graph(truth, rng);
  OptimizerOptions opts;
  opts.exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(optimize(g, opts).final_cost);
  label(state);
}

void BM_RegisterAll(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::vector<CorrespondenceSet> sets;
  for (int k = 0; k < state.range(0); ++k) {
    sets.push_back(oracle::correspondence_set(oracle::random_pose(rng, 0.3, 0.05), 100, 0.001, rng, 0.2));
  }
  const RelposeConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(register_all(sets, cfg, exec_of(state)).size());
  label(state);
}

std::vector<TimedPose> jittered(const std::vector<TimedPose>& ref, std::mt19937_64& rng) {
  auto out = ref;
  for (auto& p : out) p.pose = fixture::perturb(p.pose, rng, 2 * fixture::kDeg, 0.01);
  return out;
}

void BM_AddMetrics(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const auto ref = fixture::smooth_truth(static_cast<int>(state.range(0)));
  const auto est = jittered(ref, rng);
  ModelPoints model{sample_box_surface(Vec3(0.1, 0.08, 0.05), 500, 4), 0.14};
  for (auto _ : state) benchmark::DoNotOptimize(add_metrics({est, ref}, model, exec_of(state)).adds_auc);
  label(state);
}

void BM_Iou3d(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto ref = fixture::smooth_truth(static_cast<int>(state.range(0)));
  const auto est = jittered(ref, rng);
  const std::vector<Vec3> ext{Vec3(0.1, 0.08, 0.05)};
  for (auto _ : state) benchmark::DoNotOptimize(iou3d({est, ref}, ext, exec_of(state)).recall50);
  label(state);
}

}  // namespace

BENCHMARK(BM_GraphCost)->ArgsProduct({{500, 5000}, {0, 1}});
BENCHMARK(BM_Optimize)->ArgsProduct({{500}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RegisterAll)->ArgsProduct({{200}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AddMetrics)->ArgsProduct({{500}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Iou3d)->ArgsProduct({{500, 5000}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
