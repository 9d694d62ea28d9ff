#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "orient/evaluation.hpp"
#include "orient/losses.hpp"
#include "orient/mining.hpp"
#include "orient/model.hpp"
#include "orient/so3.hpp"
#include "orient/synthetic.hpp"

namespace {

using namespace orient;

std::vector<PointCloud> shapes(int count, int points) {
  Rng rng(1);
  std::vector<PointCloud> out;
  for (int i = 0; i < count; ++i) out.push_back(generate_shape(i % kPrimitiveCount, points, rng, static_cast<SampleId>(i)));
  return out;
}

void BM_Forward(benchmark::State& state) {
  const auto batch = shapes(static_cast<int>(state.range(0)), 256);
  const ModelParams model = init_params(1, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(model, batch, 1, CacheMode::discard).logits.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto batch = shapes(static_cast<int>(state.range(0)), 256);
  const ModelParams model = init_params(1, 4);
  std::vector<int> labels;
  for (const auto& c : batch) labels.push_back(c.label);
  for (auto _ : state) {
    const auto out = forward(model, batch);
    const LogitLoss ce = classification_loss(out.logits, labels);
    benchmark::DoNotOptimize(backward(model, out.cache, ce.grad, RowMatrix()).params.values().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_GradEuler(benchmark::State& state) {
  Rng rng(2);
  const PointCloud cloud = generate_shape(0, 256, rng);
  const Points upstream = Points::Random(256, 3);
  const EulerAngles angles{0.3, -1.1, 2.0};
  for (auto _ : state) benchmark::DoNotOptimize(grad_euler(angles, cloud.points, upstream));
}
BENCHMARK(BM_GradEuler);

void BM_MineOrientation(benchmark::State& state) {
  Rng rng(3);
  const PointCloud cloud = generate_shape(1, 256, rng);
  const ModelParams model = init_params(3, 4);
  MiningConfig config;
  config.steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mine_orientation(model, cloud, cloud.label, {0.1, 0.2, 0.3}, config).loss);
  }
}
BENCHMARK(BM_MineOrientation)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_Mmd(benchmark::State& state) {
  Rng rng(4);
  std::normal_distribution<double> normal;
  RowMatrix a(state.range(0), kFeatureDim), b(state.range(0), kFeatureDim);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = normal(rng);
    b.data()[i] = normal(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(mmd2(a, b));
}
BENCHMARK(BM_Mmd)->Arg(160)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
