#include <benchmark/benchmark.h>

#include <vector>

#include "fairscrub/datagen.hpp"
#include "fairscrub/experiment.hpp"
#include "fairscrub/mlp.hpp"
#include "fairscrub/probing.hpp"
#include "fairscrub/trainer.hpp"

using namespace fairscrub;

namespace {

Matrix random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

void BM_MlpForward(benchmark::State& state) {
  Rng rng(1);
  const auto batch = static_cast<std::size_t>(state.range(0));
  const Mlp net = Mlp::glorot({64, 32, 32}, Activation::ReLU, rng);
  const Matrix x = random_batch(batch, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(infer(net, x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_MlpForward)->Arg(64)->Arg(256);

void BM_MlpForwardBackward(benchmark::State& state) {
  Rng rng(1);
  const auto batch = static_cast<std::size_t>(state.range(0));
  const Mlp net = Mlp::glorot({64, 32, 32}, Activation::ReLU, rng);
  const Matrix x = random_batch(batch, 64, 2);
  const Matrix upstream = random_batch(batch, 32, 3);
  for (auto _ : state) {
    const auto pass = forward(net, x);
    benchmark::DoNotOptimize(backward(net, pass.cache, upstream));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_MlpForwardBackward)->Arg(64)->Arg(256);

void BM_TrainStep(benchmark::State& state) {
  SynthSpec spec;
  spec.n = 64;
  spec.z_arities.assign(static_cast<std::size_t>(state.range(0)), 2);
  spec.z_strengths.assign(spec.z_arities.size(), 0.8);
  const Dataset batch = generate(spec);
  AdsModel model = initial_model(dims_for(batch), 1);
  TrainConfig cfg;
  cfg.loss.lambda1 = 10.0;
  cfg.loss.num_attrs = batch.num_attrs();
  Trainer trainer(model, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step(batch));
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(2);

void BM_OnlineMdl(benchmark::State& state) {
  SynthSpec spec;
  spec.n = static_cast<std::size_t>(state.range(0));
  spec.dim = 32;
  const Dataset data = generate(spec);
  const auto labels = data.labels(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(online_mdl(data.x, labels, FractionSchedule{}, 2, 7));
  }
}
BENCHMARK(BM_OnlineMdl)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
