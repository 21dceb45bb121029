#include <random>

#include <benchmark/benchmark.h>

#include "harmonic/analysis.hpp"
#include "harmonic/datasets.hpp"
#include "harmonic/graph.hpp"
#include "harmonic/heads.hpp"
#include "harmonic/models.hpp"
#include "harmonic/optim.hpp"

using namespace harmonic;

namespace {

Tensor gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Tensor t = Tensor::zeros(rows, cols);
  for (double& x : t.data()) x = normal(rng);
  return t;
}

HeadKind head_arg(const benchmark::State& state) {
  if (state.range(2) == 0) return CrossEntropyHead{};
  return HarmonicHead{state.range(1) == 784 ? 28.0 : 1.0, 1e-8};
}

// Batched loss and gradient through the fused head node.
// Args: classes, feature width, harmonic (0/1).
void BM_HeadLossBackward(benchmark::State& state) {
  const auto classes = static_cast<std::size_t>(state.range(0));
  const auto width = static_cast<std::size_t>(state.range(1));
  const std::size_t batch = 64;
  const Tensor inputs = gaussian(batch, width, 1);
  const Tensor weights = gaussian(width, classes, 2);
  std::vector<std::size_t> targets(batch);
  for (std::size_t i = 0; i < batch; ++i) targets[i] = i % classes;
  const HeadKind head = head_arg(state);
  for (auto _ : state) {
    Graph g;
    const Var x = g.parameter(inputs);
    const Var w = g.parameter(weights);
    const Gradients grads = g.backward(head_loss(g, x, w, targets, head));
    benchmark::DoNotOptimize(grads[w].data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_HeadLossBackward)
    ->ArgNames({"V", "N", "harmonic"})
    ->Args({31, 16, 0})
    ->Args({31, 16, 1})
    ->Args({10, 784, 0})
    ->Args({10, 784, 1});

// One full-batch epoch of the modular-addition MLP (769 samples).
void BM_TrainEpochModadd(benchmark::State& state) {
  const TokenDataset data = gen_modular_addition();
  TrainConfig config;
  config.epochs = 1;
  config.eval_every = 1;
  const HeadKind head = state.range(0) ? HeadKind{HarmonicHead{}} : HeadKind{CrossEntropyHead{}};
  for (auto _ : state) {
    const TrainResult r = train(data, head, config);
    benchmark::DoNotOptimize(r.metrics.train_loss.back());
  }
}
BENCHMARK(BM_TrainEpochModadd)->ArgName("harmonic")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Pca(benchmark::State& state) {
  const Tensor rows = gaussian(static_cast<std::size_t>(state.range(0)), 16, 3);
  for (auto _ : state) benchmark::DoNotOptimize(pca(rows).explained_ratio.data());
}
BENCHMARK(BM_Pca)->Arg(25)->Arg(127);

void BM_BestCosetPartition(benchmark::State& state) {
  const Tensor e = gaussian(24, 16, 4);
  for (auto _ : state) benchmark::DoNotOptimize(best_coset_partition(e).score);
}
BENCHMARK(BM_BestCosetPartition)->Unit(benchmark::kMillisecond);

void BM_ParallelogramLoss(benchmark::State& state) {
  const Tensor e = gaussian(25, 16, 5);
  const std::vector<Quadruple> quads = lattice_quadruples(5, 1000, 0);
  for (auto _ : state) benchmark::DoNotOptimize(parallelogram_loss(e, quads).data());
}
BENCHMARK(BM_ParallelogramLoss);

}  // namespace

BENCHMARK_MAIN();
