#include <benchmark/benchmark.h>

#include "tabkit/ops.hpp"
#include "tabkit/rng.hpp"

using tabkit::Rng;
using tabkit::ad::Tensor;

namespace {

Tensor random_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-3, 3);
  return Tensor::from_data({rows, cols}, std::move(v));
}

void BM_SoftmaxRows(benchmark::State& state) {
  Tensor z = random_rows(256, state.range(0), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tabkit::ad::softmax_rows(z));
  }
}
BENCHMARK(BM_SoftmaxRows)->Arg(8)->Arg(64);

void BM_SparsemaxRows(benchmark::State& state) {
  Tensor z = random_rows(256, state.range(0), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tabkit::ad::sparsemax_rows(z));
  }
}
BENCHMARK(BM_SparsemaxRows)->Arg(8)->Arg(64);

void BM_Entmax15Rows(benchmark::State& state) {
  Tensor z = random_rows(256, state.range(0), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tabkit::ad::entmax15_rows(z));
  }
}
BENCHMARK(BM_Entmax15Rows)->Arg(8)->Arg(64);

void BM_Entmoid15(benchmark::State& state) {
  Tensor z = random_rows(256, 64, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tabkit::ad::entmoid15(z));
  }
}
BENCHMARK(BM_Entmoid15);

void BM_ObliviousLeafWeights(benchmark::State& state) {
  Rng rng(5);
  const std::size_t trees = 16, depth = state.range(0);
  std::vector<double> gates(256 * trees * depth);
  for (double& g : gates) g = rng.uniform(0, 1);
  Tensor t = Tensor::from_data({256, trees * depth}, std::move(gates));
  for (auto _ : state) {
    benchmark::DoNotOptimize(tabkit::ad::oblivious_leaf_weights(t, trees, depth));
  }
}
BENCHMARK(BM_ObliviousLeafWeights)->Arg(3)->Arg(6);

}  // namespace
