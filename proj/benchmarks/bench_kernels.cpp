// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "linrec/matrix.h"

namespace {

using namespace linrec;

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const Matrix a = gaussian_init(rng, n, n, 0.0, 1.0);
  const Matrix b = gaussian_init(rng, n, n, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).data().data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(32, 512)->Complexity(benchmark::oNCubed);

// The two halves of the reordered product: K^T V is d x d, Q (K^T V) is N x d.
void BM_KeyValueSummary(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  const Matrix k = gaussian_init(rng, n, 32, 0.0, 1.0);
  const Matrix v = gaussian_init(rng, n, 32, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(matmul_transposed_lhs(k, v).data().data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KeyValueSummary)->RangeMultiplier(2)->Range(256, 4096)->Complexity(benchmark::oN);

void BM_NormalizeRows(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  const Matrix x = gaussian_init(rng, n, 32, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(l2_normalize_rows(elu(x), 32).data().data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_NormalizeRows)->RangeMultiplier(2)->Range(256, 4096)->Complexity(benchmark::oN);

void BM_SoftmaxRows(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(6);
  const Matrix x = gaussian_init(rng, n, n, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(softmax_rows(x).data().data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SoftmaxRows)->RangeMultiplier(2)->Range(128, 2048)->Complexity(benchmark::oNSquared);

}  // namespace
