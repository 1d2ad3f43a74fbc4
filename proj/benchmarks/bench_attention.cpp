// SPDX-License-Identifier: Apache-2.0
//
// Attention forward and forward+backward cost as a function of sequence
// length N at fixed width d. Q, K and V are generated once per benchmark.

#include <benchmark/benchmark.h>

#include "linrec/attention.h"
#include "linrec/transformer.h"

namespace {

using namespace linrec;

constexpr std::size_t kWidth = 32;

template <Mechanism M>
void BM_Forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix q = gaussian_init(rng, n, kWidth, 0.0, 1.0);
  const Matrix k = gaussian_init(rng, n, kWidth, 0.0, 1.0);
  const Matrix v = gaussian_init(rng, n, kWidth, 0.0, 1.0);
  for (auto _ : state) {
    AttentionOutput out = attend(M, q, k, v);
    benchmark::DoNotOptimize(out.output.data().data());
  }
  state.SetComplexityN(state.range(0));
  AllocationAudit audit;
  attend(M, q, k, v);
  state.counters["peak_bytes"] = static_cast<double>(audit.largest_buffer_bytes());
}

template <Mechanism M>
void BM_ForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  ModelConfig cfg;
  cfg.mechanism = M;
  cfg.mask_policy = MaskPolicy::none;
  const Matrix q = gaussian_init(rng, n, kWidth, 0.0, 1.0);
  const Matrix k = gaussian_init(rng, n, kWidth, 0.0, 1.0);
  const Matrix v = gaussian_init(rng, n, kWidth, 0.0, 1.0);
  for (auto _ : state) {
    Tape tape;
    const NodeId qn = tape.leaf(q);
    const NodeId kn = tape.leaf(k);
    const NodeId vn = tape.leaf(v);
    const Gradients g = tape.backward(tape.sum(attention_head(tape, qn, kn, vn, cfg, {})));
    benchmark::DoNotOptimize(g[qn].data().data());
  }
  state.SetComplexityN(state.range(0));
}

BENCHMARK(BM_Forward<Mechanism::standard>)->RangeMultiplier(2)->Range(128, 2048)->Complexity();
BENCHMARK(BM_Forward<Mechanism::linrec>)->RangeMultiplier(2)->Range(128, 2048)->Complexity();
BENCHMARK(BM_Forward<Mechanism::softmax_twice>)->RangeMultiplier(2)->Range(128, 2048)->Complexity();
BENCHMARK(BM_ForwardBackward<Mechanism::standard>)->RangeMultiplier(2)->Range(128, 1024)->Complexity();
BENCHMARK(BM_ForwardBackward<Mechanism::linrec>)->RangeMultiplier(2)->Range(128, 1024)->Complexity();

}  // namespace
