// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <ostream>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "linrec/autograd.h"
#include "linrec/transformer.h"
#include "linrec_cli/commands.h"

namespace linrec::cli {
namespace {

using Clock = std::chrono::steady_clock;

void keep_large_buffers_on_heap() {
#if defined(__GLIBC__)
  constexpr int kLimit = 1 << 30;
  mallopt(M_MMAP_THRESHOLD, kLimit);
  mallopt(M_TRIM_THRESHOLD, kLimit);
#endif
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::function<double()> make_call(Mechanism mechanism, bool backward, const Matrix& q,
                                  const Matrix& k, const Matrix& v) {
  if (!backward) {
    return [mechanism, &q, &k, &v] { return attend(mechanism, q, k, v).output(0, 0); };
  }
  ModelConfig cfg;
  cfg.mechanism = mechanism;
  cfg.mask_policy = MaskPolicy::none;
  return [cfg, &q, &k, &v] {
    Tape tape;
    const NodeId qn = tape.leaf(q);
    const NodeId kn = tape.leaf(k);
    const NodeId vn = tape.leaf(v);
    const NodeId loss = tape.sum(attention_head(tape, qn, kn, vn, cfg, {}));
    return tape.backward(loss)[qn](0, 0);
  };
}

double time_trial(const std::function<double()>& call, std::size_t repeats, double& sink) {
  const auto start = Clock::now();
  for (std::size_t r = 0; r < repeats; ++r) sink += call();
  return seconds_since(start);
}

}  // namespace

double timer_tick_seconds() {
  auto best = Clock::duration::max();
  for (int i = 0; i < 200; ++i) {
    const auto a = Clock::now();
    auto b = Clock::now();
    while (b == a) b = Clock::now();
    best = std::min(best, b - a);
  }
  return std::chrono::duration<double>(best).count();
}

std::vector<BenchResult> run_bench(const BenchOptions& options) {
  if (options.trials < 3) throw std::invalid_argument("bench: trials must be >= 3");
  if (options.d < 1) throw std::invalid_argument("bench: d must be >= 1");
  for (std::size_t n : options.lengths) {
    if (n < options.d) {
      throw std::invalid_argument("bench: N=" + std::to_string(n) + " is smaller than d=" +
                                  std::to_string(options.d));
    }
  }
  if (options.heap_buffers) keep_large_buffers_on_heap();
  const double floor = std::max(20.0 * timer_tick_seconds(), options.min_trial_seconds);
  std::vector<BenchResult> results;
  double sink = 0.0;
  for (Mechanism mechanism : options.mechanisms) {
    for (std::size_t n : options.lengths) {
      Rng rng(options.seed ^ (n * 0x9E3779B97F4A7C15ULL));
      const Matrix q = gaussian_init(rng, n, options.d, 0.0, 1.0);
      const Matrix k = gaussian_init(rng, n, options.d, 0.0, 1.0);
      const Matrix v = gaussian_init(rng, n, options.d, 0.0, 1.0);
      const auto call = make_call(mechanism, options.backward, q, k, v);

      BenchResult r;
      r.mechanism = mechanism;
      r.n = n;
      r.d = options.d;
      r.trials = options.trials;
      {
        AllocationAudit audit;
        sink += call();
        r.peak_bytes = audit.largest_buffer_bytes();
      }
      r.repeats = 1;
      while (time_trial(call, r.repeats, sink) < floor) r.repeats *= 2;

      std::vector<double> times;
      time_trial(call, r.repeats, sink);  // discarded warm-up
      for (std::size_t t = 0; t < options.trials; ++t)
        times.push_back(time_trial(call, r.repeats, sink) / static_cast<double>(r.repeats));
      std::sort(times.begin(), times.end());
      const std::size_t mid = times.size() / 2;
      r.median_seconds = times.size() % 2 == 1 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
      results.push_back(r);
    }
  }
  if (sink == 42.0) std::fputs("", stderr);  // keeps the timed calls observable
  return results;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchResult>& results) {
  out << "mechanism,N,d,median_seconds,peak_bytes\n";
  char buf[64];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%.9e", r.median_seconds);
    out << to_string(r.mechanism) << ',' << r.n << ',' << r.d << ',' << buf << ','
        << r.peak_bytes << '\n';
  }
}

int cmd_bench(const BenchOptions& options, std::ostream& out) {
  write_bench_csv(out, run_bench(options));
  return kExitOk;
}

}  // namespace linrec::cli
