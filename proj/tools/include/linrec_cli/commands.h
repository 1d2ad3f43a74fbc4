// SPDX-License-Identifier: Apache-2.0
//
// The subcommands behind the `linrec` executable. Each returns a process exit
// code and writes its report to the given stream, so tests can drive them
// without spawning processes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "linrec/attention.h"
#include "linrec/recommender.h"
#include "linrec_cli/run_config.h"

namespace linrec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

// ---- check ----------------------------------------------------------------

enum class Fault { none, skip_normalization };

struct CheckOptions {
  std::uint64_t seed = 2024;
  std::size_t trials = 1000;
  Fault fault = Fault::none;
};

struct CheckLine {
  std::string name;
  bool passed = false;
  bool informational = false;  // reported, never fails the run
  std::string detail;
};

std::vector<CheckLine> run_checks(const CheckOptions& options);
int cmd_check(const CheckOptions& options, std::ostream& out);

// ---- bench ----------------------------------------------------------------

struct BenchOptions {
  std::vector<Mechanism> mechanisms{Mechanism::standard, Mechanism::linrec};
  std::size_t d = 32;
  std::vector<std::size_t> lengths{256, 512, 1024, 2048};
  std::size_t trials = 5;  // warm trials; one extra cold run is discarded
  bool backward = false;
  std::uint64_t seed = 2024;
  double min_trial_seconds = 0.01;  // lower bound on one timed trial
  /// Serve large buffers from the heap rather than a fresh mmap per call, so
  /// timings exclude first-touch page faults. Process-wide and one-way (glibc).
  bool heap_buffers = true;
};

struct BenchResult {
  Mechanism mechanism = Mechanism::linrec;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t trials = 0;
  std::size_t repeats = 0;  // calls per timed trial
  double median_seconds = 0.0;  // per call
  std::size_t peak_bytes = 0;   // largest single buffer allocated by one call
};

/// Smallest observable steady_clock increment, in seconds.
double timer_tick_seconds();
std::vector<BenchResult> run_bench(const BenchOptions& options);
void write_bench_csv(std::ostream& out, const std::vector<BenchResult>& results);
int cmd_bench(const BenchOptions& options, std::ostream& out);

// ---- train / eval ---------------------------------------------------------

inline constexpr const char* kMetricsHeader = "epoch,split,recall@k,mrr,ndcg@k,loss,seconds";

struct TrainOutcome {
  TrainResult result;
  MetricsReport test;
  double test_loss = 0.0;
  std::size_t dropped_users = 0;
};

TrainOutcome run_training(const RunConfig& config, std::ostream& log);
int cmd_train(const RunConfig& config, std::ostream& log);

struct EvalOptions {
  std::filesystem::path checkpoint;
  DataSource data;
  std::size_t k = 10;
  std::size_t threads = 1;
  std::filesystem::path out;  // optional CSV copy of the report
};

struct EvalOutcome {
  MetricsReport metrics;
  double loss = 0.0;
  std::string best_epoch;  // from the checkpoint metadata, empty if absent
};

/// Rejects a dataset whose item vocabulary differs from the checkpoint's.
EvalOutcome run_eval(const EvalOptions& options);
int cmd_eval(const EvalOptions& options, std::ostream& out);

// ---- heatmap --------------------------------------------------------------

struct HeatmapOptions {
  std::filesystem::path checkpoint;
  std::vector<ItemId> sequence;
  std::size_t layer = 0;
  std::size_t head = 0;
  std::filesystem::path out_prefix = "heatmap";  // writes <prefix>.csv and <prefix>.pgm
};

struct Heatmap {
  Matrix scores;  // true_len x true_len
  std::size_t layer = 0;
  std::size_t head = 0;
  Mechanism mechanism = Mechanism::linrec;
  double min_value = 0.0;
  double max_value = 0.0;
};

/// Eval-mode attention scores of one head for the real positions of `sequence`.
Heatmap compute_heatmap(const ModelParams& params, const ModelConfig& cfg,
                        const std::vector<ItemId>& sequence, std::size_t layer, std::size_t head);
/// Round-trippable CSV (%.17g), one matrix row per line.
void write_matrix_csv(std::ostream& out, const Matrix& m);
Matrix read_matrix_csv(std::istream& in);
/// Binary PGM, min-max scaled with negatives clamped to 0; darker is higher.
void write_pgm(std::ostream& out, const Matrix& m);
int cmd_heatmap(const HeatmapOptions& options, std::ostream& out);

// ---- entropy --------------------------------------------------------------

struct EntropyOptions {
  std::uint64_t seed = 2024;
  std::size_t n = 128;
  std::size_t d = 16;
  std::size_t samples = 100;
  std::filesystem::path rows_out;  // optional per-row CSV
};

struct EntropyReport {
  std::vector<double> standard;  // one entry per (sample, row)
  std::vector<double> linrec;
  double fraction_linrec_ge = 0.0;  // rows where LinRec entropy >= standard
};

EntropyReport run_entropy(const EntropyOptions& options);
/// Linear-interpolated quantile of an unsorted sample.
double quantile(std::vector<double> values, double q);
void write_entropy_summary(std::ostream& out, const EntropyReport& report);
int cmd_entropy(const EntropyOptions& options, std::ostream& out);

// ---- synth ----------------------------------------------------------------

struct SynthOptions {
  SyntheticSpec spec;
  std::filesystem::path out;  // stdout when empty
};

int cmd_synth(const SynthOptions& options, std::ostream& out);

}  // namespace linrec::cli
