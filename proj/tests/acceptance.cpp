// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion, each with its runtime
// budget. Exits nonzero when any criterion fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "linrec/attention.h"
#include "linrec/gradcheck.h"
#include "linrec/recommender.h"
#include "linrec_cli/commands.h"

using namespace linrec;
using namespace linrec::cli;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

// ---- independent reference implementations --------------------------------

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      out(i, j) = s;
    }
  return out;
}

Matrix naive_transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix naive_rho_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  const double root = std::sqrt(static_cast<double>(x.cols()));
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) ss += x(i, j) * x(i, j);
    const double denom = root * std::max(std::sqrt(ss), 1e-12);
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) / denom;
  }
  return out;
}

Matrix naive_rho_cols(const Matrix& x) { return naive_transpose(naive_rho_rows(naive_transpose(x))); }

Matrix naive_elu(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) > 0 ? x(i, j) : std::expm1(x(i, j));
  return out;
}

Matrix naive_standard(const Matrix& q, const Matrix& k, const Matrix& v) {
  const std::size_t n = q.rows();
  const double root = std::sqrt(static_cast<double>(q.cols()));
  Matrix out(n, v.cols());
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logits(n);
    for (std::size_t m = 0; m < n; ++m) {
      double dot = 0.0;
      for (std::size_t j = 0; j < q.cols(); ++j) dot += q(i, j) * k(m, j);
      logits[m] = dot / root;
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double& l : logits) z += (l = std::exp(l - top));
    for (std::size_t m = 0; m < n; ++m)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, j) += logits[m] / z * v(m, j);
  }
  return out;
}

double frobenius_relative(const Matrix& a, const Matrix& b) {
  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    diff += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    ref += b.data()[i] * b.data()[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-300);
}

Matrix abs_gaussian(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m = gaussian_init(rng, r, c, 0.0, 1.0);
  for (double& x : m.data()) x = std::fabs(x);
  return m;
}

// ---- criteria --------------------------------------------------------------

Verdict condition3_property() {
  Rng rng(101);
  double worst_row = 0.0;
  double worst_col = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Matrix x = gaussian_init(rng, 64, 16, 0.0, 1.0);
    const Matrix y = gaussian_init(rng, 64, 16, 0.0, 1.0);
    const Matrix qr = l2_normalize_rows(x, 16);
    const Matrix kr = l2_normalize_cols(y, 64);
    for (std::size_t i = 0; i < 64; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 16; ++j) s += qr(i, j);
      worst_row = std::max(worst_row, s);
    }
    for (std::size_t j = 0; j < 16; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < 64; ++i) s += kr(i, j);
      worst_col = std::max(worst_col, s);
    }
  }
  const bool ok = worst_row <= 1.0 + 1e-10 && worst_col <= 1.0 + 1e-10;
  return {ok, "max row sum " + fmt("%.12f", worst_row) + ", max column sum " + fmt("%.12f", worst_col)};
}

Verdict associativity() {
  Rng rng(202);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.index(64);
    const std::size_t d = 1 + rng.index(16);
    const Matrix q = gaussian_init(rng, n, d, 0.0, 1.0);
    const Matrix k = gaussian_init(rng, n, d, 0.0, 1.0);
    const Matrix v = gaussian_init(rng, n, d, 0.0, 1.0);
    const Matrix scores =
        naive_matmul(naive_rho_rows(naive_elu(q)), naive_transpose(naive_rho_cols(naive_elu(k))));
    const Matrix slow = naive_matmul(scores, v);
    worst = std::max(worst, frobenius_relative(linrec_attention(q, k, v).output, slow));
  }
  return {worst < 1e-10, "max relative deviation " + fmt("%.3e", worst) + " over 200 instances"};
}

Verdict standard_oracle() {
  Rng rng(303);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.index(16);
    const std::size_t d = 1 + rng.index(16);
    const Matrix q = gaussian_init(rng, n, d, 0.0, 1.0);
    const Matrix k = gaussian_init(rng, n, d, 0.0, 1.0);
    const Matrix v = gaussian_init(rng, n, d, 0.0, 1.0);
    worst = std::max(worst, max_abs(subtract(standard_attention(q, k, v).output, naive_standard(q, k, v))));
  }
  return {worst <= 1e-12, "max abs deviation " + fmt("%.3e", worst) + " over 100 instances"};
}

Verdict gradient_suite() {
  Rng rng(404);
  std::size_t failed = 0;
  std::size_t checked = 0;
  double worst_op = 0.0;
  std::string failures;
  for (OpKind op : differentiable_ops()) {
    const GradCheckResult r = check_op_gradient(op, rng, 10, 1e-4);
    ++checked;
    worst_op = std::max(worst_op, r.max_relative_error);
    if (!r.passed) {
      ++failed;
      failures += " " + r.name;
    }
  }
  double worst_model = 0.0;
  for (Mechanism m : {Mechanism::standard, Mechanism::linrec}) {
    ModelGradCheckOptions options;  // N=12, d=8, |V|=20, L=1, h=2
    options.mechanism = m;
    options.tolerance = 1e-3;
    for (const GradCheckResult& r : check_model_gradient(options, rng)) {
      ++checked;
      worst_model = std::max(worst_model, r.max_relative_error);
      if (!r.passed) {
        ++failed;
        failures += " " + r.name;
      }
    }
  }
  return {failed == 0, std::to_string(checked) + " checks, worst op " + fmt("%.2e", worst_op) +
                           ", worst model parameter " + fmt("%.2e", worst_model) +
                           (failures.empty() ? "" : ", failed:" + failures)};
}

Verdict complexity_scaling() {
  BenchOptions options;  // d=32, N in {256, 512, 1024, 2048}, 5 trials
  options.min_trial_seconds = 0.1;
  const std::vector<BenchResult> results = run_bench(options);
  bool ok = true;
  std::string detail;
  for (Mechanism m : options.mechanisms) {
    std::vector<const BenchResult*> rows;
    for (const auto& r : results)
      if (r.mechanism == m) rows.push_back(&r);
    const double lo = m == Mechanism::linrec ? 1.6 : 3.2;
    const double hi = m == Mechanism::linrec ? 2.6 : 5.0;
    detail += std::string(to_string(m)) + " ratios";
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double ratio = rows[i]->median_seconds / rows[i - 1]->median_seconds;
      ok = ok && ratio >= lo && ratio <= hi;
      detail += " " + fmt("%.2f", ratio);
    }
    detail += "; ";
  }

  // Memory audit on the attention call itself.
  Rng rng(505);
  const std::size_t d = options.d;
  std::size_t prev_standard = 0;
  for (std::size_t n : options.lengths) {
    const Matrix q = gaussian_init(rng, n, d, 0.0, 1.0);
    AllocationAudit standard_audit;
    standard_attention(q, q, q);
    const std::size_t standard_peak = standard_audit.largest_buffer_bytes();
    ok = ok && standard_peak == n * n * sizeof(double);
    if (prev_standard != 0) ok = ok && standard_peak == 4 * prev_standard;
    prev_standard = standard_peak;

    AllocationAudit linrec_audit;
    linrec_attention(q, q, q);
    ok = ok && linrec_audit.count_with_shape(n, n) == 0 &&
         linrec_audit.count_with_shape(d, d) == 1 &&
         linrec_audit.largest_buffer_bytes() <= n * d * sizeof(double);
  }
  detail += "standard peak N*N*8 bytes (" + std::to_string(prev_standard) +
            " at N=2048), LinRec intermediate d x d, no N x N buffer";
  return {ok, detail};
}

RunConfig cyclic_config(Mechanism m, const fs::path& dir) {
  RunConfig cfg;
  cfg.model.mechanism = m;
  cfg.model.max_len = 48;
  cfg.model.hidden = 16;
  cfg.model.heads = 2;
  cfg.model.layers = 1;
  cfg.model.inner = 64;
  cfg.model.dropout = 0.2;
  cfg.train.epochs = 50;
  cfg.train.patience = 50;
  cfg.train.batch_size = 32;
  cfg.train.adam.lr = 0.005;
  cfg.train.seed = 2024;
  SyntheticSpec spec;
  spec.pattern = SyntheticPattern::cyclic;
  spec.n_items = 50;
  spec.n_users = 200;
  spec.seq_len = 20;
  cfg.data.synthetic = spec;
  cfg.metrics_path = dir / (std::string(to_string(m)) + "_metrics.csv");
  cfg.checkpoint_path = dir / (std::string(to_string(m)) + ".ckpt");
  return cfg;
}

struct TempDir {
  TempDir() : path(fs::temp_directory_path() / ("linrec_accept_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path path;
};

Verdict training_sanity(const fs::path& dir) {
  const RunConfig cfg = cyclic_config(Mechanism::linrec, dir);
  std::ostringstream log;
  const TrainOutcome outcome = run_training(cfg, log);
  const SplitData split = leave_one_out_split(load_dataset(cfg.data));
  const MetricsReport bigram = BigramOracle(split.train, 50).evaluate(split.test, 10);
  const bool ok = outcome.test.recall >= 0.9 && outcome.test.mrr >= 0.7 && bigram.recall == 1.0 &&
                  outcome.result.history.size() <= 50;
  return {ok, "LinRec test Recall@10 " + fmt("%.3f", outcome.test.recall) + ", MRR " +
                  fmt("%.3f", outcome.test.mrr) + " (best epoch " +
                  std::to_string(outcome.result.best_epoch) + "); bigram oracle Recall@10 " +
                  fmt("%.3f", bigram.recall)};
}

Verdict parity_sanity(const fs::path& dir) {
  std::string detail;
  bool ok = true;
  for (Mechanism m : {Mechanism::standard, Mechanism::linrec}) {
    std::ostringstream log;
    const TrainOutcome outcome = run_training(cyclic_config(m, dir), log);
    ok = ok && outcome.test.recall >= 0.9;
    detail += std::string(to_string(m)) + " Recall@10 " + fmt("%.3f", outcome.test.recall) +
              (m == Mechanism::standard ? ", " : "");
  }
  return {ok, detail};
}

Verdict metrics_oracle() {
  Rng rng(808);
  std::size_t mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n_items = 2 + rng.index(100);
    const std::size_t users = 1 + rng.index(40);
    const std::size_t k = 10;
    std::vector<std::size_t> ranks;
    double recall = 0.0, mrr = 0.0, ndcg = 0.0;
    for (std::size_t u = 0; u < users; ++u) {
      std::vector<double> scores(n_items);
      for (double& s : scores) s = std::round(rng.gaussian(0.0, 1.0) * 2.0) / 2.0;
      const auto target = static_cast<ItemId>(1 + rng.index(n_items));
      std::vector<std::size_t> order(n_items);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
      });
      const std::size_t rank =
          static_cast<std::size_t>(std::find(order.begin(), order.end(), target - 1) - order.begin()) + 1;
      if (rank_of_target(scores, target) != rank) ++mismatches;
      ranks.push_back(rank_of_target(scores, target));
      mrr += 1.0 / static_cast<double>(rank);
      if (rank <= k) {
        recall += 1.0;
        ndcg += 1.0 / std::log2(1.0 + static_cast<double>(rank));
      }
    }
    // Summation in the same order as the oracle, so equality is exact.
    const MetricsReport r = metrics_from_ranks(ranks, k);
    const double n = static_cast<double>(users);
    if (r.recall != recall / n || r.mrr != mrr / n || r.ndcg != ndcg / n) ++mismatches;
  }
  const std::vector<std::size_t> third{3};
  const MetricsReport r3 = metrics_from_ranks(third, 10);
  const bool single = std::fabs(r3.mrr - 1.0 / 3.0) < 1e-15 && r3.ndcg == 0.5;
  return {mismatches == 0 && single, std::to_string(mismatches) +
                                         " mismatches over 100 tables; rank-3 case MRR " +
                                         fmt("%.4f", r3.mrr) + ", NDCG@10 " + fmt("%.4f", r3.ndcg)};
}

Verdict probability_interpretation() {
  Rng rng(909);
  double worst_identity = 0.0;
  double worst_mass = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.index(32);
    const std::size_t d = 1 + rng.index(16);
    // Identity on general ELU inputs; mass bound on non-negative inputs.
    const Matrix qg = naive_rho_rows(naive_elu(gaussian_init(rng, n, d, 0.0, 1.0)));
    const Matrix kg = naive_rho_cols(naive_elu(gaussian_init(rng, n, d, 0.0, 1.0)));
    worst_identity = std::max(
        worst_identity, max_abs(subtract(probability_view(qg, kg).attention,
                                         naive_matmul(qg, naive_transpose(kg)))));
    const Matrix qr = naive_rho_rows(abs_gaussian(rng, n, d));
    const Matrix kr = naive_rho_cols(abs_gaussian(rng, n, d));
    const Matrix a = probability_view(qr, kr).attention;
    for (std::size_t i = 0; i < n; ++i) {
      double mass = 0.0;
      for (std::size_t m = 0; m < n; ++m) mass += a(i, m);
      worst_mass = std::max(worst_mass, mass);
    }
  }
  return {worst_identity <= 1e-12 && worst_mass <= 1.0 + 1e-9,
          "max |Pr(A) - B'| " + fmt("%.2e", worst_identity) + ", max row mass " +
              fmt("%.12f", worst_mass)};
}

std::string strip_seconds(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::string out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

Verdict reproducibility(const fs::path& dir) {
  std::string runs[2];
  for (int i = 0; i < 2; ++i) {
    RunConfig cfg = cyclic_config(Mechanism::linrec, dir / ("repro" + std::to_string(i)));
    cfg.train.epochs = 8;
    std::ostringstream log;
    if (cmd_train(cfg, log) != kExitOk) return {false, "training run " + std::to_string(i) + " failed"};
    std::ifstream in(cfg.metrics_path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    runs[i] = buffer.str();
  }
  const std::string a = strip_seconds(runs[0]);
  const std::string b = strip_seconds(runs[1]);
  const auto lines = std::count(a.begin(), a.end(), '\n');
  return {a == b && lines > 2, std::to_string(lines) + "-line metrics CSVs " +
                                   (a == b ? "byte-equal" : "differ") + " without the seconds column"};
}

}  // namespace

int main() {
  TempDir dir;
  struct Criterion {
    int number;
    const char* title;
    double budget_seconds;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "condition-3 row and column sums", 5.0, condition3_property},
      {2, "associativity against slow-order oracle", 5.0, associativity},
      {3, "standard attention against element-wise oracle", 2.0, standard_oracle},
      {4, "gradient suite", 60.0, gradient_suite},
      {5, "complexity scaling and memory audit", 120.0, complexity_scaling},
      {6, "training sanity on cyclic data", 300.0, [&] { return training_sanity(dir.path); }},
      {7, "standard/LinRec parity on cyclic data", 600.0, [&] { return parity_sanity(dir.path); }},
      {8, "metrics against sort-based oracle", 10.0, metrics_oracle},
      {9, "probability interpretation", 10.0, probability_interpretation},
      {10, "reproducible training output", 300.0, [&] { return reproducibility(dir.path); }},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = seconds < c.budget_seconds;
    const bool passed = v.passed && in_budget;
    if (!passed) ++failures;
    std::printf("[%s] criterion %d: %s: %s (%.2f s, budget %.0f s%s)\n", passed ? "PASS" : "FAIL",
                c.number, c.title, v.detail.c_str(), seconds, c.budget_seconds,
                in_budget ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
