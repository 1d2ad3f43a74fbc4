// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "linrec/gradcheck.h"
#include "linrec_cli/commands.h"

namespace linrec::cli {
namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

Matrix gaussian(Rng& rng, std::size_t r, std::size_t c) { return gaussian_init(rng, r, c, 0.0, 1.0); }

Matrix absolute(Matrix m) {
  for (double& v : m.data()) v = std::fabs(v);
  return m;
}

// The normalization maps under test; the injected fault skips them.
Matrix rho_rows(const Matrix& x, Fault fault) {
  return fault == Fault::skip_normalization ? x : l2_normalize_rows(x, x.cols(), kNormEpsilon);
}

Matrix rho_cols(const Matrix& x, Fault fault) {
  return fault == Fault::skip_normalization ? x : l2_normalize_cols(x, x.rows(), kNormEpsilon);
}

CheckLine condition3_rows(const CheckOptions& o, Rng& rng) {
  double worst = -INFINITY;
  for (std::size_t t = 0; t < o.trials; ++t) {
    const Matrix q = rho_rows(gaussian(rng, 64, 16), o.fault);
    worst = std::max(worst, check_condition3(q, Matrix(64, 16), 1e-10).max_row_sum);
  }
  return {"condition3.query_row_sums", worst <= 1.0 + 1e-10, false, "max=" + sci(worst)};
}

CheckLine condition3_cols(const CheckOptions& o, Rng& rng) {
  double worst = -INFINITY;
  for (std::size_t t = 0; t < o.trials; ++t) {
    const Matrix k = rho_cols(gaussian(rng, 64, 16), o.fault);
    worst = std::max(worst, check_condition3(Matrix(64, 16), k, 1e-10).max_col_sum);
  }
  return {"condition3.key_col_sums", worst <= 1.0 + 1e-10, false, "max=" + sci(worst)};
}

std::vector<CheckLine> nonnegative_conditions(const CheckOptions& o, Rng& rng) {
  double worst_mass = -INFINITY;
  double worst_inner = INFINITY;
  double worst_row = -INFINITY;
  double view_dev = 0.0;
  bool c1 = true;
  bool c2 = true;
  for (std::size_t t = 0; t < o.trials; ++t) {
    const std::size_t n = 1 + rng.index(16);
    const std::size_t d = 1 + rng.index(8);
    const Matrix q = rho_rows(absolute(gaussian(rng, n, d)), o.fault);
    const Matrix k = rho_cols(absolute(gaussian(rng, n, d)), o.fault);
    const auto r1 = check_condition1(q, k);
    const auto r2 = check_condition2(q, k);
    c1 = c1 && r1.all_hold;
    c2 = c2 && r2.all_hold;
    worst_mass = std::max(worst_mass, r1.max_mass);
    worst_inner = std::min(worst_inner, r2.min_inner);
    const ProbabilityView view = probability_view(q, k);
    view_dev = std::max(view_dev, max_abs(subtract(view.attention, matmul_transposed(q, k))));
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = view.attention.row(i);
      worst_row = std::max(worst_row, std::accumulate(row.begin(), row.end(), 0.0));
    }
  }
  return {
      {"condition1.nonnegative", c1, false, "max_mass=" + sci(worst_mass)},
      {"condition2.nonnegative", c2, false, "min_inner=" + sci(worst_inner)},
      {"probability_view.equals_scores", view_dev <= 1e-12, false, "max_dev=" + sci(view_dev)},
      {"probability_view.row_mass", worst_row <= 1.0 + 1e-9, false, "max_row_sum=" + sci(worst_row)},
  };
}

CheckLine condition2_elu_rate(const CheckOptions& o, Rng& rng) {
  double violations = 0.0;
  for (std::size_t t = 0; t < o.trials; ++t) {
    const Matrix q = rho_rows(elu(gaussian(rng, 16, 8)), o.fault);
    const Matrix k = rho_cols(elu(gaussian(rng, 16, 8)), o.fault);
    violations += check_condition2(q, k).violation_fraction;
  }
  return {"condition2.elu_gaussian_violation_rate", true, true,
          "fraction=" + sci(violations / static_cast<double>(std::max<std::size_t>(o.trials, 1)))};
}

CheckLine associativity(const CheckOptions& o, Rng& rng) {
  double worst = 0.0;
  for (std::size_t t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.index(64);
    const std::size_t d = 1 + rng.index(16);
    const Matrix q = gaussian(rng, n, d);
    const Matrix k = gaussian(rng, n, d);
    const Matrix v = gaussian(rng, n, d);
    const Matrix fast = linrec_attention(q, k, v).output;
    const Matrix slow =
        matmul(matmul_transposed(rho_rows(elu(q), o.fault), rho_cols(elu(k), o.fault)), v);
    worst = std::max(worst, relative_error(fast, slow, 1e-300));
  }
  return {"linrec.associativity", worst < 1e-10, false, "max_rel=" + sci(worst)};
}

CheckLine standard_rows(Rng& rng) {
  double worst = 0.0;
  for (std::size_t t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.index(32);
    const std::size_t d = 1 + rng.index(16);
    const auto out = standard_attention(gaussian(rng, n, d), gaussian(rng, n, d),
                                        gaussian(rng, n, d), {}, true);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = out.scores->row(i);
      worst = std::max(worst, std::fabs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
    }
  }
  return {"standard.score_rows_sum_to_one", worst <= 1e-12, false, "max_dev=" + sci(worst)};
}

// Ranks by sorting candidate ids on (score desc, id asc).
std::size_t sorted_rank(const std::vector<double>& scores, ItemId target) {
  std::vector<ItemId> ids(scores.size());
  std::iota(ids.begin(), ids.end(), ItemId{1});
  std::stable_sort(ids.begin(), ids.end(),
                   [&](ItemId a, ItemId b) { return scores[a - 1] > scores[b - 1]; });
  return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), target) - ids.begin()) + 1;
}

CheckLine metrics_oracle(Rng& rng) {
  bool ok = true;
  for (std::size_t t = 0; t < 100; ++t) {
    const std::size_t users = 1 + rng.index(20);
    const std::size_t items = 2 + rng.index(30);
    std::vector<std::size_t> ranks;
    double recall = 0.0, mrr = 0.0, ndcg = 0.0;
    for (std::size_t u = 0; u < users; ++u) {
      std::vector<double> scores(items);
      for (double& s : scores) s = static_cast<double>(rng.index(5));  // frequent ties
      const auto target = static_cast<ItemId>(1 + rng.index(items));
      const std::size_t r = sorted_rank(scores, target);
      ok = ok && r == rank_of_target(scores, target);
      ranks.push_back(rank_of_target(scores, target));
      recall += r <= 10 ? 1.0 : 0.0;
      mrr += 1.0 / static_cast<double>(r);
      ndcg += r <= 10 ? 1.0 / std::log2(1.0 + static_cast<double>(r)) : 0.0;
    }
    const auto m = metrics_from_ranks(ranks, 10);
    const double u = static_cast<double>(users);
    ok = ok && std::fabs(m.recall - recall / u) < 1e-12 && std::fabs(m.mrr - mrr / u) < 1e-12 &&
         std::fabs(m.ndcg - ndcg / u) < 1e-12;
  }
  return {"metrics.sort_oracle", ok, false, "tables=100"};
}

std::vector<CheckLine> gradients(Rng& rng) {
  std::vector<CheckLine> lines;
  const auto add = [&](const GradCheckResult& r, const std::string& prefix) {
    lines.push_back({prefix + r.name, r.passed, false, "max_rel=" + sci(r.max_relative_error)});
  };
  for (OpKind op : differentiable_ops()) add(check_op_gradient(op, rng), "grad.op.");
  for (Mechanism m : {Mechanism::standard, Mechanism::linrec, Mechanism::softmax_twice})
    add(check_attention_gradient(m, rng), "grad.");
  for (Mechanism m : {Mechanism::standard, Mechanism::linrec}) {
    ModelGradCheckOptions opts;
    opts.mechanism = m;
    GradCheckResult worst{"model." + std::string(to_string(m)), 0, 0.0, true};
    for (const auto& r : check_model_gradient(opts, rng)) {
      ++worst.instances;
      worst.max_relative_error = std::max(worst.max_relative_error, r.max_relative_error);
      worst.passed = worst.passed && r.passed;
    }
    add(worst, "grad.");
  }
  return lines;
}

}  // namespace

std::vector<CheckLine> run_checks(const CheckOptions& options) {
  Rng rng(options.seed);
  std::vector<CheckLine> lines;
  lines.push_back(condition3_rows(options, rng));
  lines.push_back(condition3_cols(options, rng));
  for (auto& l : nonnegative_conditions(options, rng)) lines.push_back(std::move(l));
  lines.push_back(condition2_elu_rate(options, rng));
  lines.push_back(associativity(options, rng));
  lines.push_back(standard_rows(rng));
  lines.push_back(metrics_oracle(rng));
  for (auto& l : gradients(rng)) lines.push_back(std::move(l));
  return lines;
}

int cmd_check(const CheckOptions& options, std::ostream& out) {
  const auto lines = run_checks(options);
  std::size_t failed = 0;
  for (const auto& l : lines) {
    const char* tag = l.informational ? "INFO" : (l.passed ? "PASS" : "FAIL");
    if (!l.informational && !l.passed) ++failed;
    out << tag << ' ' << l.name << ' ' << l.detail << '\n';
  }
  out << "summary: " << lines.size() - failed << " ok, " << failed << " failed (seed "
      << options.seed << ", trials " << options.trials << ")\n";
  return failed == 0 ? kExitOk : kExitCheckFailed;
}

}  // namespace linrec::cli
