// SPDX-License-Identifier: Apache-2.0

#include "linrec/attention.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace linrec {
namespace {

void require_qkv(const Matrix& q, const Matrix& k, const Matrix& v, const char* op) {
  if (!q.same_shape(k) || k.rows() != v.rows()) {
    throw ShapeError(std::string(op) + ": expected Q, K of equal shape and V with matching rows, got Q " +
                     q.shape_string() + ", K " + k.shape_string() + ", V " + v.shape_string());
  }
}

void require_factors(const Matrix& q_rho, const Matrix& k_rho, const char* op) {
  if (q_rho.cols() != k_rho.cols()) {
    throw ShapeError(std::string(op) + ": factor widths differ, " + q_rho.shape_string() +
                     " vs " + k_rho.shape_string());
  }
}

}  // namespace

std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::standard:
      return "standard";
    case Mechanism::linrec:
      return "linrec";
    case Mechanism::softmax_twice:
      return "softmax_twice";
  }
  return "unknown";
}

std::string_view to_string(MaskPolicy p) {
  return p == MaskPolicy::none ? "none" : "padding_zero_rows";
}

Mechanism parse_mechanism(std::string_view text) {
  if (text == "standard") return Mechanism::standard;
  if (text == "linrec") return Mechanism::linrec;
  if (text == "softmax_twice" || text == "softmax-twice") return Mechanism::softmax_twice;
  throw std::invalid_argument("unknown mechanism '" + std::string(text) +
                              "' (expected standard, linrec or softmax_twice)");
}

MaskPolicy parse_mask_policy(std::string_view text) {
  if (text == "none") return MaskPolicy::none;
  if (text == "padding_zero_rows") return MaskPolicy::padding_zero_rows;
  throw std::invalid_argument("unknown mask policy '" + std::string(text) + "'");
}

void AttentionConfig::validate() const {
  if (seq_len < 1 || hidden < 1) throw std::invalid_argument("attention: N and d must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("attention: epsilon must be > 0");
}

AttentionOutput standard_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                   std::span<const std::uint8_t> key_mask, bool want_scores) {
  require_qkv(q, k, v, "standard_attention");
  Matrix logits = matmul_transposed(q, k);
  const double inv_root = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  for (double& x : logits.data()) x *= inv_root;
  Matrix scores = softmax_rows(logits, key_mask);
  AttentionOutput out{matmul(scores, v), std::nullopt};
  if (want_scores) out.scores = std::move(scores);
  return out;
}

AttentionOutput linrec_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                 double epsilon, bool want_scores) {
  require_qkv(q, k, v, "linrec_attention");
  const Matrix q_rho = l2_normalize_rows(elu(q), q.cols(), epsilon);
  const Matrix k_rho = l2_normalize_cols(elu(k), k.rows(), epsilon);
  const Matrix kv = matmul_transposed_lhs(k_rho, v);  // d x d
  AttentionOutput out{matmul(q_rho, kv), std::nullopt};
  if (want_scores) out.scores = matmul_transposed(q_rho, k_rho);
  return out;
}

Matrix linrec_scores(const Matrix& q, const Matrix& k, double epsilon) {
  if (!q.same_shape(k)) throw ShapeError("linrec_scores: Q and K shapes differ");
  return matmul_transposed(l2_normalize_rows(elu(q), q.cols(), epsilon),
                           l2_normalize_cols(elu(k), k.rows(), epsilon));
}

AttentionOutput softmax_twice_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                        bool want_scores) {
  require_qkv(q, k, v, "softmax_twice_attention");
  const Matrix q_rho = softmax_rows(q);
  const Matrix k_rho = softmax_cols(k);
  const Matrix kv = matmul_transposed_lhs(k_rho, v);
  AttentionOutput out{matmul(q_rho, kv), std::nullopt};
  if (want_scores) out.scores = matmul_transposed(q_rho, k_rho);
  return out;
}

AttentionOutput attend(Mechanism mechanism, const Matrix& q, const Matrix& k, const Matrix& v,
                       double epsilon, bool want_scores) {
  switch (mechanism) {
    case Mechanism::standard:
      return standard_attention(q, k, v, {}, want_scores);
    case Mechanism::linrec:
      return linrec_attention(q, k, v, epsilon, want_scores);
    case Mechanism::softmax_twice:
      return softmax_twice_attention(q, k, v, want_scores);
  }
  throw std::invalid_argument("attend: unknown mechanism");
}

Condition1Report check_condition1(const Matrix& q_rho, const Matrix& k_rho, double tol) {
  require_factors(q_rho, k_rho, "check_condition1");
  // sum_m sum_j Q_ij K_mj = sum_j Q_ij * colsum_j(K)
  std::vector<double> key_mass(k_rho.cols(), 0.0);
  for (std::size_t m = 0; m < k_rho.rows(); ++m)
    for (std::size_t j = 0; j < k_rho.cols(); ++j) key_mass[j] += k_rho(m, j);

  Condition1Report report;
  report.row_mass.resize(q_rho.rows());
  report.holds.resize(q_rho.rows());
  report.max_mass = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q_rho.rows(); ++i) {
    double mass = 0.0;
    for (std::size_t j = 0; j < q_rho.cols(); ++j) mass += q_rho(i, j) * key_mass[j];
    report.row_mass[i] = mass;
    report.holds[i] = mass <= 1.0 + tol;
    report.all_hold = report.all_hold && report.holds[i];
    report.max_mass = std::max(report.max_mass, mass);
  }
  return report;
}

Condition2Report check_condition2(const Matrix& q_rho, const Matrix& k_rho, double tol) {
  require_factors(q_rho, k_rho, "check_condition2");
  const Matrix inner = matmul_transposed(q_rho, k_rho);
  Condition2Report report;
  report.pair_holds.resize(inner.size());
  report.min_inner = std::numeric_limits<double>::infinity();
  auto values = inner.data();
  for (std::size_t p = 0; p < values.size(); ++p) {
    const bool ok = values[p] >= -tol;
    report.pair_holds[p] = ok;
    if (!ok) ++report.violations;
    report.min_inner = std::min(report.min_inner, values[p]);
  }
  report.all_hold = report.violations == 0;
  report.violation_fraction =
      static_cast<double>(report.violations) / static_cast<double>(values.size());
  return report;
}

Condition3Report check_condition3(const Matrix& q_rho, const Matrix& k_rho, double tol) {
  Condition3Report report;
  report.query_row_sums.assign(q_rho.rows(), 0.0);
  report.key_col_sums.assign(k_rho.cols(), 0.0);
  for (std::size_t i = 0; i < q_rho.rows(); ++i)
    for (double v : q_rho.row(i)) report.query_row_sums[i] += v;
  for (std::size_t m = 0; m < k_rho.rows(); ++m)
    for (std::size_t j = 0; j < k_rho.cols(); ++j) report.key_col_sums[j] += k_rho(m, j);
  report.max_row_sum =
      *std::max_element(report.query_row_sums.begin(), report.query_row_sums.end());
  report.max_col_sum = *std::max_element(report.key_col_sums.begin(), report.key_col_sums.end());
  report.rows_hold = report.max_row_sum <= 1.0 + tol;
  report.cols_hold = report.max_col_sum <= 1.0 + tol;
  return report;
}

Matrix ProbabilityView::conditional_for_query(std::size_t i) const {
  if (i >= latent.rows()) throw std::out_of_range("conditional_for_query: row out of range");
  return conditional;
}

ProbabilityView probability_view(const Matrix& q_rho, const Matrix& k_rho) {
  require_factors(q_rho, k_rho, "probability_view");
  return ProbabilityView{q_rho, k_rho, matmul_transposed(q_rho, k_rho)};
}

double row_entropy(std::span<const double> row) {
  double total = 0.0;
  for (double v : row) total += std::max(v, 0.0);
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (double v : row) {
    const double p = std::max(v, 0.0) / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::vector<double> row_entropies(const Matrix& scores) {
  std::vector<double> out(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) out[i] = row_entropy(scores.row(i));
  return out;
}

}  // namespace linrec
