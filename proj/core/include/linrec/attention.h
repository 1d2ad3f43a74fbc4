// SPDX-License-Identifier: Apache-2.0
//
// Dot-product attention, L2-normalized linear attention (LinRec), the
// softmax-twice decomposition, and analysis helpers for the decomposed
// score matrix B' = rho1(Q) rho2(K)^T.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "linrec/matrix.h"

namespace linrec {

enum class Mechanism { standard, linrec, softmax_twice };
enum class MaskPolicy { none, padding_zero_rows };

std::string_view to_string(Mechanism m);
std::string_view to_string(MaskPolicy p);
Mechanism parse_mechanism(std::string_view text);
MaskPolicy parse_mask_policy(std::string_view text);

struct AttentionConfig {
  Mechanism mechanism = Mechanism::linrec;
  std::size_t seq_len = 1;  // padded length N
  std::size_t hidden = 1;   // d
  double epsilon = kNormEpsilon;
  MaskPolicy mask_policy = MaskPolicy::padding_zero_rows;

  /// N/d > 1.5 is treated as the long-sequence regime.
  bool long_term() const {
    return static_cast<double>(seq_len) > 1.5 * static_cast<double>(hidden);
  }
  void validate() const;
};

struct AttentionOutput {
  Matrix output;                 // N x d, same shape as V
  std::optional<Matrix> scores;  // N x N, only when requested
};

/// softmax(Q K^T / sqrt(d)) V. Keys whose `key_mask` entry is 0 get zero weight.
AttentionOutput standard_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                   std::span<const std::uint8_t> key_mask = {},
                                   bool want_scores = false);

/// rho1(elu(Q)) (rho2(elu(K))^T V). The fast path allocates a d x d
/// intermediate and nothing N x N unless `want_scores` is set.
AttentionOutput linrec_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                 double epsilon = kNormEpsilon, bool want_scores = false);

/// The materialized LinRec score matrix B' = rho1(elu(Q)) rho2(elu(K))^T.
Matrix linrec_scores(const Matrix& q, const Matrix& k, double epsilon = kNormEpsilon);

/// softmax_rows(Q) (softmax_cols(K)^T V), evaluated right to left.
AttentionOutput softmax_twice_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                        bool want_scores = false);

AttentionOutput attend(Mechanism mechanism, const Matrix& q, const Matrix& k, const Matrix& v,
                       double epsilon = kNormEpsilon, bool want_scores = false);

inline constexpr double kConditionTolerance = 1e-9;

// Row mass sum_m sum_j Qr_ij Kr_mj must not exceed 1.
struct Condition1Report {
  std::vector<double> row_mass;
  std::vector<std::uint8_t> holds;
  double max_mass = 0.0;
  bool all_hold = true;
};

// Pairwise inner products sum_j Qr_ij Kr_mj must be non-negative.
struct Condition2Report {
  double min_inner = 0.0;
  std::vector<std::uint8_t> pair_holds;  // N x N, row-major over (i, m)
  std::size_t violations = 0;
  double violation_fraction = 0.0;
  bool all_hold = true;
};

// Query rows and key columns each sum to at most 1.
struct Condition3Report {
  std::vector<double> query_row_sums;
  std::vector<double> key_col_sums;
  double max_row_sum = 0.0;
  double max_col_sum = 0.0;
  bool rows_hold = true;
  bool cols_hold = true;
  bool all_hold() const { return rows_hold && cols_hold; }
};

Condition1Report check_condition1(const Matrix& q_rho, const Matrix& k_rho,
                                  double tol = kConditionTolerance);
Condition2Report check_condition2(const Matrix& q_rho, const Matrix& k_rho,
                                  double tol = kConditionTolerance);
Condition3Report check_condition3(const Matrix& q_rho, const Matrix& k_rho,
                                  double tol = kConditionTolerance);

// Reads the normalized factors as probabilities: Pr(B_ij) = Qr_ij over d
// latent sub-events, Pr(A_ik | B_ij) = Kr_kj shared by every query row, and
// the marginal Pr(A_ik) = sum_j Qr_ij Kr_kj, which is the score matrix.
struct ProbabilityView {
  Matrix latent;       // N x d
  Matrix conditional;  // N x d, indexed (k, j)
  Matrix attention;    // N x N

  /// Pr(A_ik | B_ij) as seen from query row i; identical for every i.
  Matrix conditional_for_query(std::size_t i) const;
};

ProbabilityView probability_view(const Matrix& q_rho, const Matrix& k_rho);

/// Shannon entropy (nats) of a row after clamping negatives to 0 and
/// renormalizing; an all-zero row has entropy 0.
double row_entropy(std::span<const double> row);
std::vector<double> row_entropies(const Matrix& scores);

}  // namespace linrec
