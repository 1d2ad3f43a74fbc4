// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference verification of the tape's adjoint rules, per op and
// end to end through the recommender loss.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "linrec/attention.h"
#include "linrec/autograd.h"
#include "linrec/matrix.h"

namespace linrec {

struct GradCheckResult {
  std::string name;
  std::size_t instances = 0;
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Every op kind that has an adjoint (all but leaf).
std::vector<OpKind> differentiable_ops();

/// Random instances (sizes <= 8x8, entries in [-2, 2]) of one op; the loss is
/// a random weighting of its output.
GradCheckResult check_op_gradient(OpKind op, Rng& rng, std::size_t instances = 10,
                                  double tolerance = 1e-4);

/// One attention head (Q, K, V all trainable) under `mechanism`.
GradCheckResult check_attention_gradient(Mechanism mechanism, Rng& rng,
                                         std::size_t instances = 5, double tolerance = 1e-4);

struct ModelGradCheckOptions {
  Mechanism mechanism = Mechanism::linrec;
  std::size_t max_len = 12;
  std::size_t hidden = 8;
  std::size_t n_items = 20;
  std::size_t layers = 1;
  std::size_t heads = 2;
  std::size_t inner = 16;
  std::size_t batch = 3;
  double dropout = 0.2;
  double tolerance = 1e-3;
};

/// Full pipeline (embedding -> encoder -> scores -> loss) at toy scale; one
/// result per parameter tensor.
std::vector<GradCheckResult> check_model_gradient(const ModelGradCheckOptions& options, Rng& rng);

}  // namespace linrec
