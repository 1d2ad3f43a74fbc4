// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over the matrix op set. A Tape records each
// forward op with its inputs; backward() walks it once in reverse.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "linrec/matrix.h"

namespace linrec {

enum class OpKind : std::uint8_t {
  leaf,
  matmul,
  matmul_transposed,
  add,
  add_row,
  scale,
  hadamard,
  transpose,
  concat_cols,
  concat_rows,
  select_rows,
  mask_rows,
  softmax_rows,
  elu,
  gelu,
  l2_normalize_rows,
  l2_normalize_cols,
  layer_norm,
  dropout,
  cross_entropy,
  sum,
};

inline constexpr std::size_t kOpKindCount = static_cast<std::size_t>(OpKind::sum) + 1;

std::string_view op_name(OpKind op);

struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

/// Non-tensor arguments an op needs for its forward and adjoint.
struct OpAttrs {
  double scalar = 0.0;                  // scale factor or epsilon
  std::vector<std::size_t> indices;     // select_rows rows, cross_entropy targets
  std::vector<std::uint8_t> mask;       // row mask, softmax column mask, CE candidates
  std::optional<Matrix> saved;          // dropout mask
};

class Gradients {
 public:
  explicit Gradients(std::vector<std::optional<Matrix>> grads) : grads_(std::move(grads)) {}

  bool has(NodeId id) const { return id.index < grads_.size() && grads_[id.index].has_value(); }
  /// Gradient of the loss w.r.t. node `id`. Nodes the loss does not depend on
  /// have no entry; use has() first.
  const Matrix& operator[](NodeId id) const;

 private:
  std::vector<std::optional<Matrix>> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  NodeId leaf(Matrix value);
  NodeId constant(Matrix value);

  /// Appends a node computed elsewhere. The op kind, arity, input ids and
  /// output shape are validated against the op's shape rule.
  NodeId record(OpKind op, std::vector<NodeId> inputs, Matrix value, OpAttrs attrs = {});

  const Matrix& value(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  /// Drops every node recorded after the first `size` nodes, so bound
  /// parameters can be reused across forward passes.
  void rewind(std::size_t size);
  bool requires_grad(NodeId id) const;

  NodeId matmul(NodeId a, NodeId b);
  NodeId matmul_transposed(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId add_row(NodeId x, NodeId row);
  NodeId scale(NodeId x, double factor);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId transpose(NodeId x);
  NodeId concat_cols(std::span<const NodeId> parts);
  NodeId concat_rows(std::span<const NodeId> parts);
  NodeId select_rows(NodeId x, std::vector<std::size_t> rows);
  /// Zeroes rows whose mask entry is 0.
  NodeId mask_rows(NodeId x, std::vector<std::uint8_t> row_mask);
  NodeId softmax_rows(NodeId x, std::vector<std::uint8_t> column_mask = {});
  NodeId elu(NodeId x);
  NodeId gelu(NodeId x);
  /// Scale dimension is the column count, as in linrec::l2_normalize_rows.
  NodeId l2_normalize_rows(NodeId x, double epsilon = kNormEpsilon);
  /// Scale length is the row count, as in linrec::l2_normalize_cols.
  NodeId l2_normalize_cols(NodeId x, double epsilon = kNormEpsilon);
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double epsilon);
  NodeId dropout(NodeId x, double rate, Rng& rng);
  /// Mean over rows of -log softmax(logits)[target], restricted to columns
  /// whose candidate flag is set. Per-row loss is capped at -log(1e-12).
  NodeId cross_entropy(NodeId logits, std::vector<std::size_t> targets,
                       std::vector<std::uint8_t> candidates = {});
  NodeId sum(NodeId x);

  /// Gradients of a 1x1 node w.r.t. every node it depends on. A tape can be
  /// differentiated once; a second call throws std::logic_error.
  Gradients backward(NodeId loss);

 private:
  struct Node {
    OpKind op;
    std::vector<NodeId> inputs;
    Matrix value;
    OpAttrs attrs;
    bool requires_grad;
  };

  NodeId push(OpKind op, std::vector<NodeId> inputs, Matrix value, OpAttrs attrs);
  void check_id(NodeId id) const;
  void accumulate_adjoints(const Node& node, const Matrix& grad,
                           std::vector<std::optional<Matrix>>& grads) const;

  std::vector<Node> nodes_;
  bool differentiated_ = false;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Central-difference gradient of a scalar function, entry by entry.
Matrix finite_diff(const std::function<double(const Matrix&)>& loss_fn, const Matrix& x,
                   double h = 1e-5);

/// |a - b|_F / max(|a|_F, |b|_F); 0 when both vanish below `floor`.
double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-10);

}  // namespace linrec
