// SPDX-License-Identifier: Apache-2.0

#include "linrec/autograd.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace linrec {
namespace {

constexpr std::array<std::string_view, kOpKindCount> kOpNames = {
    "leaf",        "matmul",       "matmul_transposed", "add",
    "add_row",     "scale",        "hadamard",          "transpose",
    "concat_cols", "concat_rows",  "select_rows",       "mask_rows",
    "softmax_rows", "elu",         "gelu",              "l2_normalize_rows",
    "l2_normalize_cols", "layer_norm", "dropout",       "cross_entropy",
    "sum",
};

// -1 marks variadic ops.
constexpr std::array<int, kOpKindCount> kArity = {
    0, 2, 2, 2, 2, 1, 2, 1, -1, -1, 1, 1, 1, 1, 1, 1, 1, 3, 1, 1, 1,
};

void add_into(std::optional<Matrix>& slot, const Matrix& grad) {
  if (!slot) {
    slot = grad;
    return;
  }
  auto dst = slot->data();
  auto src = grad.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

double standard_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double standard_normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }

// Shared forward for cross_entropy so record() and the typed op agree.
Matrix cross_entropy_forward(const Matrix& logits, const OpAttrs& attrs,
                             Matrix* probabilities = nullptr) {
  const Matrix probs = softmax_rows(logits, attrs.mask);
  const double cap = -std::log(kProbabilityFloor);
  double total = 0.0;
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    const std::size_t t = attrs.indices[b];
    const double p = probs(b, t);
    total += p > kProbabilityFloor ? std::min(-std::log(p), cap) : cap;
  }
  if (probabilities != nullptr) *probabilities = probs;
  return Matrix(1, 1, total / static_cast<double>(logits.rows()));
}

void validate_cross_entropy(const Matrix& logits, const OpAttrs& attrs) {
  if (attrs.indices.size() != logits.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(attrs.indices.size()) +
                     " targets for " + std::to_string(logits.rows()) + " rows");
  }
  if (!attrs.mask.empty() && attrs.mask.size() != logits.cols()) {
    throw ShapeError("cross_entropy: candidate mask length mismatch");
  }
  for (std::size_t t : attrs.indices) {
    if (t >= logits.cols()) throw std::out_of_range("cross_entropy: target out of range");
    if (!attrs.mask.empty() && attrs.mask[t] == 0) {
      throw std::invalid_argument("cross_entropy: target " + std::to_string(t) +
                                  " is not a candidate");
    }
  }
}

}  // namespace

std::string_view op_name(OpKind op) {
  const auto i = static_cast<std::size_t>(op);
  return i < kOpNames.size() ? kOpNames[i] : "unknown";
}

const Matrix& Gradients::operator[](NodeId id) const {
  if (!has(id)) {
    throw std::out_of_range("no gradient recorded for node " + std::to_string(id.index));
  }
  return *grads_[id.index];
}

NodeId Tape::leaf(Matrix value) {
  nodes_.push_back(Node{OpKind::leaf, {}, std::move(value), {}, true});
  return NodeId{nodes_.size() - 1};
}

NodeId Tape::constant(Matrix value) {
  nodes_.push_back(Node{OpKind::leaf, {}, std::move(value), {}, false});
  return NodeId{nodes_.size() - 1};
}

void Tape::check_id(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw std::out_of_range("node " + std::to_string(id.index) + " is not on the tape (size " +
                            std::to_string(nodes_.size()) + ")");
  }
}

const Matrix& Tape::value(NodeId id) const {
  check_id(id);
  return nodes_[id.index].value;
}

void Tape::rewind(std::size_t size) {
  if (size > nodes_.size()) throw std::out_of_range("rewind: tape is shorter than requested size");
  nodes_.erase(nodes_.begin() + static_cast<std::ptrdiff_t>(size), nodes_.end());
  differentiated_ = false;
}

bool Tape::requires_grad(NodeId id) const {
  check_id(id);
  return nodes_[id.index].requires_grad;
}

NodeId Tape::push(OpKind op, std::vector<NodeId> inputs, Matrix value, OpAttrs attrs) {
  bool needs = false;
  for (NodeId in : inputs) needs = needs || nodes_[in.index].requires_grad;
  nodes_.push_back(Node{op, std::move(inputs), std::move(value), std::move(attrs), needs});
  return NodeId{nodes_.size() - 1};
}

NodeId Tape::record(OpKind op, std::vector<NodeId> inputs, Matrix value, OpAttrs attrs) {
  const auto kind = static_cast<std::size_t>(op);
  if (kind >= kOpKindCount) {
    throw std::invalid_argument("record: unknown op kind " + std::to_string(kind));
  }
  if (op == OpKind::leaf) throw std::invalid_argument("record: use leaf() or constant()");
  const int arity = kArity[kind];
  if ((arity >= 0 && inputs.size() != static_cast<std::size_t>(arity)) ||
      (arity < 0 && inputs.empty())) {
    throw std::invalid_argument("record: " + std::string(op_name(op)) + " got " +
                                std::to_string(inputs.size()) + " inputs");
  }
  for (NodeId in : inputs) check_id(in);

  const Matrix& a = nodes_[inputs[0].index].value;
  std::size_t rows = a.rows();
  std::size_t cols = a.cols();
  switch (op) {
    case OpKind::matmul: {
      const Matrix& b = nodes_[inputs[1].index].value;
      if (a.cols() != b.rows()) throw ShapeError("record matmul: inner dimensions differ");
      cols = b.cols();
      break;
    }
    case OpKind::matmul_transposed: {
      const Matrix& b = nodes_[inputs[1].index].value;
      if (a.cols() != b.cols()) throw ShapeError("record matmul_transposed: inner dims differ");
      cols = b.rows();
      break;
    }
    case OpKind::add:
    case OpKind::hadamard:
      if (!a.same_shape(nodes_[inputs[1].index].value)) throw ShapeError("record: shape mismatch");
      break;
    case OpKind::add_row: {
      const Matrix& r = nodes_[inputs[1].index].value;
      if (r.rows() != 1 || r.cols() != a.cols()) throw ShapeError("record add_row: bad row");
      break;
    }
    case OpKind::transpose:
      std::swap(rows, cols);
      break;
    case OpKind::concat_cols:
      cols = 0;
      for (NodeId in : inputs) {
        if (nodes_[in.index].value.rows() != rows) throw ShapeError("record concat_cols: rows");
        cols += nodes_[in.index].value.cols();
      }
      break;
    case OpKind::concat_rows:
      rows = 0;
      for (NodeId in : inputs) {
        if (nodes_[in.index].value.cols() != cols) throw ShapeError("record concat_rows: cols");
        rows += nodes_[in.index].value.rows();
      }
      break;
    case OpKind::select_rows:
      for (std::size_t r : attrs.indices)
        if (r >= a.rows()) throw std::out_of_range("record select_rows: row out of range");
      rows = attrs.indices.size();
      break;
    case OpKind::mask_rows:
      if (attrs.mask.size() != a.rows()) throw ShapeError("record mask_rows: mask length");
      break;
    case OpKind::layer_norm: {
      const Matrix& g = nodes_[inputs[1].index].value;
      const Matrix& b = nodes_[inputs[2].index].value;
      if (g.rows() != 1 || g.cols() != a.cols() || !g.same_shape(b))
        throw ShapeError("record layer_norm: gain/bias shape");
      break;
    }
    case OpKind::dropout:
      if (!attrs.saved || !attrs.saved->same_shape(a))
        throw std::invalid_argument("record dropout: saved mask missing or misshaped");
      break;
    case OpKind::cross_entropy:
      validate_cross_entropy(a, attrs);
      rows = cols = 1;
      break;
    case OpKind::sum:
      rows = cols = 1;
      break;
    default:
      break;
  }
  if (value.rows() != rows || value.cols() != cols) {
    throw ShapeError("record " + std::string(op_name(op)) + ": value is " +
                     value.shape_string() + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  return push(op, std::move(inputs), std::move(value), std::move(attrs));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  return record(OpKind::matmul, {a, b}, linrec::matmul(value(a), value(b)));
}

NodeId Tape::matmul_transposed(NodeId a, NodeId b) {
  return record(OpKind::matmul_transposed, {a, b}, linrec::matmul_transposed(value(a), value(b)));
}

NodeId Tape::add(NodeId a, NodeId b) {
  return record(OpKind::add, {a, b}, linrec::add(value(a), value(b)));
}

NodeId Tape::add_row(NodeId x, NodeId row) {
  return record(OpKind::add_row, {x, row}, linrec::add_row(value(x), value(row)));
}

NodeId Tape::scale(NodeId x, double factor) {
  OpAttrs attrs;
  attrs.scalar = factor;
  return record(OpKind::scale, {x}, linrec::scale(value(x), factor), std::move(attrs));
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
  return record(OpKind::hadamard, {a, b}, linrec::hadamard(value(a), value(b)));
}

NodeId Tape::transpose(NodeId x) {
  return record(OpKind::transpose, {x}, linrec::transpose(value(x)));
}

NodeId Tape::concat_cols(std::span<const NodeId> parts) {
  std::vector<Matrix> values;
  values.reserve(parts.size());
  for (NodeId p : parts) values.push_back(value(p));
  return record(OpKind::concat_cols, {parts.begin(), parts.end()}, linrec::concat_cols(values));
}

NodeId Tape::concat_rows(std::span<const NodeId> parts) {
  std::vector<Matrix> values;
  values.reserve(parts.size());
  for (NodeId p : parts) values.push_back(value(p));
  return record(OpKind::concat_rows, {parts.begin(), parts.end()}, linrec::concat_rows(values));
}

NodeId Tape::select_rows(NodeId x, std::vector<std::size_t> rows) {
  const Matrix& src = value(x);
  if (rows.empty()) throw ShapeError("select_rows: no rows requested");
  Matrix out(rows.size(), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= src.rows()) {
      throw std::out_of_range("select_rows: row " + std::to_string(rows[i]) + " >= " +
                              std::to_string(src.rows()));
    }
    std::copy(src.row(rows[i]).begin(), src.row(rows[i]).end(), out.row(i).begin());
  }
  OpAttrs attrs;
  attrs.indices = std::move(rows);
  return record(OpKind::select_rows, {x}, std::move(out), std::move(attrs));
}

NodeId Tape::mask_rows(NodeId x, std::vector<std::uint8_t> row_mask) {
  Matrix out = value(x);
  if (row_mask.size() != out.rows()) throw ShapeError("mask_rows: mask length mismatch");
  for (std::size_t i = 0; i < out.rows(); ++i)
    if (row_mask[i] == 0) std::fill(out.row(i).begin(), out.row(i).end(), 0.0);
  OpAttrs attrs;
  attrs.mask = std::move(row_mask);
  return record(OpKind::mask_rows, {x}, std::move(out), std::move(attrs));
}

NodeId Tape::softmax_rows(NodeId x, std::vector<std::uint8_t> column_mask) {
  Matrix out = linrec::softmax_rows(value(x), column_mask);
  OpAttrs attrs;
  attrs.mask = std::move(column_mask);
  return record(OpKind::softmax_rows, {x}, std::move(out), std::move(attrs));
}

NodeId Tape::elu(NodeId x) { return record(OpKind::elu, {x}, linrec::elu(value(x))); }

NodeId Tape::gelu(NodeId x) { return record(OpKind::gelu, {x}, linrec::gelu(value(x))); }

NodeId Tape::l2_normalize_rows(NodeId x, double epsilon) {
  const Matrix& v = value(x);
  OpAttrs attrs;
  attrs.scalar = epsilon;
  return record(OpKind::l2_normalize_rows, {x}, linrec::l2_normalize_rows(v, v.cols(), epsilon),
                std::move(attrs));
}

NodeId Tape::l2_normalize_cols(NodeId x, double epsilon) {
  const Matrix& v = value(x);
  OpAttrs attrs;
  attrs.scalar = epsilon;
  return record(OpKind::l2_normalize_cols, {x}, linrec::l2_normalize_cols(v, v.rows(), epsilon),
                std::move(attrs));
}

NodeId Tape::layer_norm(NodeId x, NodeId gain, NodeId bias, double epsilon) {
  OpAttrs attrs;
  attrs.scalar = epsilon;
  return record(OpKind::layer_norm, {x, gain, bias},
                linrec::layer_norm(value(x), value(gain), value(bias), epsilon), std::move(attrs));
}

NodeId Tape::dropout(NodeId x, double rate, Rng& rng) {
  const Matrix& v = value(x);
  OpAttrs attrs;
  attrs.saved = dropout_mask(rng, v.rows(), v.cols(), rate);
  Matrix out = linrec::hadamard(v, *attrs.saved);
  return record(OpKind::dropout, {x}, std::move(out), std::move(attrs));
}

NodeId Tape::cross_entropy(NodeId logits, std::vector<std::size_t> targets,
                           std::vector<std::uint8_t> candidates) {
  OpAttrs attrs;
  attrs.indices = std::move(targets);
  attrs.mask = std::move(candidates);
  validate_cross_entropy(value(logits), attrs);
  Matrix loss = cross_entropy_forward(value(logits), attrs);
  return record(OpKind::cross_entropy, {logits}, std::move(loss), std::move(attrs));
}

NodeId Tape::sum(NodeId x) { return record(OpKind::sum, {x}, Matrix(1, 1, linrec::sum(value(x)))); }

Gradients Tape::backward(NodeId loss) {
  check_id(loss);
  if (differentiated_) throw std::logic_error("backward: tape has already been differentiated");
  const Matrix& lv = nodes_[loss.index].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + lv.shape_string());
  }
  differentiated_ = true;

  std::vector<std::optional<Matrix>> grads(nodes_.size());
  grads[loss.index] = Matrix(1, 1, 1.0);
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!grads[i] || node.op == OpKind::leaf) continue;
    if (!node.requires_grad) continue;
    accumulate_adjoints(node, *grads[i], grads);
    // Interior gradients are not part of the result.
    if (i != loss.index) grads[i].reset();
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op != OpKind::leaf || !nodes_[i].requires_grad) grads[i].reset();
  }
  return Gradients(std::move(grads));
}

void Tape::accumulate_adjoints(const Node& node, const Matrix& g,
                               std::vector<std::optional<Matrix>>& grads) const {
  const auto in = [&](std::size_t k) -> const Matrix& { return nodes_[node.inputs[k].index].value; };
  const auto wants = [&](std::size_t k) { return nodes_[node.inputs[k].index].requires_grad; };
  const auto give = [&](std::size_t k, const Matrix& m) {
    if (wants(k)) add_into(grads[node.inputs[k].index], m);
  };
  const Matrix& y = node.value;

  switch (node.op) {
    case OpKind::leaf:
      break;
    case OpKind::matmul:
      if (wants(0)) give(0, linrec::matmul_transposed(g, in(1)));
      if (wants(1)) give(1, linrec::matmul_transposed_lhs(in(0), g));
      break;
    case OpKind::matmul_transposed:
      if (wants(0)) give(0, linrec::matmul(g, in(1)));
      if (wants(1)) give(1, linrec::matmul_transposed_lhs(g, in(0)));
      break;
    case OpKind::add:
      give(0, g);
      give(1, g);
      break;
    case OpKind::add_row: {
      give(0, g);
      if (wants(1)) {
        Matrix row(1, g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) row(0, j) += g(i, j);
        give(1, row);
      }
      break;
    }
    case OpKind::scale:
      give(0, linrec::scale(g, node.attrs.scalar));
      break;
    case OpKind::hadamard:
      if (wants(0)) give(0, linrec::hadamard(g, in(1)));
      if (wants(1)) give(1, linrec::hadamard(g, in(0)));
      break;
    case OpKind::transpose:
      give(0, linrec::transpose(g));
      break;
    case OpKind::concat_cols: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const std::size_t w = in(k).cols();
        if (wants(k)) give(k, slice_cols(g, offset, w));
        offset += w;
      }
      break;
    }
    case OpKind::concat_rows: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const std::size_t h = in(k).rows();
        if (wants(k)) give(k, slice_rows(g, offset, h));
        offset += h;
      }
      break;
    }
    case OpKind::select_rows: {
      Matrix dx(in(0).rows(), in(0).cols());
      for (std::size_t i = 0; i < node.attrs.indices.size(); ++i) {
        auto dst = dx.row(node.attrs.indices[i]);
        auto src = g.row(i);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
      give(0, dx);
      break;
    }
    case OpKind::mask_rows: {
      Matrix dx = g;
      for (std::size_t i = 0; i < dx.rows(); ++i)
        if (node.attrs.mask[i] == 0) std::fill(dx.row(i).begin(), dx.row(i).end(), 0.0);
      give(0, dx);
      break;
    }
    case OpKind::softmax_rows: {
      Matrix dx(y.rows(), y.cols());
      for (std::size_t i = 0; i < y.rows(); ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
        for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) = y(i, j) * (g(i, j) - dot);
      }
      give(0, dx);
      break;
    }
    case OpKind::elu: {
      Matrix dx = g;
      const Matrix& x = in(0);
      auto d = dx.data();
      auto xs = x.data();
      for (std::size_t i = 0; i < d.size(); ++i)
        if (xs[i] < 0.0) d[i] *= std::exp(xs[i]);
      give(0, dx);
      break;
    }
    case OpKind::gelu: {
      Matrix dx = g;
      auto d = dx.data();
      auto xs = in(0).data();
      for (std::size_t i = 0; i < d.size(); ++i)
        d[i] *= standard_normal_cdf(xs[i]) + xs[i] * standard_normal_pdf(xs[i]);
      give(0, dx);
      break;
    }
    case OpKind::l2_normalize_rows: {
      const Matrix& x = in(0);
      const double root = std::sqrt(static_cast<double>(x.cols()));
      const double eps = node.attrs.scalar;
      Matrix dx(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i) {
        double sq = 0.0;
        for (double v : x.row(i)) sq += v * v;
        const double norm = std::sqrt(sq);
        if (norm > eps) {
          // d(x/|x|) = (I - x x^T/|x|^2) / |x|
          double dot = 0.0;
          for (std::size_t j = 0; j < x.cols(); ++j) dot += x(i, j) * g(i, j);
          for (std::size_t j = 0; j < x.cols(); ++j)
            dx(i, j) = (g(i, j) - x(i, j) * dot / sq) / (root * norm);
        } else {
          for (std::size_t j = 0; j < x.cols(); ++j) dx(i, j) = g(i, j) / (root * eps);
        }
      }
      give(0, dx);
      break;
    }
    case OpKind::l2_normalize_cols: {
      const Matrix& x = in(0);
      const double root = std::sqrt(static_cast<double>(x.rows()));
      const double eps = node.attrs.scalar;
      std::vector<double> sq(x.cols(), 0.0);
      std::vector<double> dot(x.cols(), 0.0);
      for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
          sq[j] += x(i, j) * x(i, j);
          dot[j] += x(i, j) * g(i, j);
        }
      }
      Matrix dx(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
          const double norm = std::sqrt(sq[j]);
          dx(i, j) = norm > eps ? (g(i, j) - x(i, j) * dot[j] / sq[j]) / (root * norm)
                                : g(i, j) / (root * eps);
        }
      }
      give(0, dx);
      break;
    }
    case OpKind::layer_norm: {
      const Matrix& x = in(0);
      const Matrix& gain = in(1);
      const double n = static_cast<double>(x.cols());
      const double eps = node.attrs.scalar;
      Matrix dx(x.rows(), x.cols());
      Matrix dgain(1, x.cols());
      Matrix dbias(1, x.cols());
      std::vector<double> xhat(x.cols());
      std::vector<double> dxhat(x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i) {
        double mean = 0.0;
        for (double v : x.row(i)) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : x.row(i)) var += (v - mean) * (v - mean);
        var /= n;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        double mean_dxhat = 0.0;
        double mean_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
          xhat[j] = (x(i, j) - mean) * inv_std;
          dxhat[j] = g(i, j) * gain(0, j);
          dgain(0, j) += g(i, j) * xhat[j];
          dbias(0, j) += g(i, j);
          mean_dxhat += dxhat[j];
          mean_dxhat_xhat += dxhat[j] * xhat[j];
        }
        mean_dxhat /= n;
        mean_dxhat_xhat /= n;
        for (std::size_t j = 0; j < x.cols(); ++j)
          dx(i, j) = inv_std * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
      }
      give(0, dx);
      give(1, dgain);
      give(2, dbias);
      break;
    }
    case OpKind::dropout:
      give(0, linrec::hadamard(g, *node.attrs.saved));
      break;
    case OpKind::cross_entropy: {
      const Matrix& logits = in(0);
      Matrix probs(1, 1);
      cross_entropy_forward(logits, node.attrs, &probs);
      const double upstream = g(0, 0) / static_cast<double>(logits.rows());
      Matrix dx(logits.rows(), logits.cols());
      for (std::size_t b = 0; b < logits.rows(); ++b) {
        const std::size_t t = node.attrs.indices[b];
        if (!(probs(b, t) > kProbabilityFloor)) continue;  // capped: flat
        for (std::size_t j = 0; j < logits.cols(); ++j) dx(b, j) = upstream * probs(b, j);
        dx(b, t) -= upstream;
      }
      give(0, dx);
      break;
    }
    case OpKind::sum:
      give(0, Matrix(in(0).rows(), in(0).cols(), g(0, 0)));
      break;
  }
}

Matrix finite_diff(const std::function<double(const Matrix&)>& loss_fn, const Matrix& x,
                   double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff: step must be positive");
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  auto p = probe.data();
  auto out = grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double original = p[i];
    p[i] = original + h;
    const double up = loss_fn(probe);
    p[i] = original - h;
    const double down = loss_fn(probe);
    p[i] = original;
    out[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(const Matrix& a, const Matrix& b, double floor) {
  if (!a.same_shape(b)) throw ShapeError("relative_error: shape mismatch");
  const double scale = std::max(frobenius_norm(a), frobenius_norm(b));
  if (scale < floor) return 0.0;
  return frobenius_norm(subtract(a, b)) / scale;
}

}  // namespace linrec
