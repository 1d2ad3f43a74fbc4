// SPDX-License-Identifier: Apache-2.0

#include "linrec/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "linrec/recommender.h"
#include "linrec/transformer.h"

namespace linrec {
namespace {

using Builder = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

struct Instance {
  std::vector<Matrix> inputs;
  Builder build;
};

Matrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -2.0,
                      double hi = 2.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

std::size_t dim(Rng& rng, std::size_t lo = 1, std::size_t hi = 8) {
  return lo + rng.index(hi - lo + 1);
}

// loss = sum(weights .* op(inputs))
double weighted_loss(Tape& tape, const Instance& inst, const std::vector<NodeId>& ids,
                     const Matrix& weights, NodeId* loss_out) {
  NodeId out = inst.build(tape, ids);
  NodeId loss = tape.sum(tape.hadamard(out, tape.constant(weights)));
  if (loss_out != nullptr) *loss_out = loss;
  return tape.value(loss)(0, 0);
}

double check_instance(const Instance& inst, Rng& rng) {
  Matrix weights(1, 1);
  {
    Tape probe;
    std::vector<NodeId> ids;
    for (const Matrix& m : inst.inputs) ids.push_back(probe.constant(m));
    const Matrix& out = probe.value(inst.build(probe, ids));
    weights = uniform_matrix(rng, out.rows(), out.cols(), -1.0, 1.0);
  }

  Tape tape;
  std::vector<NodeId> ids;
  for (const Matrix& m : inst.inputs) ids.push_back(tape.leaf(m));
  NodeId loss{};
  weighted_loss(tape, inst, ids, weights, &loss);
  const Gradients grads = tape.backward(loss);

  double worst = 0.0;
  for (std::size_t k = 0; k < inst.inputs.size(); ++k) {
    const auto fn = [&](const Matrix& x) {
      Tape t;
      std::vector<NodeId> local;
      for (std::size_t j = 0; j < inst.inputs.size(); ++j)
        local.push_back(t.constant(j == k ? x : inst.inputs[j]));
      return weighted_loss(t, inst, local, weights, nullptr);
    };
    const Matrix numeric = finite_diff(fn, inst.inputs[k]);
    const Matrix& in = inst.inputs[k];
    const Matrix analytic = grads.has(ids[k]) ? grads[ids[k]] : Matrix(in.rows(), in.cols());
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

Instance make_instance(OpKind op, Rng& rng) {
  const std::size_t r = dim(rng);
  const std::size_t c = dim(rng);
  Instance inst;
  switch (op) {
    case OpKind::matmul: {
      const std::size_t k = dim(rng);
      inst.inputs = {uniform_matrix(rng, r, k), uniform_matrix(rng, k, c)};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) { return t.matmul(x[0], x[1]); };
      break;
    }
    case OpKind::matmul_transposed: {
      const std::size_t k = dim(rng);
      inst.inputs = {uniform_matrix(rng, r, k), uniform_matrix(rng, c, k)};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) {
        return t.matmul_transposed(x[0], x[1]);
      };
      break;
    }
    case OpKind::add:
      inst.inputs = {uniform_matrix(rng, r, c), uniform_matrix(rng, r, c)};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) { return t.add(x[0], x[1]); };
      break;
    case OpKind::add_row:
      inst.inputs = {uniform_matrix(rng, r, c), uniform_matrix(rng, 1, c)};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) { return t.add_row(x[0], x[1]); };
      break;
    case OpKind::scale: {
      const double factor = rng.uniform(-2.0, 2.0);
      inst.inputs = {uniform_matrix(rng, r, c)};
      inst.build = [factor](Tape& t, const std::vector<NodeId>& x) { return t.scale(x[0], factor); };
      break;
    }
    case OpKind::hadamard:
      inst.inputs = {uniform_matrix(rng, r, c), uniform_matrix(rng, r, c)};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) { return t.hadamard(x[0], x[1]); };
      break;
    case OpKind::transpose:
      inst.inputs = {uniform_matrix(rng, r, c)};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) { return t.transpose(x[0]); };
      break;
    case OpKind::concat_cols:
      inst.inputs = {uniform_matrix(rng, r, c), uniform_matrix(rng, r, dim(rng)),
                     uniform_matrix(rng, r, dim(rng))};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) { return t.concat_cols(x); };
      break;
    case OpKind::concat_rows:
      inst.inputs = {uniform_matrix(rng, r, c), uniform_matrix(rng, dim(rng), c)};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) { return t.concat_rows(x); };
      break;
    case OpKind::select_rows: {
      std::vector<std::size_t> rows(dim(rng));
      for (auto& i : rows) i = rng.index(r);  // repeats exercise scatter-add
      inst.inputs = {uniform_matrix(rng, r, c)};
      inst.build = [rows](Tape& t, const std::vector<NodeId>& x) { return t.select_rows(x[0], rows); };
      break;
    }
    case OpKind::mask_rows: {
      std::vector<std::uint8_t> mask(r);
      for (auto& m : mask) m = static_cast<std::uint8_t>(rng.index(2));
      inst.inputs = {uniform_matrix(rng, r, c)};
      inst.build = [mask](Tape& t, const std::vector<NodeId>& x) { return t.mask_rows(x[0], mask); };
      break;
    }
    case OpKind::softmax_rows: {
      std::vector<std::uint8_t> mask(c, 1);
      for (auto& m : mask) m = static_cast<std::uint8_t>(rng.index(4) != 0);
      mask[rng.index(c)] = 1;
      inst.inputs = {uniform_matrix(rng, r, c)};
      inst.build = [mask](Tape& t, const std::vector<NodeId>& x) { return t.softmax_rows(x[0], mask); };
      break;
    }
    case OpKind::elu:
      inst.inputs = {uniform_matrix(rng, r, c)};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) { return t.elu(x[0]); };
      break;
    case OpKind::gelu:
      inst.inputs = {uniform_matrix(rng, r, c)};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) { return t.gelu(x[0]); };
      break;
    case OpKind::l2_normalize_rows:
      inst.inputs = {uniform_matrix(rng, r, c)};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) { return t.l2_normalize_rows(x[0]); };
      break;
    case OpKind::l2_normalize_cols:
      inst.inputs = {uniform_matrix(rng, r, c)};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) { return t.l2_normalize_cols(x[0]); };
      break;
    case OpKind::layer_norm: {
      // A two-wide row normalizes to (+-1, -+1) whatever x is, so its x-gradient
      // is pure rounding noise; start at three columns.
      const std::size_t w = dim(rng, 3, 8);
      inst.inputs = {uniform_matrix(rng, r, w), uniform_matrix(rng, 1, w), uniform_matrix(rng, 1, w)};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) {
        return t.layer_norm(x[0], x[1], x[2], 1e-12);
      };
      break;
    }
    case OpKind::dropout: {
      const std::uint64_t seed = rng.engine()();
      inst.inputs = {uniform_matrix(rng, r, c)};
      inst.build = [seed](Tape& t, const std::vector<NodeId>& x) {
        Rng local(seed);  // same mask on every evaluation
        return t.dropout(x[0], 0.3, local);
      };
      break;
    }
    case OpKind::cross_entropy: {
      const std::size_t cols = dim(rng, 2, 8);
      std::vector<std::uint8_t> candidates(cols, 1);
      candidates[0] = 0;
      std::vector<std::size_t> targets(r);
      for (auto& tgt : targets) tgt = 1 + rng.index(cols - 1);
      inst.inputs = {uniform_matrix(rng, r, cols)};
      inst.build = [targets, candidates](Tape& t, const std::vector<NodeId>& x) {
        return t.cross_entropy(x[0], targets, candidates);
      };
      break;
    }
    case OpKind::sum:
      inst.inputs = {uniform_matrix(rng, r, c)};
      inst.build = [](Tape& t, const std::vector<NodeId>& x) { return t.sum(x[0]); };
      break;
    case OpKind::leaf:
      throw std::invalid_argument("check_op_gradient: leaf has no adjoint");
  }
  return inst;
}

}  // namespace

std::vector<OpKind> differentiable_ops() {
  std::vector<OpKind> ops;
  for (std::size_t i = 1; i < kOpKindCount; ++i) ops.push_back(static_cast<OpKind>(i));
  return ops;
}

GradCheckResult check_op_gradient(OpKind op, Rng& rng, std::size_t instances, double tolerance) {
  GradCheckResult result{std::string(op_name(op)), instances, 0.0, false};
  for (std::size_t i = 0; i < instances; ++i)
    result.max_relative_error = std::max(result.max_relative_error,
                                         check_instance(make_instance(op, rng), rng));
  result.passed = result.max_relative_error < tolerance;
  return result;
}

GradCheckResult check_attention_gradient(Mechanism mechanism, Rng& rng, std::size_t instances,
                                         double tolerance) {
  GradCheckResult result{"attention." + std::string(to_string(mechanism)), instances, 0.0, false};
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n = dim(rng, 2, 8);
    const std::size_t d = dim(rng, 1, 6);
    Instance inst;
    inst.inputs = {uniform_matrix(rng, n, d), uniform_matrix(rng, n, d), uniform_matrix(rng, n, d)};
    ModelConfig cfg;
    cfg.mechanism = mechanism;
    cfg.mask_policy = MaskPolicy::none;
    inst.build = [cfg](Tape& t, const std::vector<NodeId>& x) {
      return attention_head(t, x[0], x[1], x[2], cfg, {});
    };
    result.max_relative_error = std::max(result.max_relative_error, check_instance(inst, rng));
  }
  result.passed = result.max_relative_error < tolerance;
  return result;
}

std::vector<GradCheckResult> check_model_gradient(const ModelGradCheckOptions& options, Rng& rng) {
  ModelConfig cfg;
  cfg.mechanism = options.mechanism;
  cfg.n_items = options.n_items;
  cfg.max_len = options.max_len;
  cfg.hidden = options.hidden;
  cfg.heads = options.heads;
  cfg.layers = options.layers;
  cfg.inner = options.inner;
  cfg.dropout = options.dropout;
  cfg.init_std = 0.5;
  ModelParams params = init_params(cfg, rng);
  // Move norm gains/biases off their identity init so their adjoints matter.
  for (auto& layer : params.layers) {
    for (Matrix* m : {&layer.ln1_gain, &layer.ln1_bias, &layer.ln2_gain, &layer.ln2_bias,
                      &layer.ffn_b1, &layer.ffn_b2}) {
      for (double& v : m->data()) v += rng.uniform(-0.5, 0.5);
    }
  }
  for (double& v : params.b_final.data()) v = rng.uniform(-0.5, 0.5);

  std::vector<Example> examples;
  for (std::size_t b = 0; b < options.batch; ++b) {
    const std::size_t len = 1 + rng.index(options.max_len);
    Example e;
    e.user = b + 1;
    for (std::size_t t = 0; t < len; ++t)
      e.history.push_back(static_cast<ItemId>(1 + rng.index(options.n_items)));
    e.target = static_cast<ItemId>(1 + rng.index(options.n_items));
    examples.push_back(std::move(e));
  }
  const SequenceBatch batch = make_batch(examples, options.max_len);
  const std::uint64_t dropout_seed = rng.engine()();

  Rng analytic_rng(dropout_seed);
  const std::vector<Matrix> analytic =
      batch_gradients(params, batch, cfg, Mode::train, analytic_rng);

  std::vector<GradCheckResult> results;
  auto named = params.named();
  for (std::size_t p = 0; p < named.size(); ++p) {
    Matrix* slot = named[p].second;
    const Matrix original = *slot;
    const auto fn = [&](const Matrix& x) {
      *slot = x;
      Tape tape;
      const ParamNodes nodes = bind_params(tape, params, false);
      Rng local(dropout_seed);
      const double loss = tape.value(batch_loss(tape, nodes, batch, cfg, Mode::train, local))(0, 0);
      *slot = original;
      return loss;
    };
    const Matrix numeric = finite_diff(fn, original);
    GradCheckResult r{named[p].first, 1, relative_error(analytic[p], numeric), false};
    r.passed = r.max_relative_error < options.tolerance;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace linrec
