// SPDX-License-Identifier: Apache-2.0

#include "linrec/transformer.h"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace linrec {
namespace {

std::vector<std::uint8_t> effective_mask(const std::vector<std::uint8_t>& real_mask,
                                         std::size_t rows) {
  if (real_mask.empty()) return std::vector<std::uint8_t>(rows, 1);
  if (real_mask.size() != rows) {
    throw ShapeError("mask length " + std::to_string(real_mask.size()) + " != " +
                     std::to_string(rows) + " rows");
  }
  return real_mask;
}

NodeId maybe_mask_rows(Tape& tape, NodeId x, const ModelConfig& cfg,
                       const std::vector<std::uint8_t>& mask) {
  if (cfg.mask_policy == MaskPolicy::none) return x;
  return tape.mask_rows(x, mask);
}

NodeId maybe_dropout(Tape& tape, NodeId x, double rate, Mode mode, Rng& rng) {
  if (mode == Mode::eval || rate == 0.0) return x;
  return tape.dropout(x, rate, rng);
}

}  // namespace

NodeId attention_head(Tape& tape, NodeId q, NodeId k, NodeId v, const ModelConfig& cfg,
                      const std::vector<std::uint8_t>& mask) {
  switch (cfg.mechanism) {
    case Mechanism::standard: {
      const double inv_root = 1.0 / std::sqrt(static_cast<double>(tape.value(q).cols()));
      NodeId logits = tape.scale(tape.matmul_transposed(q, k), inv_root);
      std::vector<std::uint8_t> key_mask;
      if (cfg.mask_policy == MaskPolicy::padding_zero_rows) key_mask = mask;
      return tape.matmul(tape.softmax_rows(logits, std::move(key_mask)), v);
    }
    case Mechanism::linrec: {
      NodeId q_rho = tape.l2_normalize_rows(tape.elu(q), cfg.epsilon);
      NodeId k_rho = tape.l2_normalize_cols(tape.elu(k), cfg.epsilon);
      NodeId kv = tape.matmul(tape.transpose(k_rho), v);  // d_h x d_h
      return tape.matmul(q_rho, kv);
    }
    case Mechanism::softmax_twice: {
      NodeId q_rho = tape.softmax_rows(q);
      NodeId k_rho_t = tape.softmax_rows(tape.transpose(k));  // column softmax, transposed
      return tape.matmul(q_rho, tape.matmul(k_rho_t, v));
    }
  }
  throw std::invalid_argument("unknown attention mechanism");
}

AttentionConfig ModelConfig::attention() const {
  return AttentionConfig{mechanism, max_len, head_dim(), epsilon, mask_policy};
}

std::vector<std::string> ModelConfig::problems() const {
  std::vector<std::string> out;
  if (n_items < 1) out.emplace_back("n_items must be >= 1");
  if (max_len < 1) out.emplace_back("max_len must be >= 1");
  if (hidden < 1) out.emplace_back("hidden must be >= 1");
  if (heads < 1) out.emplace_back("heads must be >= 1");
  else if (hidden % heads != 0) out.emplace_back("heads must divide hidden");
  if (layers < 1) out.emplace_back("layers must be >= 1");
  if (inner < 1) out.emplace_back("inner must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) out.emplace_back("dropout must be in [0, 1)");
  if (!(epsilon > 0.0)) out.emplace_back("epsilon must be > 0");
  if (!(layer_norm_epsilon > 0.0)) out.emplace_back("layer_norm_epsilon must be > 0");
  if (!(init_std > 0.0)) out.emplace_back("init_std must be > 0");
  return out;
}

void ModelConfig::validate() const {
  const auto issues = problems();
  if (issues.empty()) return;
  std::string msg = "invalid model config:";
  for (const auto& s : issues) msg += " " + s + ";";
  throw std::invalid_argument(msg);
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::named() {
  std::vector<std::pair<std::string, Matrix*>> out;
  out.emplace_back("embeddings.items", &embeddings.items);
  out.emplace_back("embeddings.positions", &embeddings.positions);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerParams& p = layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    for (std::size_t h = 0; h < p.w_q.size(); ++h) {
      const std::string head = prefix + "head" + std::to_string(h) + ".";
      out.emplace_back(head + "w_q", &p.w_q[h]);
      out.emplace_back(head + "w_k", &p.w_k[h]);
      out.emplace_back(head + "w_v", &p.w_v[h]);
    }
    out.emplace_back(prefix + "w_o", &p.w_o);
    out.emplace_back(prefix + "ffn_w1", &p.ffn_w1);
    out.emplace_back(prefix + "ffn_b1", &p.ffn_b1);
    out.emplace_back(prefix + "ffn_w2", &p.ffn_w2);
    out.emplace_back(prefix + "ffn_b2", &p.ffn_b2);
    out.emplace_back(prefix + "ln1_gain", &p.ln1_gain);
    out.emplace_back(prefix + "ln1_bias", &p.ln1_bias);
    out.emplace_back(prefix + "ln2_gain", &p.ln2_gain);
    out.emplace_back(prefix + "ln2_bias", &p.ln2_bias);
  }
  out.emplace_back("final.w", &w_final);
  out.emplace_back("final.b", &b_final);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::named() const {
  auto mutable_view = const_cast<ModelParams*>(this)->named();
  std::vector<std::pair<std::string, const Matrix*>> out;
  out.reserve(mutable_view.size());
  for (auto& [name, ptr] : mutable_view) out.emplace_back(std::move(name), ptr);
  return out;
}

ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.hidden;
  const std::size_t dh = cfg.head_dim();
  const double sd = cfg.init_std;
  ModelParams p;
  p.embeddings.items = gaussian_init(rng, cfg.n_items + 1, d, 0.0, sd);
  std::fill(p.embeddings.items.row(kPaddingId).begin(), p.embeddings.items.row(kPaddingId).end(),
            0.0);
  p.embeddings.positions = gaussian_init(rng, cfg.max_len, d, 0.0, sd);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    LayerParams layer;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      layer.w_q.push_back(gaussian_init(rng, d, dh, 0.0, sd));
      layer.w_k.push_back(gaussian_init(rng, d, dh, 0.0, sd));
      layer.w_v.push_back(gaussian_init(rng, d, dh, 0.0, sd));
    }
    layer.w_o = gaussian_init(rng, d, d, 0.0, sd);
    layer.ffn_w1 = gaussian_init(rng, d, cfg.inner, 0.0, sd);
    layer.ffn_b1 = Matrix(1, cfg.inner);
    layer.ffn_w2 = gaussian_init(rng, cfg.inner, d, 0.0, sd);
    layer.ffn_b2 = Matrix(1, d);
    layer.ln1_gain = Matrix(1, d, 1.0);
    layer.ln1_bias = Matrix(1, d);
    layer.ln2_gain = Matrix(1, d, 1.0);
    layer.ln2_bias = Matrix(1, d);
    p.layers.push_back(std::move(layer));
  }
  p.w_final = gaussian_init(rng, d, d, 0.0, sd);
  p.b_final = Matrix(1, d);
  return p;
}

std::vector<NodeId> ParamNodes::ordered() const {
  std::vector<NodeId> out{items, positions};
  for (const Layer& l : layers) {
    for (std::size_t h = 0; h < l.w_q.size(); ++h) {
      out.push_back(l.w_q[h]);
      out.push_back(l.w_k[h]);
      out.push_back(l.w_v[h]);
    }
    out.insert(out.end(), {l.w_o, l.ffn_w1, l.ffn_b1, l.ffn_w2, l.ffn_b2, l.ln1_gain, l.ln1_bias,
                           l.ln2_gain, l.ln2_bias});
  }
  out.push_back(w_final);
  out.push_back(b_final);
  return out;
}

ParamNodes::Layer bind_layer(Tape& tape, const LayerParams& layer, bool trainable) {
  const auto bind = [&](const Matrix& m) { return trainable ? tape.leaf(m) : tape.constant(m); };
  ParamNodes::Layer out;
  for (std::size_t h = 0; h < layer.w_q.size(); ++h) {
    out.w_q.push_back(bind(layer.w_q[h]));
    out.w_k.push_back(bind(layer.w_k[h]));
    out.w_v.push_back(bind(layer.w_v[h]));
  }
  out.w_o = bind(layer.w_o);
  out.ffn_w1 = bind(layer.ffn_w1);
  out.ffn_b1 = bind(layer.ffn_b1);
  out.ffn_w2 = bind(layer.ffn_w2);
  out.ffn_b2 = bind(layer.ffn_b2);
  out.ln1_gain = bind(layer.ln1_gain);
  out.ln1_bias = bind(layer.ln1_bias);
  out.ln2_gain = bind(layer.ln2_gain);
  out.ln2_bias = bind(layer.ln2_bias);
  return out;
}

ParamNodes bind_params(Tape& tape, const ModelParams& params, bool trainable) {
  const auto bind = [&](const Matrix& m) { return trainable ? tape.leaf(m) : tape.constant(m); };
  ParamNodes out;
  out.items = bind(params.embeddings.items);
  out.positions = bind(params.embeddings.positions);
  for (const LayerParams& l : params.layers) out.layers.push_back(bind_layer(tape, l, trainable));
  out.w_final = bind(params.w_final);
  out.b_final = bind(params.b_final);
  return out;
}

NodeId embed(Tape& tape, const ParamNodes& p, const Sequence& seq, const ModelConfig& cfg) {
  const std::size_t table_rows = tape.value(p.items).rows();
  if (seq.items.size() != cfg.max_len) {
    throw ShapeError("embed: sequence has " + std::to_string(seq.items.size()) +
                     " slots, expected " + std::to_string(cfg.max_len));
  }
  if (seq.true_len > cfg.max_len) throw std::invalid_argument("embed: true_len exceeds max_len");
  std::vector<std::size_t> ids(seq.items.begin(), seq.items.end());
  for (std::size_t id : ids) {
    if (id >= table_rows) {
      throw std::out_of_range("embed: item id " + std::to_string(id) +
                              " outside vocabulary of " + std::to_string(table_rows) + " rows");
    }
  }
  std::vector<std::size_t> positions(cfg.max_len);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  NodeId items = tape.select_rows(p.items, std::move(ids));
  NodeId pos = tape.select_rows(p.positions, std::move(positions));
  return tape.mask_rows(tape.add(items, pos), seq.real_mask());
}

NodeId multi_head(Tape& tape, NodeId h, const ParamNodes::Layer& p, const ModelConfig& cfg,
                  const std::vector<std::uint8_t>& real_mask, std::size_t layer_index,
                  std::vector<HeadProbe>* probes) {
  const Matrix& hv = tape.value(h);
  if (hv.cols() != cfg.hidden) {
    throw ShapeError("multi_head: hidden width " + std::to_string(hv.cols()) + " != " +
                     std::to_string(cfg.hidden));
  }
  const auto mask = effective_mask(real_mask, hv.rows());
  std::vector<NodeId> heads;
  heads.reserve(p.w_q.size());
  for (std::size_t i = 0; i < p.w_q.size(); ++i) {
    NodeId q = tape.matmul(h, p.w_q[i]);
    NodeId k = tape.matmul(h, p.w_k[i]);
    NodeId v = tape.matmul(h, p.w_v[i]);
    if (probes != nullptr) probes->push_back({layer_index, i, tape.value(q), tape.value(k)});
    heads.push_back(attention_head(tape, q, k, v, cfg, mask));
  }
  return tape.matmul(tape.concat_cols(heads), p.w_o);
}

NodeId encoder_layer(Tape& tape, NodeId h, const ParamNodes::Layer& p, const ModelConfig& cfg,
                     const std::vector<std::uint8_t>& real_mask, Mode mode, Rng& rng,
                     std::size_t layer_index, std::vector<HeadProbe>* probes) {
  const auto mask = effective_mask(real_mask, tape.value(h).rows());
  NodeId attn = multi_head(tape, h, p, cfg, mask, layer_index, probes);
  NodeId s = tape.layer_norm(tape.add(h, maybe_dropout(tape, attn, cfg.dropout, mode, rng)),
                             p.ln1_gain, p.ln1_bias, cfg.layer_norm_epsilon);
  s = maybe_mask_rows(tape, s, cfg, mask);
  NodeId hidden = tape.gelu(tape.add_row(tape.matmul(s, p.ffn_w1), p.ffn_b1));
  NodeId ffn = tape.add_row(tape.matmul(hidden, p.ffn_w2), p.ffn_b2);
  NodeId out = tape.layer_norm(tape.add(s, maybe_dropout(tape, ffn, cfg.dropout, mode, rng)),
                               p.ln2_gain, p.ln2_bias, cfg.layer_norm_epsilon);
  return maybe_mask_rows(tape, out, cfg, mask);
}

NodeId encode(Tape& tape, const ParamNodes& p, const Sequence& seq, const ModelConfig& cfg,
              Mode mode, Rng& rng, std::vector<HeadProbe>* probes) {
  if (p.layers.empty()) throw std::invalid_argument("encode: model has no layers");
  const auto mask = seq.real_mask();
  NodeId h = embed(tape, p, seq, cfg);
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    h = encoder_layer(tape, h, p.layers[l], cfg, mask, mode, rng, l, probes);
  return tape.add_row(tape.matmul(h, p.w_final), p.b_final);
}

Matrix embed(const Sequence& seq, const EmbeddingTables& tables, const ModelConfig& cfg) {
  Tape tape;
  ParamNodes p;
  p.items = tape.constant(tables.items);
  p.positions = tape.constant(tables.positions);
  return tape.value(embed(tape, p, seq, cfg));
}

Matrix multi_head(const Matrix& h, const LayerParams& layer, const ModelConfig& cfg,
                  const std::vector<std::uint8_t>& real_mask) {
  Tape tape;
  NodeId in = tape.constant(h);
  const auto nodes = bind_layer(tape, layer, false);
  return tape.value(multi_head(tape, in, nodes, cfg, real_mask));
}

Matrix encoder_layer(const Matrix& h, const LayerParams& layer, const ModelConfig& cfg,
                     double dropout_rate, Rng& rng, const std::vector<std::uint8_t>& real_mask) {
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw std::invalid_argument("encoder_layer: dropout rate must be in [0, 1)");
  }
  ModelConfig local = cfg;
  local.dropout = dropout_rate;
  Tape tape;
  NodeId in = tape.constant(h);
  const auto nodes = bind_layer(tape, layer, false);
  const Mode mode = dropout_rate > 0.0 ? Mode::train : Mode::eval;
  return tape.value(encoder_layer(tape, in, nodes, local, real_mask, mode, rng));
}

Matrix encode(const Sequence& seq, const ModelParams& params, const ModelConfig& cfg, Mode mode,
              Rng& rng, std::vector<HeadProbe>* probes) {
  Tape tape;
  const auto nodes = bind_params(tape, params, false);
  return tape.value(encode(tape, nodes, seq, cfg, mode, rng, probes));
}

}  // namespace linrec
