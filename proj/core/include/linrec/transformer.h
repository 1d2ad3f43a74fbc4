// SPDX-License-Identifier: Apache-2.0
//
// SASRec-style encoder: item + position embeddings, L stacked blocks of
// multi-head attention and a feed-forward network with post-residual
// layer norm, and a final affine map producing sequence representations.

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "linrec/attention.h"
#include "linrec/autograd.h"
#include "linrec/matrix.h"
#include "linrec/sequence.h"

namespace linrec {

enum class Mode { train, eval };

struct ModelConfig {
  Mechanism mechanism = Mechanism::linrec;
  MaskPolicy mask_policy = MaskPolicy::padding_zero_rows;
  std::size_t n_items = 1;  // vocabulary size without the padding row
  std::size_t max_len = 50;
  std::size_t hidden = 64;
  std::size_t heads = 2;
  std::size_t layers = 2;
  std::size_t inner = 256;
  double dropout = 0.2;
  double epsilon = kNormEpsilon;
  double layer_norm_epsilon = 1e-12;
  double init_std = 0.02;

  std::size_t head_dim() const { return hidden / heads; }
  AttentionConfig attention() const;
  /// Every violated constraint, empty when the config is usable.
  std::vector<std::string> problems() const;
  void validate() const;
};

struct EmbeddingTables {
  Matrix items;      // (n_items + 1) x d, row 0 is padding and stays zero
  Matrix positions;  // max_len x d
};

struct LayerParams {
  std::vector<Matrix> w_q;  // per head, d x d/h
  std::vector<Matrix> w_k;
  std::vector<Matrix> w_v;
  Matrix w_o;               // d x d
  Matrix ffn_w1, ffn_b1;    // d x inner, 1 x inner
  Matrix ffn_w2, ffn_b2;    // inner x d, 1 x d
  Matrix ln1_gain, ln1_bias;
  Matrix ln2_gain, ln2_bias;
};

struct ModelParams {
  EmbeddingTables embeddings;
  std::vector<LayerParams> layers;
  Matrix w_final;  // d x d
  Matrix b_final;  // 1 x d

  /// Every parameter with a stable name, in a fixed order.
  std::vector<std::pair<std::string, Matrix*>> named();
  std::vector<std::pair<std::string, const Matrix*>> named() const;
};

ModelParams init_params(const ModelConfig& cfg, Rng& rng);

/// Tape handles for one set of parameters.
struct ParamNodes {
  struct Layer {
    std::vector<NodeId> w_q, w_k, w_v;
    NodeId w_o, ffn_w1, ffn_b1, ffn_w2, ffn_b2, ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  };
  NodeId items, positions;
  std::vector<Layer> layers;
  NodeId w_final, b_final;

  /// Node ids in the same order as ModelParams::named().
  std::vector<NodeId> ordered() const;
};

ParamNodes bind_params(Tape& tape, const ModelParams& params, bool trainable);
ParamNodes::Layer bind_layer(Tape& tape, const LayerParams& layer, bool trainable);

/// Projected per-head queries and keys captured during a forward pass.
struct HeadProbe {
  std::size_t layer = 0;
  std::size_t head = 0;
  Matrix q;
  Matrix k;
};

/// One attention head on projected q, k, v under cfg.mechanism. With the
/// padding_zero_rows policy, standard attention ignores keys whose mask is 0.
NodeId attention_head(Tape& tape, NodeId q, NodeId k, NodeId v, const ModelConfig& cfg,
                      const std::vector<std::uint8_t>& mask);

NodeId embed(Tape& tape, const ParamNodes& p, const Sequence& seq, const ModelConfig& cfg);
NodeId multi_head(Tape& tape, NodeId h, const ParamNodes::Layer& p, const ModelConfig& cfg,
                  const std::vector<std::uint8_t>& real_mask, std::size_t layer_index = 0,
                  std::vector<HeadProbe>* probes = nullptr);
NodeId encoder_layer(Tape& tape, NodeId h, const ParamNodes::Layer& p, const ModelConfig& cfg,
                     const std::vector<std::uint8_t>& real_mask, Mode mode, Rng& rng,
                     std::size_t layer_index = 0, std::vector<HeadProbe>* probes = nullptr);
NodeId encode(Tape& tape, const ParamNodes& p, const Sequence& seq, const ModelConfig& cfg,
              Mode mode, Rng& rng, std::vector<HeadProbe>* probes = nullptr);

// Value-level conveniences; each runs the tape path on constant parameters.
Matrix embed(const Sequence& seq, const EmbeddingTables& tables, const ModelConfig& cfg);
Matrix multi_head(const Matrix& h, const LayerParams& layer, const ModelConfig& cfg,
                  const std::vector<std::uint8_t>& real_mask = {});
Matrix encoder_layer(const Matrix& h, const LayerParams& layer, const ModelConfig& cfg,
                     double dropout_rate, Rng& rng, const std::vector<std::uint8_t>& real_mask = {});
Matrix encode(const Sequence& seq, const ModelParams& params, const ModelConfig& cfg, Mode mode,
              Rng& rng, std::vector<HeadProbe>* probes = nullptr);

}  // namespace linrec
