// SPDX-License-Identifier: Apache-2.0
//
// Next-item prediction on top of the encoder: full-vocabulary scoring,
// cross-entropy loss, Adam, the leave-one-out protocol, ranking metrics
// and the training loop with early stopping.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "linrec/autograd.h"
#include "linrec/data_io.h"
#include "linrec/sequence.h"
#include "linrec/transformer.h"

namespace linrec {

// Score and probability vectors are indexed by candidate: entry i belongs to
// item id i + 1. The padding row never takes part in ranking.

/// z_i = H_t . E_{i+1} for every real item.
std::vector<double> score_items(const Matrix& h, std::size_t t, const Matrix& item_table);
std::vector<double> predict_proba(std::span<const double> scores);
/// -log(max(p_target, 1e-12)).
double cross_entropy_loss(std::span<const double> probs, ItemId target);

/// 1-based rank of `target`; ties go to the smaller item id.
std::size_t rank_of_target(std::span<const double> scores, ItemId target);

struct MetricsReport {
  double recall = 0.0;
  double mrr = 0.0;
  double ndcg = 0.0;
  std::size_t k = 10;
  std::size_t n_users = 0;
};

MetricsReport metrics_from_ranks(std::span<const std::size_t> ranks, std::size_t k);

struct SplitData {
  std::vector<Example> train;
  std::vector<Example> valid;
  std::vector<Example> test;
  std::size_t dropped_users = 0;
};

/// For a user [v_1 .. v_m] (m >= 4): train ([v_1..v_{m-3}], v_{m-2}),
/// valid ([..v_{m-2}], v_{m-1}), test ([..v_{m-1}], v_m). With
/// `all_prefixes`, every shorter prefix of the training part is added too.
SplitData leave_one_out_split(const InteractionLog& log, bool all_prefixes = false);

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::size_t step = 0;
};

AdamState make_adam_state(std::span<const Matrix* const> params, AdamConfig config = {});
/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state);

/// Mean next-item cross-entropy of a batch, recorded on `tape`.
NodeId batch_loss(Tape& tape, const ParamNodes& nodes, const SequenceBatch& batch,
                  const ModelConfig& cfg, Mode mode, Rng& rng);

/// Gradients of batch_loss for every parameter, in ModelParams::named() order.
std::vector<Matrix> batch_gradients(const ModelParams& params, const SequenceBatch& batch,
                                    const ModelConfig& cfg, Mode mode, Rng& rng,
                                    double* loss_out = nullptr);

/// Eval-mode full-vocabulary ranks of each example's target.
std::vector<std::size_t> rank_examples(const ModelParams& params, const ModelConfig& cfg,
                                       std::span<const Example> examples,
                                       std::size_t threads = 1);

MetricsReport evaluate(const ModelParams& params, const ModelConfig& cfg,
                       std::span<const Example> examples, std::size_t k,
                       std::size_t threads = 1);

/// Mean eval-mode cross-entropy over examples.
double mean_loss(const ModelParams& params, const ModelConfig& cfg,
                 std::span<const Example> examples);

/// Transition-count baseline: ranks candidates by how often they followed
/// the sequence's last item in the training data.
class BigramOracle {
 public:
  BigramOracle(const std::vector<Example>& train, std::size_t n_items);
  std::vector<double> scores(const std::vector<ItemId>& history) const;
  MetricsReport evaluate(std::span<const Example> examples, std::size_t k) const;

 private:
  std::size_t n_items_;
  Matrix counts_;  // (n_items + 1) x n_items
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t step, std::size_t batch, double max_grad);
  std::size_t step;
  std::size_t batch;
  double max_grad;
};

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 2048;
  std::size_t patience = 10;
  std::size_t k = 10;
  AdamConfig adam;
  std::uint64_t seed = 2024;
  std::size_t threads = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  MetricsReport valid;
  double seconds = 0.0;
};

struct TrainResult {
  ModelParams best;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training with per-epoch shuffling. Stops once validation
/// NDCG@k fails to improve for `patience` consecutive epochs and returns the
/// best-validation parameters.
TrainResult train(const ModelConfig& cfg, const TrainConfig& tcfg, const SplitData& data,
                  const EpochCallback& on_epoch = {});

}  // namespace linrec
