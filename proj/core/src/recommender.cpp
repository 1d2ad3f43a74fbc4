// SPDX-License-Identifier: Apache-2.0

#include "linrec/recommender.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace linrec {
namespace {

std::vector<std::uint8_t> candidate_mask(std::size_t table_rows) {
  std::vector<std::uint8_t> mask(table_rows, 1);
  mask[kPaddingId] = 0;
  return mask;
}

std::size_t checked_candidate(ItemId target, std::size_t n_candidates) {
  if (target == kPaddingId || target > n_candidates) {
    throw std::out_of_range("target item " + std::to_string(target) + " is not a candidate");
  }
  return target - 1;
}

}  // namespace

std::vector<double> score_items(const Matrix& h, std::size_t t, const Matrix& item_table) {
  if (t >= h.rows()) {
    throw std::out_of_range("score_items: position " + std::to_string(t) + " outside " +
                            std::to_string(h.rows()) + " rows");
  }
  if (item_table.cols() != h.cols()) throw ShapeError("score_items: embedding width mismatch");
  if (item_table.rows() < 2) throw ShapeError("score_items: item table has no real items");
  const auto query = h.row(t);
  std::vector<double> scores(item_table.rows() - 1);
  for (std::size_t i = 1; i < item_table.rows(); ++i) {
    const auto e = item_table.row(i);
    scores[i - 1] = std::inner_product(query.begin(), query.end(), e.begin(), 0.0);
  }
  return scores;
}

std::vector<double> predict_proba(std::span<const double> scores) {
  const Matrix probs = softmax_rows(Matrix::row_vector(scores));
  return {probs.data().begin(), probs.data().end()};
}

double cross_entropy_loss(std::span<const double> probs, ItemId target) {
  const double p = probs[checked_candidate(target, probs.size())];
  return -std::log(std::max(p, kProbabilityFloor));
}

std::size_t rank_of_target(std::span<const double> scores, ItemId target) {
  const std::size_t t = checked_candidate(target, scores.size());
  const double s = scores[t];
  std::size_t rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > s || (scores[j] == s && j < t)) ++rank;
  }
  return rank;
}

MetricsReport metrics_from_ranks(std::span<const std::size_t> ranks, std::size_t k) {
  MetricsReport report;
  report.k = k;
  report.n_users = ranks.size();
  if (ranks.empty()) return report;
  for (std::size_t r : ranks) {
    report.mrr += 1.0 / static_cast<double>(r);
    if (r <= k) {
      report.recall += 1.0;
      report.ndcg += 1.0 / std::log2(1.0 + static_cast<double>(r));
    }
  }
  const double n = static_cast<double>(ranks.size());
  report.recall /= n;
  report.mrr /= n;
  report.ndcg /= n;
  return report;
}

SplitData leave_one_out_split(const InteractionLog& log, bool all_prefixes) {
  SplitData split;
  for (std::size_t u = 0; u < log.users.size(); ++u) {
    const auto& items = log.users[u].items;
    const std::size_t m = items.size();
    if (m < 4) {
      ++split.dropped_users;
      continue;
    }
    const auto prefix = [&](std::size_t len) {
      return std::vector<ItemId>(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(len));
    };
    const std::size_t user = u + 1;
    if (all_prefixes) {
      for (std::size_t len = 1; len < m - 3; ++len)
        split.train.push_back({user, prefix(len), items[len]});
    }
    split.train.push_back({user, prefix(m - 3), items[m - 3]});
    split.valid.push_back({user, prefix(m - 2), items[m - 2]});
    split.test.push_back({user, prefix(m - 1), items[m - 1]});
  }
  return split;
}

AdamState make_adam_state(std::span<const Matrix* const> params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (const Matrix* p : params) {
    state.m.emplace_back(p->rows(), p->cols());
    state.v.emplace_back(p->rows(), p->cols());
  }
  return state;
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " +
                     std::to_string(grads.size()) + " grads, " + std::to_string(state.m.size()) +
                     " moment slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.m[i])) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " is " +
                       params[i]->shape_string() + " but gradient is " + grads[i].shape_string());
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

NodeId batch_loss(Tape& tape, const ParamNodes& nodes, const SequenceBatch& batch,
                  const ModelConfig& cfg, Mode mode, Rng& rng) {
  batch.validate(cfg.max_len);
  std::vector<NodeId> last_rows;
  last_rows.reserve(batch.size());
  for (const Sequence& seq : batch.sequences) {
    NodeId h = encode(tape, nodes, seq, cfg, mode, rng);
    last_rows.push_back(tape.select_rows(h, {seq.last_position()}));
  }
  NodeId stacked = tape.concat_rows(last_rows);
  NodeId logits = tape.matmul_transposed(stacked, nodes.items);
  std::vector<std::size_t> targets(batch.targets.begin(), batch.targets.end());
  return tape.cross_entropy(logits, std::move(targets),
                            candidate_mask(tape.value(nodes.items).rows()));
}

std::vector<Matrix> batch_gradients(const ModelParams& params, const SequenceBatch& batch,
                                    const ModelConfig& cfg, Mode mode, Rng& rng,
                                    double* loss_out) {
  Tape tape;
  const ParamNodes nodes = bind_params(tape, params, true);
  NodeId loss = batch_loss(tape, nodes, batch, cfg, mode, rng);
  if (loss_out != nullptr) *loss_out = tape.value(loss)(0, 0);
  const Gradients grads = tape.backward(loss);
  std::vector<Matrix> out;
  for (NodeId id : nodes.ordered()) {
    const Matrix& v = tape.value(id);
    out.push_back(grads.has(id) ? grads[id] : Matrix(v.rows(), v.cols()));
  }
  return out;
}

std::vector<std::size_t> rank_examples(const ModelParams& params, const ModelConfig& cfg,
                                       std::span<const Example> examples, std::size_t threads) {
  std::vector<std::size_t> ranks(examples.size());
  const auto worker = [&](std::size_t begin, std::size_t end) {
    Tape tape;
    const ParamNodes nodes = bind_params(tape, params, false);
    const std::size_t base = tape.size();
    Rng unused(0);
    for (std::size_t i = begin; i < end; ++i) {
      const Sequence seq = make_sequence(examples[i].history, cfg.max_len);
      NodeId h = encode(tape, nodes, seq, cfg, Mode::eval, unused);
      const auto scores = score_items(tape.value(h), seq.last_position(), params.embeddings.items);
      ranks[i] = rank_of_target(scores, examples[i].target);
      tape.rewind(base);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, examples.size()));
  if (threads == 1) {
    worker(0, examples.size());
    return ranks;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (examples.size() + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(examples.size(), begin + chunk);
    if (begin < end) pool.emplace_back(worker, begin, end);
  }
  for (auto& th : pool) th.join();
  return ranks;
}

MetricsReport evaluate(const ModelParams& params, const ModelConfig& cfg,
                       std::span<const Example> examples, std::size_t k, std::size_t threads) {
  const auto ranks = rank_examples(params, cfg, examples, threads);
  return metrics_from_ranks(ranks, k);
}

double mean_loss(const ModelParams& params, const ModelConfig& cfg,
                 std::span<const Example> examples) {
  if (examples.empty()) return 0.0;
  Tape tape;
  const ParamNodes nodes = bind_params(tape, params, false);
  const std::size_t base = tape.size();
  Rng unused(0);
  double total = 0.0;
  for (const Example& e : examples) {
    const Sequence seq = make_sequence(e.history, cfg.max_len);
    NodeId h = encode(tape, nodes, seq, cfg, Mode::eval, unused);
    const auto probs =
        predict_proba(score_items(tape.value(h), seq.last_position(), params.embeddings.items));
    total += cross_entropy_loss(probs, e.target);
    tape.rewind(base);
  }
  return total / static_cast<double>(examples.size());
}

BigramOracle::BigramOracle(const std::vector<Example>& train, std::size_t n_items)
    : n_items_(n_items), counts_(n_items + 1, n_items) {
  const auto count = [&](ItemId from, ItemId to) {
    if (from > n_items_ || to == kPaddingId || to > n_items_) {
      throw std::out_of_range("bigram oracle: item outside vocabulary");
    }
    counts_(from, to - 1) += 1.0;
  };
  for (const Example& e : train) {
    for (std::size_t t = 1; t < e.history.size(); ++t) count(e.history[t - 1], e.history[t]);
    if (!e.history.empty()) count(e.history.back(), e.target);
  }
}

std::vector<double> BigramOracle::scores(const std::vector<ItemId>& history) const {
  if (history.empty()) return std::vector<double>(n_items_, 0.0);
  const auto row = counts_.row(history.back());
  return {row.begin(), row.end()};
}

MetricsReport BigramOracle::evaluate(std::span<const Example> examples, std::size_t k) const {
  std::vector<std::size_t> ranks;
  ranks.reserve(examples.size());
  for (const Example& e : examples) ranks.push_back(rank_of_target(scores(e.history), e.target));
  return metrics_from_ranks(ranks, k);
}

TrainingDiverged::TrainingDiverged(std::size_t step_, std::size_t batch_, double max_grad_)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "non-finite loss at step " << step_ << " (batch " << batch_
           << " of epoch), max |grad| = " << max_grad_;
        return os.str();
      }()),
      step(step_),
      batch(batch_),
      max_grad(max_grad_) {}

TrainResult train(const ModelConfig& cfg, const TrainConfig& tcfg, const SplitData& data,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.train.empty() || data.valid.empty()) {
    throw std::invalid_argument("train: empty training or validation split");
  }
  if (tcfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  Rng rng(tcfg.seed);
  ModelParams params = init_params(cfg, rng);
  auto named = params.named();
  std::vector<Matrix*> slots;
  for (auto& [name, ptr] : named) slots.push_back(ptr);
  AdamState adam = make_adam_state(slots, tcfg.adam);

  TrainResult result;
  result.best = params;
  double best_ndcg = -1.0;
  std::size_t stale = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    BatchStream stream(data.train, cfg.max_len, tcfg.batch_size, rng.engine()());
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t batch_index = 0;
    while (auto batch = stream.next()) {
      double loss = 0.0;
      std::vector<Matrix> grads = batch_gradients(params, *batch, cfg, Mode::train, rng, &loss);
      ++step;
      if (!std::isfinite(loss)) {
        double worst = 0.0;
        for (const Matrix& g : grads) worst = std::max(worst, max_abs(g));
        throw TrainingDiverged(step, batch_index, worst);
      }
      // The padding row never moves.
      std::fill(grads[0].row(kPaddingId).begin(), grads[0].row(kPaddingId).end(), 0.0);
      adam_step(slots, grads, adam);
      loss_sum += loss * static_cast<double>(batch->size());
      seen += batch->size();
      ++batch_index;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(seen);
    record.valid = evaluate(params, cfg, data.valid, tcfg.k, tcfg.threads);
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    if (record.valid.ndcg > best_ndcg) {
      best_ndcg = record.valid.ndcg;
      result.best = params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= tcfg.patience) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace linrec
