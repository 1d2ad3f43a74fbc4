// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "linrec/checkpoint.h"
#include "linrec_cli/commands.h"

namespace linrec::cli {
namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string secs(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string metrics_row(const std::string& epoch, const std::string& split,
                        const MetricsReport* m, const std::string& loss, double seconds) {
  std::string row = epoch + "," + split + ",";
  row += m ? num(m->recall) + "," + num(m->mrr) + "," + num(m->ndcg) : std::string(",,");
  return row + "," + loss + "," + secs(seconds) + "\n";
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

TrainOutcome run_training(const RunConfig& config, std::ostream& log) {
  const InteractionLog interactions = load_dataset(config.data);
  const SplitData data = leave_one_out_split(interactions, config.all_prefixes);
  if (data.train.empty())
    throw ConfigError({"data: no user has the 4 interactions a leave-one-out split needs"});

  ModelConfig model = config.model;
  model.n_items = interactions.item_count;
  model.validate();

  log << "dataset: " << interactions.user_count() << " users, " << interactions.item_count
      << " items, " << interactions.interaction_count() << " interactions, "
      << data.dropped_users << " users dropped (< 4 interactions)\n";

  std::ofstream metrics = open_output(config.metrics_path);
  metrics << kMetricsHeader << '\n';

  TrainOutcome outcome;
  outcome.dropped_users = data.dropped_users;
  outcome.result = train(model, config.train, data, [&](const EpochRecord& e) {
    const std::string epoch = std::to_string(e.epoch);
    metrics << metrics_row(epoch, "train", nullptr, num(e.train_loss), e.seconds)
            << metrics_row(epoch, "valid", &e.valid, "", e.seconds);
    metrics.flush();
    log << "epoch " << e.epoch << " loss " << num(e.train_loss) << " valid recall@"
        << e.valid.k << " " << num(e.valid.recall) << " ndcg " << num(e.valid.ndcg) << '\n';
  });

  const auto start = std::chrono::steady_clock::now();
  outcome.test = evaluate(outcome.result.best, model, data.test, config.train.k,
                          config.train.threads);
  outcome.test_loss = mean_loss(outcome.result.best, model, data.test);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  metrics << metrics_row(std::to_string(outcome.result.best_epoch), "test", &outcome.test,
                         num(outcome.test_loss), seconds);

  if (config.checkpoint_path.has_parent_path())
    std::filesystem::create_directories(config.checkpoint_path.parent_path());
  save_checkpoint(config.checkpoint_path, model, outcome.result.best,
                  {{"train.best_epoch", std::to_string(outcome.result.best_epoch)},
                   {"train.seed", std::to_string(config.train.seed)}});
  log << "best epoch " << outcome.result.best_epoch << ", test recall@" << outcome.test.k << " "
      << num(outcome.test.recall) << " mrr " << num(outcome.test.mrr) << " ndcg "
      << num(outcome.test.ndcg) << "\nwrote " << config.metrics_path.string() << " and "
      << config.checkpoint_path.string() << '\n';
  return outcome;
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  try {
    run_training(config, log);
  } catch (const TrainingDiverged& e) {
    log << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitOk;
}

EvalOutcome run_eval(const EvalOptions& options) {
  const Checkpoint ck = load_checkpoint(options.checkpoint);
  const InteractionLog interactions = load_dataset(options.data);
  if (interactions.item_count != ck.config.n_items) {
    throw std::invalid_argument("dataset has " + std::to_string(interactions.item_count) +
                                " items but the checkpoint was trained on " +
                                std::to_string(ck.config.n_items));
  }
  const SplitData data = leave_one_out_split(interactions);
  if (data.test.empty())
    throw std::invalid_argument("dataset has no user with at least 4 interactions");
  EvalOutcome outcome;
  outcome.metrics = evaluate(ck.params, ck.config, data.test, options.k, options.threads);
  outcome.loss = mean_loss(ck.params, ck.config, data.test);
  if (const auto it = ck.metadata.find("train.best_epoch"); it != ck.metadata.end())
    outcome.best_epoch = it->second;
  return outcome;
}

int cmd_eval(const EvalOptions& options, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const EvalOutcome outcome = run_eval(options);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string report =
      std::string(kMetricsHeader) + "\n" +
      metrics_row(outcome.best_epoch, "test", &outcome.metrics, num(outcome.loss), seconds);
  out << report;
  if (!options.out.empty()) open_output(options.out) << report;
  return kExitOk;
}

}  // namespace linrec::cli
