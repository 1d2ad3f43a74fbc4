// SPDX-License-Identifier: Apache-2.0
//
// linrec: invariant checks, attention benchmarks, training, evaluation,
// heatmap export, score-entropy reports and synthetic datasets.
//
// Exit codes: 0 success, 1 a check or training run failed, 2 usage or input
// error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "linrec_cli/commands.h"

namespace {

using namespace linrec;
using namespace linrec::cli;

std::vector<ItemId> parse_sequence(const std::string& text) {
  std::vector<ItemId> items;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    std::size_t used = 0;
    const unsigned long value = std::stoul(cell, &used);
    if (used != cell.size()) throw std::invalid_argument("bad item id '" + cell + "'");
    items.push_back(static_cast<ItemId>(value));
  }
  return items;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LinRec attention lab: checks, benchmarks, training and analysis"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;

  // check
  CheckOptions check;
  std::string fault = "none";
  auto* check_cmd = app.add_subcommand("check", "Run the invariant and gradient suite");
  check_cmd->add_option("--seed", seed, "Random seed (default 2024)");
  check_cmd->add_option("--trials", check.trials, "Random matrices per property check")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  check_cmd->add_option("--inject-fault", fault, "Deliberately break the suite (mutation test)")
      ->check(CLI::IsMember({"none", "skip-normalization"}))
      ->capture_default_str();

  // bench
  BenchOptions bench;
  std::vector<std::string> mechanisms;
  std::filesystem::path bench_out;
  auto* bench_cmd = app.add_subcommand("bench", "Time attention forward (or backward) passes");
  bench_cmd->add_option("--mechanism", mechanisms, "standard, linrec, softmax-twice (repeatable)");
  bench_cmd->add_option("-d,--hidden", bench.d, "Head width d")->capture_default_str();
  bench_cmd->add_option("-n,--lengths", bench.lengths, "Sequence lengths N")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--trials", bench.trials, "Warm trials per point (>= 3)")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{3}, std::size_t{1000}));
  bench_cmd->add_flag("--backward", bench.backward, "Time forward plus backward");
  bench_cmd->add_option("--min-trial-seconds", bench.min_trial_seconds,
                        "Repeat calls until one trial lasts this long")
      ->capture_default_str();
  bench_cmd->add_option("--seed", seed, "Random seed (default 2024)");
  bench_cmd->add_option("-o,--out", bench_out, "Write the CSV here instead of stdout");

  // train
  std::filesystem::path config_path;
  std::filesystem::path metrics_override;
  std::filesystem::path checkpoint_override;
  bool print_defaults = false;
  auto* train_cmd = app.add_subcommand("train", "Train a recommender from a config file");
  train_cmd->add_option("-c,--config", config_path, "Config file (see --print-defaults)");
  train_cmd->add_flag("--print-defaults", print_defaults, "Print the annotated default config");
  train_cmd->add_option("--seed", seed, "Override train.seed");
  train_cmd->add_option("--metrics", metrics_override, "Override output.metrics");
  train_cmd->add_option("--checkpoint", checkpoint_override, "Override output.checkpoint");

  // eval
  EvalOptions eval;
  std::filesystem::path eval_data;
  std::filesystem::path eval_config;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset's test split");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  auto* data_opt = eval_cmd->add_option("--data", eval_data, "TSV interaction log");
  auto* conf_opt = eval_cmd->add_option("--config", eval_config, "Use the [data] section of a config");
  data_opt->excludes(conf_opt);
  eval_cmd->add_option("-k", eval.k, "Ranking cutoff")->capture_default_str()->check(CLI::PositiveNumber);
  eval_cmd->add_option("--threads", eval.threads, "Evaluation threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("-o,--out", eval.out, "Also write the report CSV here");
  eval_cmd->add_option("--seed", seed, "Accepted for uniformity; evaluation is deterministic");

  // heatmap
  HeatmapOptions heatmap;
  std::string sequence_text;
  auto* heat_cmd = app.add_subcommand("heatmap", "Export one head's attention scores");
  heat_cmd->add_option("--checkpoint", heatmap.checkpoint, "Checkpoint file")->required();
  heat_cmd->add_option("--sequence", sequence_text, "Comma-separated item ids, oldest first")
      ->required();
  heat_cmd->add_option("--layer", heatmap.layer, "Layer index")->capture_default_str();
  heat_cmd->add_option("--head", heatmap.head, "Head index")->capture_default_str();
  heat_cmd->add_option("-o,--out", heatmap.out_prefix, "Output prefix for .csv and .pgm")
      ->capture_default_str();
  heat_cmd->add_option("--seed", seed, "Accepted for uniformity; export is deterministic");

  // entropy
  EntropyOptions entropy;
  auto* ent_cmd = app.add_subcommand("entropy", "Compare score-row entropy of standard vs LinRec");
  ent_cmd->add_option("-n", entropy.n, "Sequence length N")->capture_default_str();
  ent_cmd->add_option("-d", entropy.d, "Width d")->capture_default_str();
  ent_cmd->add_option("--samples", entropy.samples, "Random Q, K pairs")->capture_default_str();
  ent_cmd->add_option("--rows-out", entropy.rows_out, "Write per-row entropies here");
  ent_cmd->add_option("--seed", seed, "Random seed (default 2024)");

  // synth
  SynthOptions synth;
  std::string pattern = "cyclic";
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic interaction log as TSV");
  synth_cmd->add_option("--pattern", pattern, "cyclic or markov")
      ->check(CLI::IsMember({"cyclic", "markov"}))
      ->capture_default_str();
  synth_cmd->add_option("--users", synth.spec.n_users, "Users")->capture_default_str();
  synth_cmd->add_option("--items", synth.spec.n_items, "Items (>= 2)")->capture_default_str();
  synth_cmd->add_option("--seq-len", synth.spec.seq_len, "Interactions per user")
      ->capture_default_str();
  synth_cmd->add_option("--branching", synth.spec.markov_branching, "Markov successors per item")
      ->capture_default_str();
  synth_cmd->add_option("--seed", seed, "Random seed (default 7)");
  synth_cmd->add_option("-o,--out", synth.out, "Output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (check_cmd->parsed()) {
      if (seed) check.seed = *seed;
      check.fault = fault == "skip-normalization" ? Fault::skip_normalization : Fault::none;
      return cmd_check(check, std::cout);
    }
    if (bench_cmd->parsed()) {
      if (seed) bench.seed = *seed;
      if (!mechanisms.empty()) {
        bench.mechanisms.clear();
        for (const auto& m : mechanisms) bench.mechanisms.push_back(parse_mechanism(m));
      }
      if (bench_out.empty()) return cmd_bench(bench, std::cout);
      std::ofstream out(bench_out);
      if (!out) throw std::runtime_error("cannot write " + bench_out.string());
      return cmd_bench(bench, out);
    }
    if (train_cmd->parsed()) {
      if (print_defaults) {
        std::cout << default_config_text();
        return kExitOk;
      }
      if (config_path.empty()) {
        std::cerr << "error: train needs --config (try --print-defaults)\n";
        return kExitUsage;
      }
      RunConfig cfg = load_run_config(config_path);
      if (seed) cfg.train.seed = *seed;
      if (!metrics_override.empty()) cfg.metrics_path = metrics_override;
      if (!checkpoint_override.empty()) cfg.checkpoint_path = checkpoint_override;
      return cmd_train(cfg, std::cout);
    }
    if (eval_cmd->parsed()) {
      if (!eval_data.empty()) {
        eval.data.path = eval_data;
      } else if (!eval_config.empty()) {
        eval.data = load_run_config(eval_config).data;
      } else {
        std::cerr << "error: eval needs --data or --config\n";
        return kExitUsage;
      }
      return cmd_eval(eval, std::cout);
    }
    if (heat_cmd->parsed()) {
      heatmap.sequence = parse_sequence(sequence_text);
      return cmd_heatmap(heatmap, std::cout);
    }
    if (ent_cmd->parsed()) {
      if (seed) entropy.seed = *seed;
      return cmd_entropy(entropy, std::cout);
    }
    if (synth_cmd->parsed()) {
      if (seed) synth.spec.seed = *seed;
      synth.spec.pattern = parse_pattern(pattern);
      return cmd_synth(synth, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
