// SPDX-License-Identifier: Apache-2.0

#include "linrec_cli/run_config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace linrec::cli {
namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string msg = "invalid configuration (" + std::to_string(problems.size()) + " problem" +
                    (problems.size() == 1 ? "" : "s") + ")";
  for (const auto& p : problems) msg += "\n  - " + p;
  return msg;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_bool(std::string_view text, bool& out) {
  if (text == "true" || text == "1" || text == "yes") {
    out = true;
    return true;
  }
  if (text == "false" || text == "0" || text == "no") {
    out = false;
    return true;
  }
  return false;
}

// Setter returns an error message, empty on success.
using Setter = std::function<std::string(RunConfig&, std::string_view)>;

Setter count_setter(std::function<std::size_t&(RunConfig&)> field) {
  return [field](RunConfig& cfg, std::string_view v) -> std::string {
    std::size_t out = 0;
    if (!parse_number(v, out)) return "expected a non-negative integer, got '" + std::string(v) + "'";
    field(cfg) = out;
    return {};
  };
}

Setter seed_setter(std::function<std::uint64_t&(RunConfig&)> field) {
  return [field](RunConfig& cfg, std::string_view v) -> std::string {
    std::uint64_t out = 0;
    if (!parse_number(v, out)) return "expected a 64-bit unsigned seed, got '" + std::string(v) + "'";
    field(cfg) = out;
    return {};
  };
}

Setter real_setter(std::function<double&(RunConfig&)> field) {
  return [field](RunConfig& cfg, std::string_view v) -> std::string {
    double out = 0.0;
    if (!parse_number(v, out)) return "expected a number, got '" + std::string(v) + "'";
    field(cfg) = out;
    return {};
  };
}

SyntheticSpec& synthetic(RunConfig& cfg) {
  if (!cfg.data.synthetic) cfg.data.synthetic = SyntheticSpec{};
  return *cfg.data.synthetic;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["model.mechanism"] = [](RunConfig& c, std::string_view v) -> std::string {
      try {
        c.model.mechanism = parse_mechanism(v);
      } catch (const std::exception& e) {
        return e.what();
      }
      return {};
    };
    t["model.mask_policy"] = [](RunConfig& c, std::string_view v) -> std::string {
      try {
        c.model.mask_policy = parse_mask_policy(v);
      } catch (const std::exception& e) {
        return e.what();
      }
      return {};
    };
    t["model.max_len"] = count_setter([](RunConfig& c) -> std::size_t& { return c.model.max_len; });
    t["model.hidden"] = count_setter([](RunConfig& c) -> std::size_t& { return c.model.hidden; });
    t["model.heads"] = count_setter([](RunConfig& c) -> std::size_t& { return c.model.heads; });
    t["model.layers"] = count_setter([](RunConfig& c) -> std::size_t& { return c.model.layers; });
    t["model.inner"] = count_setter([](RunConfig& c) -> std::size_t& { return c.model.inner; });
    t["model.dropout"] = real_setter([](RunConfig& c) -> double& { return c.model.dropout; });
    t["model.epsilon"] = real_setter([](RunConfig& c) -> double& { return c.model.epsilon; });
    t["model.layer_norm_epsilon"] =
        real_setter([](RunConfig& c) -> double& { return c.model.layer_norm_epsilon; });
    t["model.init_std"] = real_setter([](RunConfig& c) -> double& { return c.model.init_std; });

    t["train.epochs"] = count_setter([](RunConfig& c) -> std::size_t& { return c.train.epochs; });
    t["train.batch_size"] =
        count_setter([](RunConfig& c) -> std::size_t& { return c.train.batch_size; });
    t["train.patience"] = count_setter([](RunConfig& c) -> std::size_t& { return c.train.patience; });
    t["train.k"] = count_setter([](RunConfig& c) -> std::size_t& { return c.train.k; });
    t["train.threads"] = count_setter([](RunConfig& c) -> std::size_t& { return c.train.threads; });
    t["train.lr"] = real_setter([](RunConfig& c) -> double& { return c.train.adam.lr; });
    t["train.beta1"] = real_setter([](RunConfig& c) -> double& { return c.train.adam.beta1; });
    t["train.beta2"] = real_setter([](RunConfig& c) -> double& { return c.train.adam.beta2; });
    t["train.adam_epsilon"] = real_setter([](RunConfig& c) -> double& { return c.train.adam.epsilon; });
    t["train.seed"] = seed_setter([](RunConfig& c) -> std::uint64_t& { return c.train.seed; });
    t["train.all_prefixes"] = [](RunConfig& c, std::string_view v) -> std::string {
      if (!parse_bool(v, c.all_prefixes)) return "expected true or false, got '" + std::string(v) + "'";
      return {};
    };

    t["data.path"] = [](RunConfig& c, std::string_view v) -> std::string {
      if (v.empty()) return "path must not be empty";
      c.data.path = std::string(v);
      return {};
    };
    t["data.synthetic"] = [](RunConfig& c, std::string_view v) -> std::string {
      try {
        synthetic(c).pattern = parse_pattern(std::string(v));
      } catch (const std::exception& e) {
        return e.what();
      }
      return {};
    };
    t["data.n_users"] =
        count_setter([](RunConfig& c) -> std::size_t& { return synthetic(c).n_users; });
    t["data.n_items"] =
        count_setter([](RunConfig& c) -> std::size_t& { return synthetic(c).n_items; });
    t["data.seq_len"] =
        count_setter([](RunConfig& c) -> std::size_t& { return synthetic(c).seq_len; });
    t["data.markov_branching"] =
        count_setter([](RunConfig& c) -> std::size_t& { return synthetic(c).markov_branching; });
    t["data.seed"] = seed_setter([](RunConfig& c) -> std::uint64_t& { return synthetic(c).seed; });

    t["output.metrics"] = [](RunConfig& c, std::string_view v) -> std::string {
      if (v.empty()) return "path must not be empty";
      c.metrics_path = std::string(v);
      return {};
    };
    t["output.checkpoint"] = [](RunConfig& c, std::string_view v) -> std::string {
      if (v.empty()) return "path must not be empty";
      c.checkpoint_path = std::string(v);
      return {};
    };
    return t;
  }();
  return table;
}

void validate(const RunConfig& cfg, const std::set<std::string>& seen,
              std::vector<std::string>& problems) {
  ModelConfig model = cfg.model;
  model.n_items = 1;  // not known until the dataset is loaded
  for (const auto& p : model.problems()) problems.push_back("model: " + p);

  const TrainConfig& t = cfg.train;
  if (t.epochs < 1) problems.emplace_back("train.epochs must be >= 1");
  if (t.batch_size < 1) problems.emplace_back("train.batch_size must be >= 1");
  if (t.patience < 1) problems.emplace_back("train.patience must be >= 1");
  if (t.k < 1) problems.emplace_back("train.k must be >= 1");
  if (t.threads < 1) problems.emplace_back("train.threads must be >= 1");
  if (!(t.adam.lr > 0.0)) problems.emplace_back("train.lr must be > 0");
  if (t.adam.beta1 < 0.0 || t.adam.beta1 >= 1.0) problems.emplace_back("train.beta1 must be in [0, 1)");
  if (t.adam.beta2 < 0.0 || t.adam.beta2 >= 1.0) problems.emplace_back("train.beta2 must be in [0, 1)");
  if (!(t.adam.epsilon > 0.0)) problems.emplace_back("train.adam_epsilon must be > 0");

  const bool has_path = seen.count("data.path") != 0;
  const bool has_synth = cfg.data.synthetic.has_value();
  if (!has_path && !has_synth) {
    problems.emplace_back("data: no dataset given; set data.path or data.synthetic");
  } else if (has_path && has_synth) {
    problems.emplace_back("data: data.path and synthetic keys are mutually exclusive");
  } else if (has_synth) {
    if (seen.count("data.synthetic") == 0)
      problems.emplace_back("data: synthetic keys given without data.synthetic = cyclic|markov");
    const SyntheticSpec& s = *cfg.data.synthetic;
    if (s.n_items < 2) problems.emplace_back("data.n_items must be >= 2");
    if (s.n_users < 1) problems.emplace_back("data.n_users must be >= 1");
    if (s.seq_len < 4) problems.emplace_back("data.seq_len must be >= 4 for a leave-one-out split");
    if (s.markov_branching < 1) problems.emplace_back("data.markov_branching must be >= 1");
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::vector<std::string> problems;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') {
        problems.push_back(where + "unterminated section header");
        continue;
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "model" && section != "train" && section != "data" && section != "output")
        problems.push_back(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      problems.push_back(where + "expected key = value");
      continue;
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) {
      problems.push_back(where + "unknown key '" + full + "'");
      continue;
    }
    if (!seen.insert(full).second) {
      problems.push_back(where + "duplicate key '" + full + "'");
      continue;
    }
    if (std::string err = it->second(cfg, value); !err.empty())
      problems.push_back(where + full + ": " + err);
  }
  validate(cfg, seen, problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));

  const auto resolve = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative() && !base_dir.empty()) p = base_dir / p;
  };
  resolve(cfg.data.path);
  resolve(cfg.metrics_path);
  resolve(cfg.checkpoint_path);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file " + path.string()});
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), path.parent_path());
}

std::string default_config_text() {
  return R"(# linrec training configuration. Paths are relative to this file.

[model]
mechanism = linrec            # standard | linrec | softmax-twice
mask_policy = padding_zero_rows  # none | padding_zero_rows
max_len = 50                  # padded sequence length N
hidden = 64                   # model width d
heads = 2                     # must divide hidden
layers = 2
inner = 256                   # feed-forward width
dropout = 0.2
epsilon = 1e-12               # L2 normalization floor
layer_norm_epsilon = 1e-12
init_std = 0.02               # Gaussian init standard deviation

[train]
epochs = 100
batch_size = 2048
patience = 10                 # epochs without validation NDCG@k gain before stopping
k = 10                        # cutoff for Recall@k and NDCG@k
lr = 0.001
beta1 = 0.9
beta2 = 0.999
adam_epsilon = 1e-8
seed = 2024
threads = 1                   # evaluation worker threads
all_prefixes = false          # add every shorter training prefix as an example

[data]
# Either a TSV log (user <TAB> item <TAB> timestamp per line) ...
# path = interactions.tsv
# ... or a synthetic dataset:
# synthetic = cyclic          # cyclic | markov
# n_users = 200
# n_items = 50
# seq_len = 20
# seed = 7
# markov_branching = 3

[output]
metrics = metrics.csv
checkpoint = model.ckpt
)";
}

InteractionLog load_dataset(const DataSource& source) {
  if (source.synthetic) return make_synthetic(*source.synthetic);
  if (source.path.empty()) throw ConfigError({"data: no dataset given"});
  if (!std::filesystem::exists(source.path))
    throw ConfigError({"data.path: file not found: " + source.path.string()});
  return load_log(source.path);
}

}  // namespace linrec::cli
