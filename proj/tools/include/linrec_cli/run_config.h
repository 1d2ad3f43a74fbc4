// SPDX-License-Identifier: Apache-2.0
//
// Training run configuration: a flat `key = value` file split into
// [model], [train], [data] and [output] sections. Every key has a default;
// see default_config_text() for the full annotated list.

#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "linrec/data_io.h"
#include "linrec/recommender.h"
#include "linrec/transformer.h"

namespace linrec::cli {

/// Collects every problem found in a config before giving up.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct DataSource {
  std::filesystem::path path;               // TSV interaction log
  std::optional<SyntheticSpec> synthetic;   // used when no path is given
};

struct RunConfig {
  ModelConfig model;  // n_items is filled in from the dataset
  TrainConfig train;
  bool all_prefixes = false;
  DataSource data;
  std::filesystem::path metrics_path = "metrics.csv";
  std::filesystem::path checkpoint_path = "model.ckpt";
};

/// Relative paths in the text are resolved against `base_dir`.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// The annotated default configuration, itself a valid config file apart
/// from its missing dataset.
std::string default_config_text();

/// Reads the TSV log or generates the synthetic one.
InteractionLog load_dataset(const DataSource& source);

}  // namespace linrec::cli
