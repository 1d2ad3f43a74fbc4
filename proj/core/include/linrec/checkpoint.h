// SPDX-License-Identifier: Apache-2.0
//
// Binary parameter checkpoints. Layout (all integers little-endian):
//
//   "LINRECCK"                      8-byte magic
//   u32 version                     currently 1
//   u32 n_meta, then n_meta x { u32 len, key bytes, u32 len, value bytes }
//   u32 n_tensors, then n_tensors x { u32 len, name bytes, u64 rows, u64 cols,
//                                     rows*cols IEEE-754 doubles, row-major }
//
// Metadata carries the model config under "model.*" keys so a checkpoint
// can be rebuilt without a separate config file.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "linrec/transformer.h"

namespace linrec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::map<std::string, std::string> metadata;
};

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params,
                     const std::map<std::string, std::string>& extra_metadata = {});

/// Throws std::runtime_error on I/O failure, bad magic, unsupported version,
/// or tensors whose names or shapes disagree with the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::map<std::string, std::string> config_to_metadata(const ModelConfig& cfg);
ModelConfig config_from_metadata(const std::map<std::string, std::string>& meta);

}  // namespace linrec
