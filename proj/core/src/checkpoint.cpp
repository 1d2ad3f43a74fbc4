// SPDX-License-Identifier: Apache-2.0

#include "linrec/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace linrec {
namespace {

constexpr char kMagic[8] = {'L', 'I', 'N', 'R', 'E', 'C', 'C', 'K'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: unexpected end of file");
  return value;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  if (len > (1u << 20)) throw std::runtime_error("checkpoint: implausible string length");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("checkpoint: unexpected end of file");
  return s;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const std::string& require_key(const std::map<std::string, std::string>& meta,
                               const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw std::runtime_error("checkpoint: missing metadata key " + key);
  return it->second;
}

}  // namespace

std::map<std::string, std::string> config_to_metadata(const ModelConfig& cfg) {
  return {
      {"model.mechanism", std::string(to_string(cfg.mechanism))},
      {"model.mask_policy", std::string(to_string(cfg.mask_policy))},
      {"model.n_items", std::to_string(cfg.n_items)},
      {"model.max_len", std::to_string(cfg.max_len)},
      {"model.hidden", std::to_string(cfg.hidden)},
      {"model.heads", std::to_string(cfg.heads)},
      {"model.layers", std::to_string(cfg.layers)},
      {"model.inner", std::to_string(cfg.inner)},
      {"model.dropout", format_double(cfg.dropout)},
      {"model.epsilon", format_double(cfg.epsilon)},
      {"model.layer_norm_epsilon", format_double(cfg.layer_norm_epsilon)},
      {"model.init_std", format_double(cfg.init_std)},
  };
}

ModelConfig config_from_metadata(const std::map<std::string, std::string>& meta) {
  ModelConfig cfg;
  cfg.mechanism = parse_mechanism(require_key(meta, "model.mechanism"));
  cfg.mask_policy = parse_mask_policy(require_key(meta, "model.mask_policy"));
  cfg.n_items = std::stoull(require_key(meta, "model.n_items"));
  cfg.max_len = std::stoull(require_key(meta, "model.max_len"));
  cfg.hidden = std::stoull(require_key(meta, "model.hidden"));
  cfg.heads = std::stoull(require_key(meta, "model.heads"));
  cfg.layers = std::stoull(require_key(meta, "model.layers"));
  cfg.inner = std::stoull(require_key(meta, "model.inner"));
  cfg.dropout = std::stod(require_key(meta, "model.dropout"));
  cfg.epsilon = std::stod(require_key(meta, "model.epsilon"));
  cfg.layer_norm_epsilon = std::stod(require_key(meta, "model.layer_norm_epsilon"));
  cfg.init_std = std::stod(require_key(meta, "model.init_std"));
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params,
                     const std::map<std::string, std::string>& extra_metadata) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");

  auto meta = config_to_metadata(cfg);
  for (const auto& [k, v] : extra_metadata) meta.insert_or_assign(k, v);

  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    write_string(out, k);
    write_string(out, v);
  }
  const auto tensors = params.named();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    write_string(out, name);
    write_pod<std::uint64_t>(out, m->rows());
    write_pod<std::uint64_t>(out, m->cols());
    out.write(reinterpret_cast<const char*>(m->data().data()),
              static_cast<std::streamsize>(m->size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: " + path.string() + " is not a linrec checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint ckpt;
  const auto n_meta = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = read_string(in);
    ckpt.metadata[key] = read_string(in);
  }
  ckpt.config = config_from_metadata(ckpt.metadata);
  ckpt.config.validate();

  // Shape template from the config; tensors must match it exactly.
  Rng scratch(0);
  ckpt.params = init_params(ckpt.config, scratch);
  auto slots = ckpt.params.named();
  const auto n_tensors = read_pod<std::uint32_t>(in);
  if (n_tensors != slots.size()) {
    throw std::runtime_error("checkpoint: " + std::to_string(n_tensors) + " tensors, config implies " +
                             std::to_string(slots.size()));
  }
  for (auto& [expected_name, slot] : slots) {
    const std::string name = read_string(in);
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    if (name != expected_name) {
      throw std::runtime_error("checkpoint: expected tensor " + expected_name + ", found " + name);
    }
    if (rows != slot->rows() || cols != slot->cols()) {
      throw std::runtime_error("checkpoint: tensor " + name + " is " + std::to_string(rows) + "x" +
                               std::to_string(cols) + ", config implies " + slot->shape_string());
    }
    in.read(reinterpret_cast<char*>(slot->data().data()),
            static_cast<std::streamsize>(slot->size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor " + name);
  }
  return ckpt;
}

}  // namespace linrec
