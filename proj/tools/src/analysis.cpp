// SPDX-License-Identifier: Apache-2.0
//
// Heatmap export, the score-entropy comparison and synthetic data output.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "linrec/checkpoint.h"
#include "linrec_cli/commands.h"

namespace linrec::cli {
namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string g10(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_binary(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

Heatmap compute_heatmap(const ModelParams& params, const ModelConfig& cfg,
                        const std::vector<ItemId>& sequence, std::size_t layer, std::size_t head) {
  if (layer >= cfg.layers)
    throw std::invalid_argument("layer " + std::to_string(layer) + " out of range (model has " +
                                std::to_string(cfg.layers) + ")");
  if (head >= cfg.heads)
    throw std::invalid_argument("head " + std::to_string(head) + " out of range (model has " +
                                std::to_string(cfg.heads) + ")");
  if (sequence.empty()) throw std::invalid_argument("sequence is empty");
  if (sequence.size() > cfg.max_len)
    throw std::invalid_argument("sequence of length " + std::to_string(sequence.size()) +
                                " exceeds the model's N=" + std::to_string(cfg.max_len));
  for (ItemId id : sequence) {
    if (id == kPaddingId || id > cfg.n_items)
      throw std::invalid_argument("item id " + std::to_string(id) + " outside 1.." +
                                  std::to_string(cfg.n_items));
  }

  const Sequence seq = make_sequence(sequence, cfg.max_len);
  std::vector<HeadProbe> probes;
  Rng unused(0);
  encode(seq, params, cfg, Mode::eval, unused, &probes);
  const auto it = std::find_if(probes.begin(), probes.end(), [&](const HeadProbe& p) {
    return p.layer == layer && p.head == head;
  });
  const Matrix& q = it->q;
  const Matrix& k = it->k;

  Matrix full(1, 1);
  switch (cfg.mechanism) {
    case Mechanism::standard: {
      const double inv_root = 1.0 / std::sqrt(static_cast<double>(q.cols()));
      std::vector<std::uint8_t> key_mask;
      if (cfg.mask_policy == MaskPolicy::padding_zero_rows) key_mask = seq.real_mask();
      full = softmax_rows(scale(matmul_transposed(q, k), inv_root), key_mask);
      break;
    }
    case Mechanism::linrec:
      full = linrec_scores(q, k, cfg.epsilon);
      break;
    case Mechanism::softmax_twice:
      full = matmul_transposed(softmax_rows(q), softmax_cols(k));
      break;
  }
  const std::size_t n = seq.true_len;
  Heatmap map{slice_cols(slice_rows(full, 0, n), 0, n), layer, head, cfg.mechanism, 0.0, 0.0};
  const auto [lo, hi] = std::minmax_element(map.scores.data().begin(), map.scores.data().end());
  map.min_value = *lo;
  map.max_value = *hi;
  return map;
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << g17(m(i, j));
    out << '\n';
  }
}

Matrix read_matrix_csv(std::istream& in) {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t count = 0;
    std::stringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument("bad CSV cell '" + cell + "'");
      ++count;
    }
    if (rows == 0) cols = count;
    if (count != cols) throw std::invalid_argument("ragged CSV row " + std::to_string(rows + 1));
    ++rows;
  }
  if (rows == 0) throw std::invalid_argument("empty CSV matrix");
  return Matrix(rows, cols, std::move(values));
}

void write_pgm(std::ostream& out, const Matrix& m) {
  constexpr std::size_t cell = 8;
  double lo = INFINITY;
  double hi = -INFINITY;
  for (double v : m.data()) {
    lo = std::min(lo, std::max(v, 0.0));
    hi = std::max(hi, std::max(v, 0.0));
  }
  const double range = hi - lo;
  out << "P5\n" << m.cols() * cell << ' ' << m.rows() * cell << "\n255\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::string line;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double t = range > 0.0 ? (std::max(m(i, j), 0.0) - lo) / range : 0.5;
      line.append(cell, static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (1.0 - t)))));
    }
    for (std::size_t r = 0; r < cell; ++r) out << line;
  }
}

int cmd_heatmap(const HeatmapOptions& options, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(options.checkpoint);
  const Heatmap map =
      compute_heatmap(ck.params, ck.config, options.sequence, options.layer, options.head);
  const std::filesystem::path csv = options.out_prefix.string() + ".csv";
  const std::filesystem::path pgm = options.out_prefix.string() + ".pgm";
  {
    std::ofstream f = open_binary(csv);
    write_matrix_csv(f, map.scores);
  }
  {
    std::ofstream f = open_binary(pgm);
    write_pgm(f, map.scores);
  }
  out << "mechanism " << to_string(map.mechanism) << ", layer " << map.layer << ", head "
      << map.head << ", " << map.scores.rows() << "x" << map.scores.cols() << ", range ["
      << g10(map.min_value) << ", " << g10(map.max_value) << "]\nwrote " << csv.string()
      << " and " << pgm.string() << '\n';
  return kExitOk;
}

EntropyReport run_entropy(const EntropyOptions& options) {
  if (options.n < 1 || options.d < 1 || options.samples < 1)
    throw std::invalid_argument("entropy: n, d and samples must all be >= 1");
  Rng rng(options.seed);
  EntropyReport report;
  std::size_t ge = 0;
  for (std::size_t s = 0; s < options.samples; ++s) {
    const Matrix q = gaussian_init(rng, options.n, options.d, 0.0, 1.0);
    const Matrix k = gaussian_init(rng, options.n, options.d, 0.0, 1.0);
    const Matrix v(options.n, options.d);
    const auto standard = row_entropies(*standard_attention(q, k, v, {}, true).scores);
    const auto linear = row_entropies(linrec_scores(q, k));
    for (std::size_t i = 0; i < options.n; ++i) {
      report.standard.push_back(standard[i]);
      report.linrec.push_back(linear[i]);
      if (linear[i] >= standard[i]) ++ge;
    }
  }
  report.fraction_linrec_ge = static_cast<double>(ge) / static_cast<double>(report.linrec.size());
  return report;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

void write_entropy_summary(std::ostream& out, const EntropyReport& report) {
  out << "statistic,standard,linrec\n";
  const std::pair<const char*, double> qs[] = {
      {"min", 0.0}, {"q25", 0.25}, {"median", 0.5}, {"q75", 0.75}, {"max", 1.0}};
  for (const auto& [name, q] : qs)
    out << name << ',' << g10(quantile(report.standard, q)) << ','
        << g10(quantile(report.linrec, q)) << '\n';
  out << "fraction_linrec_ge_standard,," << g10(report.fraction_linrec_ge) << '\n';
}

int cmd_entropy(const EntropyOptions& options, std::ostream& out) {
  const EntropyReport report = run_entropy(options);
  if (!options.rows_out.empty()) {
    std::ofstream f = open_binary(options.rows_out);
    f << "sample,row,standard_entropy,linrec_entropy\n";
    for (std::size_t i = 0; i < report.linrec.size(); ++i)
      f << i / options.n << ',' << i % options.n << ',' << g17(report.standard[i]) << ','
        << g17(report.linrec[i]) << '\n';
  }
  write_entropy_summary(out, report);
  return kExitOk;
}

int cmd_synth(const SynthOptions& options, std::ostream& out) {
  if (options.spec.n_items < 2) throw std::invalid_argument("synth: n_items must be >= 2");
  const InteractionLog log = make_synthetic(options.spec);
  if (options.out.empty()) {
    write_log(log, out);
  } else {
    if (options.out.has_parent_path()) std::filesystem::create_directories(options.out.parent_path());
    write_log(log, options.out);
  }
  return kExitOk;
}

}  // namespace linrec::cli
