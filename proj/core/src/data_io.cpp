// SPDX-License-Identifier: Apache-2.0

#include "linrec/data_io.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>

namespace linrec {
namespace {

struct RawRecord {
  std::uint64_t user;
  std::uint64_t item;
  std::int64_t timestamp;
  std::size_t order;
};

template <typename T>
T parse_field(std::string_view text, std::size_t line, const char* what) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::vector<std::uint64_t> sorted_unique(std::vector<std::uint64_t> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::size_t dense_index(const std::vector<std::uint64_t>& sorted, std::uint64_t raw) {
  return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), raw) -
                                  sorted.begin());
}

}  // namespace

std::size_t InteractionLog::interaction_count() const {
  std::size_t n = 0;
  for (const auto& u : users) n += u.items.size();
  return n;
}

double InteractionLog::sparsity() const {
  return linrec::sparsity(interaction_count(), user_count(), item_count);
}

double sparsity(std::size_t interactions, std::size_t users, std::size_t items) {
  if (users == 0 || items == 0) return 0.0;
  return 1.0 - static_cast<double>(interactions) /
                   (static_cast<double>(users) * static_cast<double>(items));
}

InteractionLog parse_log(std::istream& in) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError(line_no, "expected 3 tab-separated fields, got " +
                                    std::to_string(fields.size()));
    }
    records.push_back({parse_field<std::uint64_t>(fields[0], line_no, "user id"),
                       parse_field<std::uint64_t>(fields[1], line_no, "item id"),
                       parse_field<std::int64_t>(fields[2], line_no, "timestamp"),
                       records.size()});
  }
  if (records.empty()) throw std::runtime_error("interaction log is empty");

  std::vector<std::uint64_t> user_ids;
  std::vector<std::uint64_t> item_ids;
  user_ids.reserve(records.size());
  item_ids.reserve(records.size());
  for (const auto& r : records) {
    user_ids.push_back(r.user);
    item_ids.push_back(r.item);
  }

  InteractionLog log;
  log.raw_user_ids = sorted_unique(std::move(user_ids));
  log.raw_item_ids = sorted_unique(std::move(item_ids));
  log.item_count = log.raw_item_ids.size();
  log.users.resize(log.raw_user_ids.size());

  std::stable_sort(records.begin(), records.end(), [](const RawRecord& a, const RawRecord& b) {
    if (a.user != b.user) return a.user < b.user;
    return a.timestamp < b.timestamp;
  });
  for (const auto& r : records) {
    UserHistory& h = log.users[dense_index(log.raw_user_ids, r.user)];
    h.items.push_back(static_cast<ItemId>(dense_index(log.raw_item_ids, r.item) + 1));
    h.timestamps.push_back(r.timestamp);
  }
  return log;
}

InteractionLog load_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open interaction log " + path.string());
  return parse_log(in);
}

void write_log(const InteractionLog& log, std::ostream& out) {
  for (std::size_t u = 0; u < log.users.size(); ++u) {
    const UserHistory& h = log.users[u];
    for (std::size_t t = 0; t < h.items.size(); ++t)
      out << (u + 1) << '\t' << h.items[t] << '\t' << h.timestamps[t] << '\n';
  }
}

void write_log(const InteractionLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_log(log, out);
}

SyntheticPattern parse_pattern(const std::string& text) {
  if (text == "cyclic") return SyntheticPattern::cyclic;
  if (text == "markov") return SyntheticPattern::markov;
  throw std::invalid_argument("unknown synthetic pattern '" + text + "'");
}

ItemId cyclic_successor(ItemId item, std::size_t n_items) {
  return static_cast<ItemId>((item % n_items) + 1);
}

Matrix markov_table(const SyntheticSpec& spec) {
  const std::size_t n = spec.n_items;
  const std::size_t branching = std::min(spec.markov_branching, n);
  Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  Matrix table(n + 1, n + 1);
  std::vector<ItemId> candidates(n);
  std::iota(candidates.begin(), candidates.end(), ItemId{1});
  for (std::size_t i = 1; i <= n; ++i) {
    std::shuffle(candidates.begin(), candidates.end(), rng.engine());
    double total = 0.0;
    for (std::size_t b = 0; b < branching; ++b) {
      const double w = rng.uniform(0.2, 1.0);
      table(i, candidates[b]) = w;
      total += w;
    }
    for (std::size_t j = 1; j <= n; ++j) table(i, j) /= total;
  }
  return table;
}

InteractionLog make_synthetic(const SyntheticSpec& spec) {
  if (spec.n_items < 2) throw std::invalid_argument("synthetic: n_items must be >= 2");
  if (spec.n_users < 1 || spec.seq_len < 1) {
    throw std::invalid_argument("synthetic: n_users and seq_len must be >= 1");
  }
  Rng rng(spec.seed);
  InteractionLog log;
  log.item_count = spec.n_items;
  log.raw_item_ids.resize(spec.n_items);
  std::iota(log.raw_item_ids.begin(), log.raw_item_ids.end(), std::uint64_t{1});
  log.raw_user_ids.resize(spec.n_users);
  std::iota(log.raw_user_ids.begin(), log.raw_user_ids.end(), std::uint64_t{1});
  log.users.resize(spec.n_users);

  std::vector<std::discrete_distribution<std::size_t>> transitions;
  if (spec.pattern == SyntheticPattern::markov) {
    const Matrix table = markov_table(spec);
    transitions.reserve(spec.n_items + 1);
    for (std::size_t i = 0; i <= spec.n_items; ++i) {
      auto row = table.row(i);
      if (i == 0) {
        transitions.emplace_back();
        continue;
      }
      transitions.emplace_back(row.begin(), row.end());
    }
  }

  for (std::size_t u = 0; u < spec.n_users; ++u) {
    UserHistory& h = log.users[u];
    auto item = static_cast<ItemId>(rng.index(spec.n_items) + 1);
    for (std::size_t t = 0; t < spec.seq_len; ++t) {
      h.items.push_back(item);
      h.timestamps.push_back(static_cast<std::int64_t>(t + 1));
      if (spec.pattern == SyntheticPattern::cyclic) {
        item = cyclic_successor(item, spec.n_items);
      } else {
        item = static_cast<ItemId>(transitions[item](rng.engine()));
      }
    }
  }
  return log;
}

BatchStream::BatchStream(std::vector<Example> examples, std::size_t max_len,
                         std::size_t batch_size, std::optional<std::uint64_t> shuffle_seed)
    : examples_(std::move(examples)), max_len_(max_len), batch_size_(batch_size) {
  if (max_len < 2) throw std::invalid_argument("batches: N must be >= 2");
  if (batch_size < 1) throw std::invalid_argument("batches: batch size must be >= 1");
  if (shuffle_seed) {
    std::mt19937_64 engine(*shuffle_seed);
    std::shuffle(examples_.begin(), examples_.end(), engine);
  }
}

std::size_t BatchStream::batch_count() const {
  return (examples_.size() + batch_size_ - 1) / batch_size_;
}

std::optional<SequenceBatch> BatchStream::next() {
  if (cursor_ >= examples_.size()) return std::nullopt;
  const std::size_t end = std::min(cursor_ + batch_size_, examples_.size());
  std::vector<Example> slice(examples_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                             examples_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return make_batch(slice, max_len_);
}

SequenceBatch make_batch(const std::vector<Example>& examples, std::size_t max_len) {
  SequenceBatch batch;
  batch.sequences.reserve(examples.size());
  for (const Example& e : examples) {
    batch.sequences.push_back(make_sequence(e.history, max_len));
    batch.targets.push_back(e.target);
    batch.users.push_back(e.user);
  }
  batch.validate(max_len);
  return batch;
}

}  // namespace linrec
