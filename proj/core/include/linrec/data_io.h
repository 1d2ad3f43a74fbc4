// SPDX-License-Identifier: Apache-2.0
//
// Interaction logs (TSV `user \t item \t timestamp`), dense id remapping,
// synthetic desk-scale datasets and padded batch streams.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "linrec/matrix.h"
#include "linrec/sequence.h"

namespace linrec {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct UserHistory {
  std::vector<ItemId> items;             // chronological
  std::vector<std::int64_t> timestamps;  // parallel to items
};

/// Users and items are dense from 1; index 0 of `users` is dense user 1.
struct InteractionLog {
  std::vector<UserHistory> users;
  std::vector<std::uint64_t> raw_user_ids;  // dense user id - 1 -> raw id
  std::vector<std::uint64_t> raw_item_ids;  // dense item id - 1 -> raw id
  std::size_t item_count = 0;

  std::size_t user_count() const { return users.size(); }
  std::size_t interaction_count() const;
  double sparsity() const;
};

/// 1 - interactions / (users * items).
double sparsity(std::size_t interactions, std::size_t users, std::size_t items);

InteractionLog load_log(const std::filesystem::path& path);
InteractionLog parse_log(std::istream& in);
/// Canonical form: dense ids, users ascending, each user's records in order.
void write_log(const InteractionLog& log, std::ostream& out);
void write_log(const InteractionLog& log, const std::filesystem::path& path);

enum class SyntheticPattern { cyclic, markov };

struct SyntheticSpec {
  SyntheticPattern pattern = SyntheticPattern::cyclic;
  std::size_t n_users = 200;
  std::size_t n_items = 50;
  std::size_t seq_len = 20;
  std::uint64_t seed = 7;
  std::size_t markov_branching = 3;  // successors per item in the markov table
};

SyntheticPattern parse_pattern(const std::string& text);

/// Cyclic successor: (i mod n_items) + 1.
ItemId cyclic_successor(ItemId item, std::size_t n_items);

/// Row i (1-based item id) holds next-item probabilities; row/column 0 unused.
Matrix markov_table(const SyntheticSpec& spec);

InteractionLog make_synthetic(const SyntheticSpec& spec);

/// Yields padded SequenceBatches over a list of examples; deterministic for a
/// given shuffle seed. A seed of nullopt keeps the input order.
class BatchStream {
 public:
  BatchStream(std::vector<Example> examples, std::size_t max_len, std::size_t batch_size,
              std::optional<std::uint64_t> shuffle_seed = std::nullopt);

  std::optional<SequenceBatch> next();
  std::size_t batch_count() const;

 private:
  std::vector<Example> examples_;
  std::size_t max_len_;
  std::size_t batch_size_;
  std::size_t cursor_ = 0;
};

SequenceBatch make_batch(const std::vector<Example>& examples, std::size_t max_len);

}  // namespace linrec
