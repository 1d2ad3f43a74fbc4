// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace linrec {

/// Dense item id; 0 is reserved for padding.
using ItemId = std::uint32_t;
inline constexpr ItemId kPaddingId = 0;

/// One right-padded item sequence: real items occupy [0, true_len).
struct Sequence {
  std::vector<ItemId> items;
  std::size_t true_len = 0;

  std::size_t last_position() const { return true_len - 1; }
  std::vector<std::uint8_t> real_mask() const;
};

/// A (history, next item) training or evaluation pair for one user.
struct Example {
  std::size_t user = 0;
  std::vector<ItemId> history;
  ItemId target = kPaddingId;
};

struct SequenceBatch {
  std::vector<Sequence> sequences;
  std::vector<ItemId> targets;
  std::vector<std::size_t> users;  // dense user id per row, for reporting

  std::size_t size() const { return sequences.size(); }
  /// Throws if a sequence breaks the padding layout or a target is padding.
  void validate(std::size_t max_len) const;
};

/// Keeps the most recent `max_len` items of `history` and right-pads with 0.
Sequence make_sequence(const std::vector<ItemId>& history, std::size_t max_len);

}  // namespace linrec
