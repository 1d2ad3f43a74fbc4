// SPDX-License-Identifier: Apache-2.0

#include "linrec/sequence.h"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace linrec {

std::vector<std::uint8_t> Sequence::real_mask() const {
  std::vector<std::uint8_t> mask(items.size(), 0);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(true_len), 1);
  return mask;
}

void SequenceBatch::validate(std::size_t max_len) const {
  if (targets.size() != sequences.size()) {
    throw std::invalid_argument("batch: " + std::to_string(targets.size()) + " targets for " +
                                std::to_string(sequences.size()) + " sequences");
  }
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    const Sequence& s = sequences[b];
    if (s.items.size() != max_len || s.true_len < 1 || s.true_len > max_len) {
      throw std::invalid_argument("batch row " + std::to_string(b) + ": bad length");
    }
    for (std::size_t t = 0; t < max_len; ++t) {
      if ((t < s.true_len) == (s.items[t] == kPaddingId)) {
        throw std::invalid_argument("batch row " + std::to_string(b) +
                                    ": padding layout broken at position " + std::to_string(t));
      }
    }
    if (targets[b] == kPaddingId) {
      throw std::invalid_argument("batch row " + std::to_string(b) + ": target is padding");
    }
  }
}

Sequence make_sequence(const std::vector<ItemId>& history, std::size_t max_len) {
  if (history.empty()) throw std::invalid_argument("make_sequence: empty history");
  if (max_len == 0) throw std::invalid_argument("make_sequence: max_len must be positive");
  Sequence seq;
  seq.items.assign(max_len, kPaddingId);
  const std::size_t keep = std::min(history.size(), max_len);
  std::copy(history.end() - static_cast<std::ptrdiff_t>(keep), history.end(), seq.items.begin());
  seq.true_len = keep;
  return seq;
}

}  // namespace linrec
