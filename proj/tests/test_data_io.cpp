// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "linrec/data_io.h"

using namespace linrec;

namespace {

InteractionLog log_from(const std::string& tsv) {
  std::istringstream in(tsv);
  return parse_log(in);
}

std::string text_of(const InteractionLog& log) {
  std::ostringstream out;
  write_log(log, out);
  return out.str();
}

std::size_t parse_error_line(const std::string& tsv) {
  try {
    log_from(tsv);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

std::vector<Example> numbered_examples(std::size_t count) {
  std::vector<Example> out;
  for (std::size_t u = 0; u < count; ++u)
    out.push_back({u, {static_cast<ItemId>(u + 1)}, static_cast<ItemId>(u + 2)});
  return out;
}

}  // namespace

TEST(ParseLog, ReportsOffendingLine) {
  EXPECT_EQ(parse_error_line("1\t2\t3\n4\t5\n"), 2u);
  EXPECT_EQ(parse_error_line("1\t2\t3\n\n1\t2\t3\t4\n"), 3u);
  EXPECT_EQ(parse_error_line("1\tx\t3\n"), 1u);
  EXPECT_EQ(parse_error_line("1\t2\t-\n"), 1u);
  EXPECT_EQ(parse_error_line("-1\t2\t3\n"), 1u);
  try {
    log_from("1\t2\t3\n4 5 6\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(ParseLog, RejectsEmptyInput) {
  EXPECT_THROW(log_from(""), std::runtime_error);
  EXPECT_THROW(log_from("\n\n"), std::runtime_error);
  EXPECT_THROW(load_log("/nonexistent/linrec/log.tsv"), std::runtime_error);
}

TEST(ParseLog, TwoLineLogIsFullyDense) {
  const InteractionLog log = log_from("7\t100\t1\n7\t200\t2\n");
  EXPECT_EQ(log.user_count(), 1u);
  EXPECT_EQ(log.item_count, 2u);
  EXPECT_EQ(log.sparsity(), 0.0);
}

TEST(ParseLog, MovieLensScaleSparsity) {
  EXPECT_NEAR(100.0 * sparsity(1000209, 6041, 3884), 95.74, 0.005);
}

TEST(ParseLog, OrdersByTimestampThenInputOrder) {
  const InteractionLog log = log_from("1\t30\t5\n1\t10\t2\n1\t20\t2\n1\t40\t1\n");
  // Raw items 10,20,30,40 become 1,2,3,4.
  EXPECT_EQ(log.users[0].items, (std::vector<ItemId>{4, 1, 2, 3}));
  EXPECT_EQ(log.users[0].timestamps, (std::vector<std::int64_t>{1, 2, 2, 5}));
}

TEST(ParseLog, RemappingIsBijective) {
  Rng rng(1);
  std::string tsv;
  std::set<std::uint64_t> raw_items;
  for (int i = 0; i < 500; ++i) {
    const std::uint64_t item = 1000 + rng.index(5000) * 7;
    raw_items.insert(item);
    tsv += std::to_string(rng.index(40)) + "\t" + std::to_string(item) + "\t" +
           std::to_string(rng.index(100)) + "\n";
  }
  const InteractionLog log = log_from(tsv);
  EXPECT_EQ(log.item_count, raw_items.size());
  std::set<std::uint64_t> seen_raw;
  std::set<ItemId> seen_dense;
  for (const auto& user : log.users) {
    for (ItemId id : user.items) {
      ASSERT_GE(id, 1u);
      ASSERT_LE(id, log.item_count);
      seen_dense.insert(id);
      seen_raw.insert(log.raw_item_ids[id - 1]);
    }
  }
  EXPECT_EQ(seen_raw, raw_items);
  EXPECT_EQ(seen_dense.size(), raw_items.size());
  EXPECT_EQ(std::set<std::uint64_t>(log.raw_item_ids.begin(), log.raw_item_ids.end()).size(),
            log.raw_item_ids.size());
}

TEST(WriteLog, CanonicalRoundTripIsByteIdentical) {
  const InteractionLog log = log_from("9\t5\t3\n2\t5\t1\r\n9\t8\t1\n2\t6\t1\n");
  const std::string canonical = text_of(log);
  EXPECT_EQ(text_of(log_from(canonical)), canonical);

  const auto path = std::filesystem::temp_directory_path() /
                    ("linrec_rt_" + std::to_string(::getpid()) + ".tsv");
  write_log(log, path);
  EXPECT_EQ(text_of(load_log(path)), canonical);
  std::filesystem::remove(path);
}

TEST(Synthetic, CyclicPairsFollowSuccessor) {
  SyntheticSpec spec;
  spec.n_items = 50;
  spec.seq_len = 20;
  spec.n_users = 100;
  const InteractionLog log = make_synthetic(spec);
  EXPECT_EQ(log.item_count, 50u);
  for (const auto& user : log.users) {
    ASSERT_EQ(user.items.size(), 20u);
    for (std::size_t t = 1; t < user.items.size(); ++t)
      EXPECT_EQ(user.items[t], user.items[t - 1] % 50 + 1);
  }
  EXPECT_EQ(cyclic_successor(50, 50), 1u);
  EXPECT_EQ(cyclic_successor(7, 50), 8u);
}

TEST(Synthetic, DeterministicForSeed) {
  SyntheticSpec spec;
  spec.pattern = SyntheticPattern::markov;
  EXPECT_EQ(text_of(make_synthetic(spec)), text_of(make_synthetic(spec)));
  SyntheticSpec other = spec;
  other.seed = spec.seed + 1;
  EXPECT_NE(text_of(make_synthetic(spec)), text_of(make_synthetic(other)));
}

TEST(Synthetic, MarkovFrequenciesMatchTable) {
  SyntheticSpec spec;
  spec.pattern = SyntheticPattern::markov;
  spec.n_items = 10;
  spec.n_users = 1000;
  spec.seq_len = 101;  // 100 transitions per user, 1e5 in total
  const Matrix table = markov_table(spec);
  const InteractionLog log = make_synthetic(spec);

  Matrix counts(11, 11);
  std::vector<double> from(11, 0.0);
  for (const auto& user : log.users) {
    for (std::size_t t = 1; t < user.items.size(); ++t) {
      counts(user.items[t - 1], user.items[t]) += 1.0;
      from[user.items[t - 1]] += 1.0;
    }
  }
  double total = 0.0;
  for (std::size_t i = 1; i <= 10; ++i) {
    total += from[i];
    double row = 0.0;
    for (std::size_t j = 1; j <= 10; ++j) {
      row += table(i, j);
      ASSERT_GT(from[i], 0.0);
      const double p = table(i, j);
      const double bound = std::max(0.02, 5.0 * std::sqrt(p * (1.0 - p) / from[i]));
      EXPECT_NEAR(counts(i, j) / from[i], p, bound) << i << "->" << j;
    }
    EXPECT_NEAR(row, 1.0, 1e-12);
  }
  EXPECT_EQ(total, 1e5);
}

TEST(Synthetic, RejectsTinyVocabulary) {
  SyntheticSpec spec;
  spec.n_items = 1;
  EXPECT_THROW(make_synthetic(spec), std::invalid_argument);
  EXPECT_THROW(parse_pattern("zipf"), std::invalid_argument);
}

TEST(Padding, ShortSequenceGetsTrailingZeros) {
  const Sequence s = make_sequence({4, 5, 6}, 5);
  EXPECT_EQ(s.items, (std::vector<ItemId>{4, 5, 6, 0, 0}));
  EXPECT_EQ(s.true_len, 3u);
  EXPECT_EQ(s.last_position(), 2u);
  EXPECT_EQ(s.real_mask(), (std::vector<std::uint8_t>{1, 1, 1, 0, 0}));
}

TEST(Padding, LongSequenceKeepsRecentItems) {
  const Sequence s = make_sequence({1, 2, 3, 4, 5, 6, 7}, 5);
  EXPECT_EQ(s.items, (std::vector<ItemId>{3, 4, 5, 6, 7}));
  EXPECT_EQ(s.true_len, 5u);
}

TEST(BatchStream, SplitsIntoFourFourTwo) {
  BatchStream stream(numbered_examples(10), 5, 4);
  EXPECT_EQ(stream.batch_count(), 3u);
  std::vector<std::size_t> sizes;
  while (auto batch = stream.next()) {
    batch->validate(5);
    for (ItemId t : batch->targets) EXPECT_NE(t, kPaddingId);
    sizes.push_back(batch->size());
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4, 2}));
}

TEST(BatchStream, ShuffleIsSeedDeterministic) {
  auto order = [](std::optional<std::uint64_t> seed) {
    BatchStream stream(numbered_examples(50), 4, 8, seed);
    std::vector<std::size_t> users;
    while (auto batch = stream.next()) users.insert(users.end(), batch->users.begin(), batch->users.end());
    return users;
  };
  EXPECT_EQ(order(3), order(3));
  EXPECT_NE(order(3), order(4));
  std::vector<std::size_t> identity(50);
  for (std::size_t i = 0; i < 50; ++i) identity[i] = i;
  EXPECT_EQ(order(std::nullopt), identity);
}

TEST(BatchStream, RejectsDegenerateSettings) {
  EXPECT_THROW(BatchStream(numbered_examples(3), 1, 2), std::invalid_argument);
  EXPECT_THROW(BatchStream(numbered_examples(3), 4, 0), std::invalid_argument);
  SequenceBatch bad;
  bad.sequences.push_back(make_sequence({1, 2}, 4));
  bad.targets.push_back(kPaddingId);
  bad.users.push_back(0);
  EXPECT_THROW(bad.validate(4), std::invalid_argument);
}
