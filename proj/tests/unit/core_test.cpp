// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "corpora.hpp"
#include "oracles.hpp"
#include "sikv/core.hpp"

namespace sikv {
namespace {

Timestamp ts(std::uint64_t t) { return Timestamp{t}; }

KeyHistory hist(std::initializer_list<std::pair<const char*, std::uint64_t>> versions) {
  KeyHistory h;
  for (const auto& [v, t] : versions) h.push_back(Version{v, ts(t)});
  return h;
}

TEST(VersionLookup, Examples) {
  EXPECT_EQ(version_lookup({}, ts(7)), std::nullopt);
  EXPECT_EQ(version_lookup(hist({{"2", 4}, {"1", 2}}), ts(3)), "1");
  EXPECT_EQ(version_lookup(hist({{"1", 2}}), ts(5)), "1");
  EXPECT_THROW(version_lookup(hist({{"1", 3}}), ts(3)), ProtocolViolation);
}

TEST(VersionLookup, MatchesMaximumBelowThresholdOracleExhaustively) {
  const auto histories = test_support::all_histories(12, 6);
  std::size_t cases = 0;
  for (const KeyHistory& h : histories) {
    for (std::uint64_t start = 1; start <= 13; ++start) {
      const oracle::Lookup expected = oracle::lookup(h, start);
      if (expected.fault) {
        EXPECT_THROW(version_lookup(h, ts(start)), ProtocolViolation);
      } else {
        EXPECT_EQ(version_lookup(h, ts(start)), expected.value) << to_string(h) << " @" << start;
      }
      ++cases;
    }
  }
  EXPECT_EQ(histories.size(), 2510u);  // sum of C(12,k) for k <= 6
  EXPECT_EQ(cases, 2510u * 13u);
}

TEST(CheckKey, Examples) {
  EXPECT_TRUE(check_key({}, ts(2)));
  EXPECT_TRUE(check_key(hist({{"a", 1}}), ts(4)));
  EXPECT_FALSE(check_key(hist({{"b", 5}, {"a", 1}}), ts(4)));
}

TEST(CanCommit, Examples) {
  EXPECT_TRUE(can_commit({}, {}, {}));
  const Store same{{"x", hist({{"0", 2}})}};
  EXPECT_TRUE(can_commit(same, same, {{"x", {"1", true}}}));
  EXPECT_FALSE(can_commit({{"x", hist({{"9", 6}})}}, {{"x", {}}}, {{"x", {"1", true}}}));
}

TEST(CanCommit, MissingKeyIsContractViolation) {
  EXPECT_THROW(can_commit({}, {{"x", {}}}, {{"x", {"1", true}}}), ContractViolation);
  EXPECT_THROW(can_commit({{"x", {}}}, {}, {{"x", {"1", true}}}), ContractViolation);
}

TEST(CanCommit, IgnoresEntriesNotMarkedUpdated) {
  EXPECT_TRUE(can_commit({{"x", hist({{"9", 6}})}}, {{"x", {}}}, {{"x", {"1", false}}}));
}

TEST(CanCommit, AgreesWithCheckKeyOnEveryCut) {
  for (const KeyHistory& full : test_support::all_histories(8, 4)) {
    for (std::uint64_t t = 1; t <= 9; ++t) {
      for (const KeyHistory& snapshot : oracle::cuts_of(t, full)) {
        const bool expected = check_key(full, ts(t));
        EXPECT_EQ(can_commit({{"k", full}}, {{"k", snapshot}}, {{"k", {"v", true}}}), expected);
      }
    }
  }
}

TEST(ApplyCommit, Examples) {
  EXPECT_EQ(apply_commit({{"x", {}}}, {{"x", {"1", true}}}, ts(3)), (Store{{"x", hist({{"1", 3}})}}));
  const Store base{{"x", hist({{"0", 2}})}};
  EXPECT_EQ(apply_commit(base, {}, ts(4)), base);
  const Store two{{"x", hist({{"0", 2}})}, {"y", {}}};
  EXPECT_EQ(apply_commit(two, {{"y", {"7", true}}}, ts(5)),
            (Store{{"x", hist({{"0", 2}})}, {"y", hist({{"7", 5}})}}));
}

TEST(ApplyCommit, StaleTimestampIsContractViolation) {
  const Store base{{"x", hist({{"0", 4}})}};
  EXPECT_THROW(apply_commit(base, {{"x", {"1", true}}}, ts(4)), ContractViolation);
  EXPECT_THROW(apply_commit(base, {{"x", {"1", true}}}, ts(2)), ContractViolation);
}

TEST(ApplyCommit, PreservesWellFormednessProperty) {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 200; ++round) {
    Store store;
    std::uint64_t now = 0;
    for (int step = 0; step < 20; ++step) {
      WriteSet writes;
      for (const char* k : {"a", "b", "c"}) {
        if (rng() % 2) writes[k] = WriteEntry{std::to_string(rng() % 10), true};
      }
      now += 1 + rng() % 3;
      store = apply_commit(std::move(store), writes, ts(now));
      for (const auto& [k, h] : store) ASSERT_TRUE(is_well_formed(h));
      for (const auto& [k, entry] : writes) {
        ASSERT_EQ(store[k].front(), (Version{entry.value, ts(now)}));
      }
    }
  }
}

TEST(IsCut, Examples) {
  EXPECT_TRUE(is_cut(ts(3), hist({{"a", 1}}), hist({{"b", 5}, {"a", 1}})));
  EXPECT_TRUE(is_cut(ts(3), {}, {}));
  EXPECT_FALSE(is_cut(ts(3), hist({{"a", 1}}), hist({{"b", 2}, {"a", 1}})));
}

TEST(IsCut, MatchesSplitEnumerationAndIsUnique) {
  const auto histories = test_support::all_histories(7, 4);
  for (const KeyHistory& full : histories) {
    for (std::uint64_t t = 1; t <= 8; ++t) {
      const auto expected = oracle::cuts_of(t, full);
      EXPECT_LE(expected.size(), 1u);
      std::vector<KeyHistory> found;
      for (const KeyHistory& prefix : histories) {
        if (is_cut(ts(t), prefix, full)) found.push_back(prefix);
      }
      EXPECT_EQ(found, expected) << to_string(full) << " @" << t;
    }
  }
}

TEST(IsCut, RejectsPrefixThatIsNotASuffixOfFull) {
  EXPECT_FALSE(is_cut(ts(3), hist({{"z", 1}}), hist({{"b", 5}, {"a", 1}})));
}

TEST(Validation, KeysAndValues) {
  EXPECT_TRUE(is_valid_key("x"));
  EXPECT_TRUE(is_valid_key("clé"));
  EXPECT_FALSE(is_valid_key(""));
  EXPECT_FALSE(is_valid_key("a\nb"));
  EXPECT_FALSE(is_valid_key("\xff"));
  EXPECT_TRUE(is_valid_value(""));
  EXPECT_FALSE(is_valid_value("a\nb"));
  EXPECT_FALSE(is_valid_utf8("\xc3"));
  EXPECT_THROW(require_valid_key(""), ContractViolation);
}

TEST(WellFormed, StrictlyDecreasing) {
  EXPECT_TRUE(is_well_formed(hist({{"b", 5}, {"a", 1}})));
  EXPECT_FALSE(is_well_formed(hist({{"b", 1}, {"a", 5}})));
  EXPECT_FALSE(is_well_formed(hist({{"b", 3}, {"a", 3}})));
}

TEST(HistoryOf, UnknownKeyIsEmpty) {
  const Store store{{"x", hist({{"1", 1}})}};
  EXPECT_TRUE(history_of(store, "y").empty());
  EXPECT_EQ(history_of(store, "x").size(), 1u);
}

}  // namespace
}  // namespace sikv
