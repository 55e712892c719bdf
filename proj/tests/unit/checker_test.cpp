// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "corpora.hpp"
#include "oracles.hpp"
#include "schedules.hpp"
#include "sikv/checker.hpp"
#include "sikv/scenarios.hpp"

namespace sikv {
namespace {

TraceEvent ev(std::uint64_t conn, std::uint64_t txn, EventKind kind) { return {conn, txn, std::move(kind)}; }

Timestamp ts(std::uint64_t t) { return Timestamp{t}; }

// Writer commits x=1 after the reader began; the reader then sees it.
Trace non_repeatable(const std::optional<Value>& second_read) {
  Trace t{EngineKind::RC, {"x"}, {}};
  t.events = {
      ev(1, 0, BeginEvent{ts(1), 1}),
      ev(1, 0, ReadEvent{"x", std::nullopt, 2}),
      ev(0, 0, BeginEvent{ts(2), 3}),
      ev(0, 0, LocalWriteEvent{"x", "1"}),
      ev(0, 0, CommitAttemptEvent{{{"x", "1"}}}),
      ev(0, 0, CommitResultEvent{true, ts(3), 4}),
      ev(1, 0, ReadEvent{"x", second_read, 5}),
      ev(1, 0, CommitAttemptEvent{{}}),
      ev(1, 0, CommitResultEvent{true, std::nullopt, 6}),
  };
  return t;
}

// The reader observes a write that is never committed.
Trace dirty_read() {
  Trace t{EngineKind::RU, {"x"}, {}};
  t.events = {
      ev(0, 0, BeginEvent{ts(1), 1}),
      ev(0, 0, RuWriteEvent{"x", "1", 2}),
      ev(1, 0, BeginEvent{ts(2), 3}),
      ev(1, 0, ReadEvent{"x", "1", 4}),
      ev(1, 0, CommitAttemptEvent{{}}),
      ev(1, 0, CommitResultEvent{true, std::nullopt, 5}),
  };
  return t;
}

void expect_verdicts(const Trace& t, bool ru, bool rc, bool si) {
  EXPECT_EQ(check(t, IsolationLevel::RU).pass, ru);
  EXPECT_EQ(check(t, IsolationLevel::RC).pass, rc);
  EXPECT_EQ(check(t, IsolationLevel::SI).pass, si);
}

TEST(Check, UncommittedReadPassesOnlyRu) {
  expect_verdicts(dirty_read(), true, false, false);
  const Verdict v = check(dirty_read(), IsolationLevel::RC);
  EXPECT_EQ(v.rule, "rc-read");
  EXPECT_EQ(v.index, 3u);
}

TEST(Check, NonRepeatableReadFailsOnlySi) {
  expect_verdicts(non_repeatable("1"), true, true, false);
  EXPECT_EQ(check(non_repeatable("1"), IsolationLevel::SI).rule, "si-read");
  expect_verdicts(non_repeatable(std::nullopt), true, true, true);
}

TEST(Check, ValueNeverWrittenFailsEverywhere) {
  expect_verdicts(non_repeatable("7"), false, false, false);
  EXPECT_EQ(check(non_repeatable("7"), IsolationLevel::RU).rule, "ru-read");
}

TEST(Check, OwnWriteRule) {
  Trace t{EngineKind::SI, {"x"}, {}};
  t.events = {ev(0, 0, BeginEvent{ts(1), 1}), ev(0, 0, LocalWriteEvent{"x", "1"}),
              ev(0, 0, LocalWriteEvent{"x", "2"}), ev(0, 0, ReadEvent{"x", "1", std::nullopt})};
  for (auto level : {IsolationLevel::RU, IsolationLevel::RC, IsolationLevel::SI}) {
    const Verdict v = check(t, level);
    EXPECT_FALSE(v);
    EXPECT_EQ(v.rule, "own-write");
  }
  std::get<ReadEvent>(t.events[3].kind).result = "2";
  expect_verdicts(t, true, true, true);
}

TEST(Check, SiCommitRule) {
  Trace t{EngineKind::SI, {"x"}, {}};
  t.events = {
      ev(0, 0, BeginEvent{ts(1), 1}),
      ev(1, 0, BeginEvent{ts(2), 2}),
      ev(1, 0, LocalWriteEvent{"x", "2"}),
      ev(1, 0, CommitAttemptEvent{{{"x", "2"}}}),
      ev(1, 0, CommitResultEvent{true, ts(3), 3}),
      ev(0, 0, LocalWriteEvent{"x", "1"}),
      ev(0, 0, CommitAttemptEvent{{{"x", "1"}}}),
      ev(0, 0, CommitResultEvent{false, std::nullopt, 4}),
  };
  expect_verdicts(t, true, true, true);
  std::get<CommitResultEvent>(t.events[7].kind) = CommitResultEvent{true, ts(4), 4};
  const Verdict v = check(t, IsolationLevel::SI);
  EXPECT_EQ(v.rule, "si-commit");
  EXPECT_EQ(v.index, 7u);
  EXPECT_TRUE(check(t, IsolationLevel::RC));
}

TEST(Check, SpuriousAbortFailsSi) {
  Trace t{EngineKind::SI, {"x"}, {}};
  t.events = {ev(0, 0, BeginEvent{ts(1), 1}), ev(0, 0, LocalWriteEvent{"x", "1"}),
              ev(0, 0, CommitAttemptEvent{{{"x", "1"}}}),
              ev(0, 0, CommitResultEvent{false, std::nullopt, 2})};
  EXPECT_EQ(check(t, IsolationLevel::SI).rule, "si-commit");
  EXPECT_TRUE(check(t, IsolationLevel::RC));
}

TEST(Check, IllFormedTraceIsContractViolation) {
  Trace t{EngineKind::SI, {"x"}, {}};
  t.events = {ev(0, 0, BeginEvent{ts(1), 2}), ev(1, 0, BeginEvent{ts(2), 1})};
  EXPECT_THROW(check(t, IsolationLevel::SI), ContractViolation);
}

TEST(CommittedHistory, Examples) {
  Trace t = non_repeatable("1");
  EXPECT_TRUE(committed_history_at(t, "x", 1).empty());
  EXPECT_TRUE(committed_history_at(t, "x", 4).empty());
  EXPECT_EQ(committed_history_at(t, "x", 5), (KeyHistory{{"1", ts(3)}}));
  std::get<CommitResultEvent>(t.events[5].kind).ok = false;
  EXPECT_TRUE(committed_history_at(t, "x", 100).empty());
}

TEST(PrefixMonotone, EmptyAndEngineTracesPass) {
  EXPECT_TRUE(check_prefix_monotone(Trace{}));
  EXPECT_TRUE(check_prefix_monotone(non_repeatable("1")));
}

TEST(PrefixMonotone, OlderCommitLandingLaterFails) {
  Trace t{EngineKind::SI, {"x"}, {}};
  t.events = {
      ev(0, 0, BeginEvent{ts(1), 1}),
      ev(0, 0, CommitAttemptEvent{{{"x", "a"}}}),
      ev(0, 0, CommitResultEvent{true, ts(5), 2}),
      ev(1, 0, BeginEvent{ts(2), 3}),
      ev(1, 0, CommitAttemptEvent{{{"x", "b"}}}),
      ev(1, 0, CommitResultEvent{true, ts(3), 4}),
  };
  const Verdict v = check_prefix_monotone(t);
  EXPECT_FALSE(v);
  EXPECT_EQ(v.rule, "prefix");
  EXPECT_EQ(v.index, 5u);
}

TEST(Inclusion, Examples) {
  const InclusionReport nrr = check_inclusion(non_repeatable("1"));
  EXPECT_TRUE(nrr.ru.pass && nrr.rc.pass && !nrr.si.pass);
  EXPECT_FALSE(nrr.violation);
  const InclusionReport dirty = check_inclusion(dirty_read());
  EXPECT_TRUE(dirty.ru.pass && !dirty.rc.pass && !dirty.si.pass);
  EXPECT_FALSE(dirty.violation);
}

TEST(Levels, NamesRoundTrip) {
  for (auto level : {IsolationLevel::RU, IsolationLevel::RC, IsolationLevel::SI}) {
    EXPECT_EQ(parse_level(to_string(level)), level);
  }
  EXPECT_EQ(parse_level("serializable"), std::nullopt);
}

class OracleAgreement : public ::testing::TestWithParam<std::string> {};

TEST_P(OracleAgreement, CheckerMatchesSourceEnumeration) {
  std::size_t checked = 0;
  std::size_t failing = 0;
  for (const Trace& trace : test_support::agreement_corpus(GetParam())) {
    if (!validate_wellformed(trace)) continue;
    for (auto level : {IsolationLevel::RU, IsolationLevel::RC, IsolationLevel::SI}) {
      const Verdict got = check(trace, level);
      const auto expected = oracle::first_violation(trace, level);
      ASSERT_EQ(got.pass, !expected.has_value()) << serialize(trace) << to_string(level);
      if (expected) {
        ASSERT_EQ(got.index, *expected) << serialize(trace) << to_string(level);
        ++failing;
      }
      ++checked;
    }
  }
  EXPECT_GT(checked, 300u);
  EXPECT_GT(failing, 50u);
}

INSTANTIATE_TEST_SUITE_P(Scenarios, OracleAgreement,
                         ::testing::Values("write-skew", "read-skew", "non-repeatable-read"),
                         [](const auto& info) {
                           std::string n = info.param;
                           std::replace(n.begin(), n.end(), '-', '_');
                           return n;
                         });

TEST(Soundness, EngineTracesPassTheirLevel) {
  for (const std::string name : {"write-skew", "read-skew", "non-repeatable-read", "dirty-read",
                                 "atomic-transactions", "read-uncommitted-data"}) {
    const Scenario& scenario = *find_scenario(name);
    for (const EngineKind engine : scenario.engines) {
      const IsolationLevel level = engine == EngineKind::SI   ? IsolationLevel::SI
                                   : engine == EngineKind::RC ? IsolationLevel::RC
                                                              : IsolationLevel::RU;
      for (const auto& schedule : test_support::straight_line_schedules(scenario, engine)) {
        const Trace trace = replay(scenario, engine, schedule).trace;
        ASSERT_TRUE(check(trace, level)) << name << " " << to_string(engine);
        ASSERT_TRUE(check_prefix_monotone(trace));
        ASSERT_FALSE(check_inclusion(trace).violation);
      }
    }
  }
}

}  // namespace
}  // namespace sikv
