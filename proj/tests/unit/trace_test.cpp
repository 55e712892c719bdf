// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <unistd.h>

#include "schedules.hpp"
#include "sikv/client.hpp"
#include "sikv/scenarios.hpp"
#include "sikv/trace.hpp"

namespace sikv {
namespace {

TraceEvent ev(std::uint64_t conn, std::uint64_t txn, EventKind kind) { return {conn, txn, std::move(kind)}; }

Trace simple_trace() {
  Trace t{EngineKind::SI, {"x", "y"}, {}};
  t.events = {
      ev(0, 0, BeginEvent{Timestamp{1}, 1}),
      ev(0, 0, ReadEvent{"x", std::nullopt, 2}),
      ev(0, 0, LocalWriteEvent{"x", "1"}),
      ev(0, 0, ReadEvent{"x", "1", std::nullopt}),
      ev(0, 0, CommitAttemptEvent{{{"x", "1"}}}),
      ev(0, 0, CommitResultEvent{true, Timestamp{2}, 3}),
      ev(1, 0, BeginEvent{Timestamp{3}, 4}),
      ev(1, 0, RuWriteEvent{"y", "q\"uote", 5}),
      ev(1, 0, CommitAttemptEvent{{}}),
      ev(1, 0, CommitResultEvent{false, std::nullopt, 6}),
  };
  return t;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         ("sikv-" + std::to_string(::getpid()) + "-" + name);
}

TEST(Recorder, CanonicalShapeAccepted) {
  TraceRecorder r(EngineKind::SI, {"x"});
  r.record(ev(0, 0, BeginEvent{Timestamp{1}, 1}));
  r.record(ev(0, 0, ReadEvent{"x", std::nullopt, 2}));
  r.record(ev(0, 0, CommitAttemptEvent{{}}));
  r.record(ev(0, 0, CommitResultEvent{true, std::nullopt, 3}));
  r.record(ev(0, 1, BeginEvent{Timestamp{2}, 4}));
  EXPECT_EQ(r.size(), 5u);
}

TEST(Recorder, ReadBeforeBeginIsFault) {
  TraceRecorder r(EngineKind::SI, {"x"});
  EXPECT_THROW(r.record(ev(0, 0, ReadEvent{"x", std::nullopt, 1})), RecorderFault);
}

TEST(Recorder, SecondCommitResultIsFault) {
  TraceRecorder r(EngineKind::SI, {"x"});
  r.record(ev(0, 0, BeginEvent{Timestamp{1}, 1}));
  r.record(ev(0, 0, CommitAttemptEvent{{}}));
  r.record(ev(0, 0, CommitResultEvent{true, std::nullopt, 2}));
  EXPECT_THROW(r.record(ev(0, 0, CommitResultEvent{true, std::nullopt, 3})), RecorderFault);
}

TEST(Recorder, SkippedTransactionIsFault) {
  TraceRecorder r(EngineKind::SI, {"x"});
  EXPECT_THROW(r.record(ev(0, 1, BeginEvent{Timestamp{1}, 1})), RecorderFault);
  r.record(ev(0, 0, BeginEvent{Timestamp{1}, 1}));
  r.record(ev(0, 0, CommitAttemptEvent{{}}));
  EXPECT_THROW(r.record(ev(0, 0, ReadEvent{"x", std::nullopt, 2})), RecorderFault);
  EXPECT_THROW(r.record(ev(0, 0, CommitAttemptEvent{{}})), RecorderFault);
}

TEST(Recorder, AbandonedTransactionMayBeFollowedByNext) {
  TraceRecorder r(EngineKind::SI, {"x"});
  r.record(ev(0, 0, BeginEvent{Timestamp{1}, 1}));
  r.record(ev(0, 1, BeginEvent{Timestamp{2}, 2}));
  EXPECT_TRUE(validate_wellformed(r.trace()));
}

TEST(Recorder, TraceRestoresStampOrder) {
  TraceRecorder r(EngineKind::SI, {"x"});
  r.record(ev(1, 0, BeginEvent{Timestamp{2}, 2}));
  r.record(ev(1, 0, LocalWriteEvent{"x", "1"}));
  r.record(ev(0, 0, BeginEvent{Timestamp{1}, 1}));
  const Trace t = r.trace();
  ASSERT_EQ(t.events.size(), 3u);
  EXPECT_EQ(t.events[0].conn_id, 0u);
  EXPECT_EQ(t.events[1].conn_id, 1u);
  EXPECT_TRUE(std::holds_alternative<LocalWriteEvent>(t.events[2].kind));
  EXPECT_TRUE(validate_wellformed(t));
}

TEST(Recorder, ConcurrentConnectionsProduceWellFormedTrace) {
  Server server(EngineKind::SI, {"x", "y"});
  TraceRecorder recorder(EngineKind::SI, {"x", "y"});
  std::vector<std::thread> threads;
  for (std::uint64_t id = 0; id < 4; ++id) {
    threads.emplace_back([&, id] {
      Connection c(std::make_unique<InProcessChannel>(server), EngineKind::SI, id, &recorder);
      for (int n = 0; n < 100; ++n) {
        c.start();
        c.read(n % 2 ? "x" : "y");
        c.write(n % 3 ? "x" : "y", std::to_string(id));
        c.read("x");
        c.commit();
      }
    });
  }
  for (auto& t : threads) t.join();
  const Trace trace = recorder.trace();
  EXPECT_EQ(trace.events.size(), 4u * 100u * 6u);
  EXPECT_TRUE(validate_wellformed(trace));
}

TEST(WellFormed, EmittedTracePasses) { EXPECT_TRUE(validate_wellformed(simple_trace())); }

TEST(WellFormed, OverlappingTransactionsOnOneConnectionFail) {
  Trace t{EngineKind::SI, {"x"}, {}};
  t.events = {ev(0, 0, BeginEvent{Timestamp{1}, 1}), ev(0, 1, BeginEvent{Timestamp{2}, 2}),
              ev(0, 0, ReadEvent{"x", std::nullopt, 3})};
  const Verdict v = validate_wellformed(t);
  EXPECT_FALSE(v);
  EXPECT_EQ(v.rule, "txn-order");
  EXPECT_EQ(v.index, 2u);
}

TEST(WellFormed, DecreasingStampsFail) {
  Trace t{EngineKind::SI, {"x"}, {}};
  t.events = {ev(0, 0, BeginEvent{Timestamp{1}, 2}), ev(1, 0, BeginEvent{Timestamp{2}, 1})};
  const Verdict v = validate_wellformed(t);
  EXPECT_FALSE(v);
  EXPECT_EQ(v.rule, "stamp-order");
}

TEST(WellFormed, TimestampReuseFails) {
  Trace t{EngineKind::SI, {"x"}, {}};
  t.events = {ev(0, 0, BeginEvent{Timestamp{1}, 1}), ev(1, 0, BeginEvent{Timestamp{1}, 2})};
  EXPECT_EQ(validate_wellformed(t).rule, "timestamps");
  t.events = {ev(0, 0, BeginEvent{Timestamp{2}, 1}), ev(0, 0, CommitAttemptEvent{{{"x", "1"}}}),
              ev(0, 0, CommitResultEvent{true, Timestamp{1}, 2})};
  EXPECT_EQ(validate_wellformed(t).rule, "timestamps");
}

TEST(WellFormed, GapsAndUnstampedForeignReadsFail) {
  Trace t{EngineKind::SI, {"x"}, {}};
  t.events = {ev(0, 1, BeginEvent{Timestamp{1}, 1})};
  EXPECT_EQ(validate_wellformed(t).rule, "txn-order");
  t.events = {ev(0, 0, BeginEvent{Timestamp{1}, 1}), ev(0, 0, ReadEvent{"x", "1", std::nullopt})};
  EXPECT_EQ(validate_wellformed(t).rule, "timestamps");
}

TEST(Codec, EventGoldens) {
  EXPECT_EQ(encode_event(ev(0, 0, BeginEvent{Timestamp{1}, 1})),
            "{\"conn\":0,\"ev\":\"begin\",\"stamp\":1,\"ts\":1,\"txn\":0}\n");
  EXPECT_EQ(encode_event(ev(2, 1, ReadEvent{"x", std::nullopt, std::nullopt})),
            "{\"conn\":2,\"ev\":\"read\",\"key\":\"x\",\"txn\":1,\"val\":null}\n");
  EXPECT_EQ(encode_event(ev(0, 0, CommitResultEvent{true, Timestamp{4}, 9})),
            "{\"conn\":0,\"cts\":4,\"ev\":\"result\",\"ok\":true,\"stamp\":9,\"txn\":0}\n");
  EXPECT_EQ(encode_header(EngineKind::SI, {"x", "y"}), "{\"engine\":\"si\",\"keys\":[\"x\",\"y\"]}\n");
}

TEST(Codec, EventRoundTrip) {
  for (const TraceEvent& e : simple_trace().events) EXPECT_EQ(decode_event(encode_event(e)), e);
}

TEST(Codec, EmptyTraceIsHeaderOnly) {
  const Trace empty{EngineKind::RC, {"k"}, {}};
  EXPECT_EQ(serialize(empty), "{\"engine\":\"rc\",\"keys\":[\"k\"]}\n");
  EXPECT_EQ(parse_trace(serialize(empty)), empty);
}

TEST(Codec, SaveLoadThousandEvents) {
  Server server(EngineKind::RU, {"a", "b"});
  TraceRecorder recorder(EngineKind::RU, {"a", "b"});
  Connection c(std::make_unique<InProcessChannel>(server), EngineKind::RU, 0, &recorder);
  std::mt19937_64 rng(3);
  while (recorder.size() < 1000) {
    c.start();
    for (int i = 0; i < 3; ++i) {
      if (rng() % 2) {
        c.write(rng() % 2 ? "a" : "b", std::to_string(rng() % 50));
      } else {
        c.read(rng() % 2 ? "a" : "b");
      }
    }
    c.commit();
  }
  const Trace trace = recorder.trace();
  const auto path = temp_file("thousand.trace.jsonl");
  save(trace, path);
  EXPECT_EQ(load(path), trace);
  std::filesystem::remove(path);
}

TEST(Codec, CorruptLineIsNamed) {
  std::string text = serialize(simple_trace());
  std::size_t pos = 0;
  for (int line = 1; line < 7; ++line) pos = text.find('\n', pos) + 1;
  text.insert(pos, "garbage");
  try {
    parse_trace(text);
    FAIL();
  } catch (const TraceParseError& e) {
    EXPECT_EQ(e.line(), 7u);
    EXPECT_NE(std::string(e.what()).find("line 7"), std::string::npos);
  }
}

TEST(Codec, MissingHeaderIsLineOne) {
  try {
    parse_trace("");
    FAIL();
  } catch (const TraceParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  EXPECT_THROW(parse_trace("{\"engine\":\"xx\",\"keys\":[]}\n"), TraceParseError);
}

TEST(Codec, LoadMissingFileThrows) {
  EXPECT_THROW(load(temp_file("does-not-exist")), std::runtime_error);
}

// Re-executes the stamped events of a trace against a fresh server of the
// same kind and checks that every reply matches the recorded one.
void expect_linearizable(const Trace& trace) {
  std::set<Key> keys(trace.keys.begin(), trace.keys.end());
  Server server(trace.engine, keys);
  std::map<std::pair<std::uint64_t, std::uint64_t>, Timestamp> starts;
  std::map<std::pair<std::uint64_t, std::uint64_t>, WriteList> attempts;
  for (const TraceEvent& e : trace.events) {
    const auto id = std::make_pair(e.conn_id, e.txn_seq);
    if (const auto* b = std::get_if<BeginEvent>(&e.kind)) {
      ASSERT_EQ(server.handle_start(), b->start_ts);
      starts[id] = b->start_ts;
    } else if (const auto* r = std::get_if<ReadEvent>(&e.kind); r && r->stamp) {
      ASSERT_EQ(server.handle_read(r->key, starts.at(id)), r->result);
    } else if (const auto* w = std::get_if<RuWriteEvent>(&e.kind)) {
      server.handle_write_ru(w->key, w->value);
    } else if (const auto* a = std::get_if<CommitAttemptEvent>(&e.kind)) {
      attempts[id] = a->writes;
      continue;
    } else if (const auto* c = std::get_if<CommitResultEvent>(&e.kind)) {
      ASSERT_EQ(server.handle_commit(starts.at(id), to_write_set(attempts.at(id))), c->ok);
      if (c->commit_ts) {
        ASSERT_EQ(server.current_time(), *c->commit_ts);
      }
    } else {
      continue;
    }
    ASSERT_EQ(server.last_stamp(), *e.stamp());
  }
}

TEST(Linearization, ReplayingStampedEventsReproducesResults) {
  std::mt19937_64 rng(17);
  std::size_t traces = 0;
  for (const Scenario& scenario : scenario_catalog()) {
    for (const EngineKind engine : scenario.engines) {
      for (int i = 0; i < 5; ++i) {
        const auto schedule = test_support::random_schedule(scenario, engine, rng);
        if (schedule.empty()) continue;
        const Trace trace = replay(scenario, engine, schedule).trace;
        ASSERT_TRUE(validate_wellformed(trace));
        expect_linearizable(trace);
        ++traces;
      }
    }
  }
  EXPECT_GT(traces, 200u);
}

}  // namespace
}  // namespace sikv
