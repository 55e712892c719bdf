// SPDX-License-Identifier: Apache-2.0
#pragma once

// A globally ordered log of transactional events. Server-visible events carry
// the server stamp of the request that produced them; client-local events
// (cache writes, cache-hit reads) are unstamped and take their position from
// the preceding stamped event of the same transaction.

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sikv/core.hpp"
#include "sikv/protocol.hpp"
#include "sikv/server.hpp"
#include "sikv/verdict.hpp"

namespace sikv {

struct BeginEvent {
  Timestamp start_ts;
  std::uint64_t stamp = 0;
  friend bool operator==(const BeginEvent&, const BeginEvent&) = default;
};
/// `stamp` is empty for a read served from the transaction's own cache.
struct ReadEvent {
  Key key;
  std::optional<Value> result;
  std::optional<std::uint64_t> stamp;
  friend bool operator==(const ReadEvent&, const ReadEvent&) = default;
};
struct LocalWriteEvent {
  Key key;
  Value value;
  friend bool operator==(const LocalWriteEvent&, const LocalWriteEvent&) = default;
};
struct RuWriteEvent {
  Key key;
  Value value;
  std::uint64_t stamp = 0;
  friend bool operator==(const RuWriteEvent&, const RuWriteEvent&) = default;
};
struct CommitAttemptEvent {
  WriteList writes;
  friend bool operator==(const CommitAttemptEvent&, const CommitAttemptEvent&) = default;
};
struct CommitResultEvent {
  bool ok = false;
  std::optional<Timestamp> commit_ts;
  std::uint64_t stamp = 0;
  friend bool operator==(const CommitResultEvent&, const CommitResultEvent&) = default;
};

using EventKind = std::variant<BeginEvent, ReadEvent, LocalWriteEvent, RuWriteEvent,
                               CommitAttemptEvent, CommitResultEvent>;

struct TraceEvent {
  std::uint64_t conn_id = 0;
  /// Per-connection transaction counter, starting at 0.
  std::uint64_t txn_seq = 0;
  EventKind kind;

  std::optional<std::uint64_t> stamp() const;
  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct Trace {
  EngineKind engine = EngineKind::SI;
  std::vector<Key> keys;
  std::vector<TraceEvent> events;
  friend bool operator==(const Trace&, const Trace&) = default;
};

/// An event was recorded out of transaction order.
class RecorderFault : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  /// 1-based; the header is line 1.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Thread-safe event sink. Appends from concurrent connections may arrive
/// out of stamp order; trace() restores the linearization order.
class TraceRecorder {
 public:
  TraceRecorder(EngineKind engine, std::vector<Key> keys);
  TraceRecorder(const TraceRecorder& other);
  TraceRecorder& operator=(const TraceRecorder&) = delete;

  /// Throws RecorderFault if the event breaks its connection's transaction
  /// sequence (e.g. a read before any begin, or a second commit result).
  void record(TraceEvent event);
  Trace trace() const;
  std::size_t size() const;

 private:
  struct ConnState {
    std::optional<std::uint64_t> txn;
    bool attempted = false;
    bool finished = false;
    std::uint64_t anchor = 0;
  };

  mutable std::mutex mutex_;
  EngineKind engine_;
  std::vector<Key> keys_;
  std::vector<std::pair<std::uint64_t, TraceEvent>> events_;  // (anchor stamp, event)
  std::map<std::uint64_t, ConnState> conns_;
};

/// Per-connection transactions are sequential and gap-free, stamps strictly
/// increase in log order, start timestamps are unique, and unstamped reads
/// only ever hit the transaction's own writes.
Verdict validate_wellformed(const Trace& trace);

std::string encode_event(const TraceEvent& event);
TraceEvent decode_event(std::string_view line);

std::string encode_header(EngineKind engine, const std::vector<Key>& keys);

/// Header line followed by one line per event.
std::string serialize(const Trace& trace);
Trace parse_trace(std::string_view text);

void save(const Trace& trace, const std::filesystem::path& path);
Trace load(const std::filesystem::path& path);

}  // namespace sikv
