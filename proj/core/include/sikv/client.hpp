// SPDX-License-Identifier: Apache-2.0
#pragma once

// Client proxy: one connection runs at most one transaction at a time and
// buffers its writes locally until commit.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "sikv/core.hpp"
#include "sikv/server.hpp"
#include "sikv/trace.hpp"
#include "sikv/transport.hpp"

namespace sikv {

/// An operation was issued in the wrong connection state.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// connect() gave up after its attempt cap.
class ConnectTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The server answered with an error response.
class ServerError : public std::runtime_error {
 public:
  ServerError(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct ConnectOptions {
  std::uint64_t conn_id = 0;
  TraceRecorder* recorder = nullptr;
  /// Unbounded when empty.
  std::optional<std::size_t> max_attempts;
  std::chrono::milliseconds retry_delay{50};
};

class Connection {
 public:
  Connection(std::unique_ptr<Channel> channel, EngineKind engine, std::uint64_t conn_id = 0,
             TraceRecorder* recorder = nullptr);
  Connection(Connection&& other) noexcept;
  Connection& operator=(Connection&& other) noexcept;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  EngineKind engine() const { return engine_; }
  std::uint64_t conn_id() const { return conn_id_; }
  bool active() const { return start_ts_.has_value(); }
  std::optional<Timestamp> start_ts() const { return start_ts_; }
  const WriteSet& cache() const { return cache_; }
  /// Sequence number the next transaction will get.
  std::uint64_t next_txn() const { return next_txn_; }

  void start();
  std::optional<Value> read(const Key& key);
  void write(const Key& key, const Value& value);
  /// The connection is Inactive afterwards whatever the outcome.
  bool commit();
  /// Drops the active transaction without contacting the server.
  void abandon();
  void close();

  /// Same transaction state on a different channel and recorder.
  Connection rebind(std::unique_ptr<Channel> channel, TraceRecorder* recorder) const;

 private:
  class Busy;
  Reply call(const Request& request);
  void require_active(const char* op) const;
  void record(EventKind kind);

  std::unique_ptr<Channel> channel_;
  EngineKind engine_;
  std::uint64_t conn_id_;
  TraceRecorder* recorder_;
  std::optional<Timestamp> start_ts_;
  WriteSet cache_;
  std::uint64_t next_txn_ = 0;
  std::unique_ptr<std::atomic<bool>> busy_;
};

/// Opens a channel, retrying until the endpoint answers or the attempt cap
/// is hit (ConnectTimeout).
Connection connect(const Endpoint& endpoint, EngineKind engine, const ConnectOptions& options = {});

using ValuePredicate = std::function<bool(const Value&)>;

/// The wait loops as an explicit state machine; every step() performs exactly
/// one transactional operation. Strong waits poll with a fresh transaction
/// each time; weak waits keep one transaction open and re-read.
class WaitLoop {
 public:
  enum class Kind { Strong, Weak };
  enum class Phase { Start, Read, Commit, Done };

  WaitLoop(Kind kind, Key key, ValuePredicate predicate);

  /// Returns true once the loop has finished.
  bool step(Connection& conn);

  Kind kind() const { return kind_; }
  Phase phase() const { return phase_; }
  const Key& key() const { return key_; }
  bool done() const { return phase_ == Phase::Done; }
  /// Completed polls that did not satisfy the predicate.
  std::size_t failed_polls() const { return failed_polls_; }
  /// True when the last step completed a poll that did not satisfy the
  /// predicate.
  bool last_poll_failed() const { return last_poll_failed_; }
  /// The value that satisfied the predicate.
  const std::optional<Value>& observed() const { return observed_; }

 private:
  Kind kind_;
  Key key_;
  ValuePredicate predicate_;
  Phase phase_ = Phase::Start;
  bool satisfied_ = false;
  bool last_poll_failed_ = false;
  std::size_t failed_polls_ = 0;
  std::optional<Value> observed_;
};

/// Polls with fresh transactions until a committed value satisfies the
/// predicate. Returns that value.
Value wait(Connection& conn, const Key& key, const ValuePredicate& predicate);

/// One transaction re-reading until the predicate holds. UsageError on SI,
/// where the snapshot never changes.
Value weak_wait(Connection& conn, const Key& key, const ValuePredicate& predicate);

/// start; body; commit. If the body throws, the transaction is abandoned and
/// the exception propagates.
bool run(Connection& conn, const std::function<void(Connection&)>& body);

}  // namespace sikv
