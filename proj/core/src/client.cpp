// SPDX-License-Identifier: Apache-2.0
#include "sikv/client.hpp"

#include <thread>
#include <variant>

namespace sikv {

// Flags the connection as in use for the duration of one operation, so that
// two threads sharing a connection fail loudly instead of interleaving.
class Connection::Busy {
 public:
  explicit Busy(std::atomic<bool>& flag) : flag_(flag) {
    if (flag_.exchange(true)) throw UsageError("connection used concurrently");
  }
  ~Busy() { flag_.store(false); }
  Busy(const Busy&) = delete;
  Busy& operator=(const Busy&) = delete;

 private:
  std::atomic<bool>& flag_;
};

Connection::Connection(std::unique_ptr<Channel> channel, EngineKind engine,
                       std::uint64_t conn_id, TraceRecorder* recorder)
    : channel_(std::move(channel)),
      engine_(engine),
      conn_id_(conn_id),
      recorder_(recorder),
      busy_(std::make_unique<std::atomic<bool>>(false)) {}

Connection::Connection(Connection&& other) noexcept = default;
Connection& Connection::operator=(Connection&& other) noexcept = default;

Reply Connection::call(const Request& request) {
  if (!channel_) throw TransportError("connection has no channel");
  Reply reply = channel_->call(request);
  if (const auto* error = std::get_if<ErrorResponse>(&reply.response)) {
    throw ServerError(error->code, error->message);
  }
  return reply;
}

void Connection::require_active(const char* op) const {
  if (!start_ts_) throw UsageError(std::string(op) + " on a connection with no active transaction");
}

void Connection::record(EventKind kind) {
  if (recorder_) recorder_->record(TraceEvent{conn_id_, next_txn_ - 1, std::move(kind)});
}

void Connection::start() {
  Busy busy(*busy_);
  if (start_ts_) throw UsageError("start on a connection with an active transaction");
  const Reply reply = call(StartRequest{});
  const auto* started = std::get_if<StartResponse>(&reply.response);
  if (!started) throw TransportError("unexpected reply to start");
  start_ts_ = started->ts;
  cache_.clear();
  ++next_txn_;
  record(BeginEvent{started->ts, reply.stamp});
}

std::optional<Value> Connection::read(const Key& key) {
  Busy busy(*busy_);
  require_active("read");
  require_valid_key(key);
  if (const auto it = cache_.find(key); it != cache_.end()) {
    record(ReadEvent{key, it->second.value, std::nullopt});
    return it->second.value;
  }
  const Reply reply = call(ReadRequest{key, *start_ts_});
  const auto* result = std::get_if<ReadResponse>(&reply.response);
  if (!result) throw TransportError("unexpected reply to read");
  record(ReadEvent{key, result->value, reply.stamp});
  return result->value;
}

void Connection::write(const Key& key, const Value& value) {
  Busy busy(*busy_);
  require_active("write");
  require_valid_key(key);
  require_valid_value(value);
  if (engine_ == EngineKind::RU) {
    const Reply reply = call(WriteRequest{key, value});
    if (!std::holds_alternative<AckResponse>(reply.response)) {
      throw TransportError("unexpected reply to write");
    }
    cache_[key] = WriteEntry{value, true};
    record(RuWriteEvent{key, value, reply.stamp});
    return;
  }
  cache_[key] = WriteEntry{value, true};
  record(LocalWriteEvent{key, value});
}

bool Connection::commit() {
  Busy busy(*busy_);
  require_active("commit");
  const Timestamp start_ts = *start_ts_;
  const WriteList writes = to_write_list(cache_);
  start_ts_.reset();
  cache_.clear();
  record(CommitAttemptEvent{writes});
  const Reply reply = call(CommitRequest{start_ts, writes});
  const auto* result = std::get_if<CommitResponse>(&reply.response);
  if (!result) throw TransportError("unexpected reply to commit");
  record(CommitResultEvent{result->committed, result->commit_ts, reply.stamp});
  return result->committed;
}

void Connection::abandon() {
  start_ts_.reset();
  cache_.clear();
}

void Connection::close() {
  abandon();
  if (channel_) channel_->close();
}

Connection Connection::rebind(std::unique_ptr<Channel> channel, TraceRecorder* recorder) const {
  Connection copy(std::move(channel), engine_, conn_id_, recorder);
  copy.start_ts_ = start_ts_;
  copy.cache_ = cache_;
  copy.next_txn_ = next_txn_;
  return copy;
}

Connection connect(const Endpoint& endpoint, EngineKind engine, const ConnectOptions& options) {
  for (std::size_t attempt = 1;; ++attempt) {
    try {
      return Connection(endpoint.open(), engine, options.conn_id, options.recorder);
    } catch (const TransportError& e) {
      if (options.max_attempts && attempt >= *options.max_attempts) {
        throw ConnectTimeout("no server at " + endpoint.describe() + " after " +
                             std::to_string(attempt) + " attempts: " + e.what());
      }
    }
    std::this_thread::sleep_for(options.retry_delay);
  }
}

WaitLoop::WaitLoop(Kind kind, Key key, ValuePredicate predicate)
    : kind_(kind), key_(std::move(key)), predicate_(std::move(predicate)) {}

bool WaitLoop::step(Connection& conn) {
  last_poll_failed_ = false;
  switch (phase_) {
    case Phase::Start:
      if (kind_ == Kind::Weak && conn.engine() == EngineKind::SI) {
        throw UsageError("weak_wait cannot observe new data under snapshot isolation");
      }
      conn.start();
      phase_ = Phase::Read;
      break;
    case Phase::Read: {
      const std::optional<Value> value = conn.read(key_);
      satisfied_ = value && predicate_(*value);
      if (satisfied_) {
        observed_ = value;
        phase_ = Phase::Commit;
      } else if (kind_ == Kind::Strong) {
        phase_ = Phase::Commit;
      } else {
        ++failed_polls_;
        last_poll_failed_ = true;
      }
      break;
    }
    case Phase::Commit:
      conn.commit();
      if (satisfied_) {
        phase_ = Phase::Done;
      } else {
        ++failed_polls_;
        last_poll_failed_ = true;
        phase_ = Phase::Start;
      }
      break;
    case Phase::Done:
      break;
  }
  return done();
}

namespace {

Value run_wait(WaitLoop loop, Connection& conn) {
  while (!loop.step(conn)) {
  }
  return *loop.observed();
}

}  // namespace

Value wait(Connection& conn, const Key& key, const ValuePredicate& predicate) {
  return run_wait(WaitLoop(WaitLoop::Kind::Strong, key, predicate), conn);
}

Value weak_wait(Connection& conn, const Key& key, const ValuePredicate& predicate) {
  if (conn.engine() == EngineKind::SI) {
    throw UsageError("weak_wait cannot observe new data under snapshot isolation");
  }
  return run_wait(WaitLoop(WaitLoop::Kind::Weak, key, predicate), conn);
}

bool run(Connection& conn, const std::function<void(Connection&)>& body) {
  conn.start();
  try {
    body(conn);
  } catch (...) {
    conn.abandon();
    throw;
  }
  return conn.commit();
}

}  // namespace sikv
