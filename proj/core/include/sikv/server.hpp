// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "sikv/core.hpp"
#include "sikv/protocol.hpp"
#include "sikv/verdict.hpp"

namespace sikv {

/// Which isolation level the server implements. SI is the multi-version
/// algorithm proper; RC and RU are deliberately weaker engines.
enum class EngineKind { SI, RC, RU };

std::string_view to_string(EngineKind kind);
std::optional<EngineKind> parse_engine(std::string_view name);

/// Runtime shadow of the server's logical model: current time, logical store
/// and the start snapshot of every outstanding transaction. Every outstanding
/// start timestamp must cut every current history at its snapshot.
struct DebugModel {
  Timestamp time;
  Store memory;
  std::map<Timestamp, Store> snapshots;
};

/// An RU-only request reached an SI or RC engine.
class UnsupportedOperation : public ProtocolViolation {
 public:
  using ProtocolViolation::ProtocolViolation;
};

/// A read or commit named a start timestamp the server never issued (or one
/// that already committed or was evicted).
class UnknownTimestamp : public ProtocolViolation {
 public:
  using ProtocolViolation::ProtocolViolation;
};

/// Raised by a debug-mode server configured to abort on a model violation.
class ModelViolation : public std::runtime_error {
 public:
  explicit ModelViolation(const Verdict& verdict)
      : std::runtime_error("model violation [" + verdict.rule + "]: " +
                           verdict.explanation),
        verdict_(verdict) {}
  const Verdict& verdict() const { return verdict_; }

 private:
  Verdict verdict_;
};

struct ServerOptions {
  /// Maintain a DebugModel and check it after every handler.
  bool debug_model = false;
  /// Throw ModelViolation instead of only counting violations.
  bool abort_on_model_violation = false;
  /// Cap on outstanding (started, never committed) transactions; the oldest
  /// is evicted beyond it. Unbounded when empty.
  std::optional<std::size_t> max_outstanding;
};

/// The key-value service. All handlers run under one server-wide mutex, so
/// concurrent calls behave as if executed in some total order; the order is
/// exposed as the stamp attached to each reply.
class Server {
 public:
  Server(EngineKind kind, const std::set<Key>& keyspace, ServerOptions options = {});

  Server(const Server& other);
  Server& operator=(const Server&) = delete;

  EngineKind kind() const { return kind_; }

  Timestamp handle_start();
  std::optional<Value> handle_read(const Key& key, Timestamp start_ts);
  void handle_write_ru(const Key& key, const Value& value);
  bool handle_commit(Timestamp start_ts, const WriteSet& writes);

  /// Executes one wire request atomically. Protocol errors come back as
  /// ErrorResponse; ModelViolation propagates when aborting is enabled.
  Reply handle(const Request& request);

  Verdict debug_check_model() const;

  Timestamp current_time() const;
  Store committed_store() const;
  std::map<Key, std::vector<std::pair<Value, std::uint64_t>>> ru_writes() const;
  /// Count of state mutations (applied commits with writes, RU writes).
  std::uint64_t mutation_count() const;
  std::uint64_t last_stamp() const;
  std::size_t model_violations() const;
  std::size_t outstanding_transactions() const;
  std::optional<DebugModel> debug_model() const;

  /// Mutable access for fault-injection tests.
  DebugModel* debug_model_for_testing() { return debug_ ? &*debug_ : nullptr; }

  struct CommitOutcome {
    bool committed = false;
    std::optional<Timestamp> commit_ts;
  };

 private:
  Timestamp start_locked();
  std::optional<Value> read_locked(const Key& key, Timestamp start_ts);
  void write_ru_locked(const Key& key, const Value& value);
  CommitOutcome commit_locked(Timestamp start_ts, const WriteSet& writes);
  void require_outstanding(Timestamp start_ts) const;
  void after_handler_locked();
  Verdict check_model_locked() const;
  void record_violation_locked(const Verdict& verdict);

  EngineKind kind_;
  ServerOptions options_;
  mutable std::mutex mutex_;
  Store store_;
  std::map<Key, std::vector<std::pair<Value, std::uint64_t>>> ru_writes_;
  std::uint64_t ru_seq_ = 0;
  Timestamp time_;
  std::uint64_t stamp_ = 0;
  std::uint64_t mutations_ = 0;
  std::set<Timestamp> outstanding_;
  std::optional<DebugModel> debug_;
  std::size_t violations_ = 0;
};

}  // namespace sikv
