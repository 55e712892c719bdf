// SPDX-License-Identifier: Apache-2.0
#include "sikv/server.hpp"

#include <variant>

namespace sikv {

std::string_view to_string(EngineKind kind) {
  switch (kind) {
    case EngineKind::SI:
      return "si";
    case EngineKind::RC:
      return "rc";
    case EngineKind::RU:
      return "ru";
  }
  return "?";
}

std::optional<EngineKind> parse_engine(std::string_view name) {
  if (name == "si") return EngineKind::SI;
  if (name == "rc") return EngineKind::RC;
  if (name == "ru") return EngineKind::RU;
  return std::nullopt;
}

namespace {

bool has_updates(const WriteSet& writes) {
  for (const auto& [key, entry] : writes) {
    if (entry.updated) return true;
  }
  return false;
}

// Maps restricted to the updated keys, missing keys as empty histories, so
// that can_commit's domain precondition holds for undeclared keys.
Store restrict_to_writes(const Store& store, const WriteSet& writes) {
  Store out;
  for (const auto& [key, entry] : writes) {
    if (entry.updated) out[key] = history_of(store, key);
  }
  return out;
}

}  // namespace

Server::Server(EngineKind kind, const std::set<Key>& keyspace, ServerOptions options)
    : kind_(kind), options_(options) {
  for (const Key& key : keyspace) {
    require_valid_key(key);
    if (kind_ == EngineKind::RU) {
      ru_writes_[key];
    } else {
      store_[key];
    }
  }
  if (options_.debug_model) debug_ = DebugModel{time_, store_, {}};
}

Server::Server(const Server& other) {
  std::lock_guard lock(other.mutex_);
  kind_ = other.kind_;
  options_ = other.options_;
  store_ = other.store_;
  ru_writes_ = other.ru_writes_;
  ru_seq_ = other.ru_seq_;
  time_ = other.time_;
  stamp_ = other.stamp_;
  mutations_ = other.mutations_;
  outstanding_ = other.outstanding_;
  debug_ = other.debug_;
  violations_ = other.violations_;
}

Timestamp Server::handle_start() {
  std::lock_guard lock(mutex_);
  const Timestamp ts = start_locked();
  ++stamp_;
  after_handler_locked();
  return ts;
}

std::optional<Value> Server::handle_read(const Key& key, Timestamp start_ts) {
  std::lock_guard lock(mutex_);
  auto value = read_locked(key, start_ts);
  ++stamp_;
  after_handler_locked();
  return value;
}

void Server::handle_write_ru(const Key& key, const Value& value) {
  std::lock_guard lock(mutex_);
  write_ru_locked(key, value);
  ++stamp_;
  after_handler_locked();
}

bool Server::handle_commit(Timestamp start_ts, const WriteSet& writes) {
  std::lock_guard lock(mutex_);
  const bool ok = commit_locked(start_ts, writes).committed;
  ++stamp_;
  after_handler_locked();
  return ok;
}

Reply Server::handle(const Request& request) {
  std::lock_guard lock(mutex_);
  Response response;
  try {
    if (std::holds_alternative<StartRequest>(request)) {
      response = StartResponse{start_locked()};
    } else if (const auto* read = std::get_if<ReadRequest>(&request)) {
      response = ReadResponse{read_locked(read->key, read->start_ts)};
    } else if (const auto* write = std::get_if<WriteRequest>(&request)) {
      write_ru_locked(write->key, write->value);
      response = AckResponse{};
    } else {
      const auto& commit = std::get<CommitRequest>(request);
      const CommitOutcome outcome = commit_locked(commit.start_ts, to_write_set(commit.writes));
      response = CommitResponse{outcome.committed, outcome.commit_ts};
    }
  } catch (const UnsupportedOperation& e) {
    return {ErrorResponse{std::string(error_code::kUnsupported), e.what()}, 0};
  } catch (const UnknownTimestamp& e) {
    return {ErrorResponse{std::string(error_code::kUnknownTimestamp), e.what()}, 0};
  } catch (const ProtocolViolation& e) {
    return {ErrorResponse{std::string(error_code::kProtocol), e.what()}, 0};
  } catch (const ContractViolation& e) {
    return {ErrorResponse{std::string(error_code::kInvalid), e.what()}, 0};
  }
  const std::uint64_t stamp = ++stamp_;
  after_handler_locked();
  return {std::move(response), stamp};
}

Timestamp Server::start_locked() {
  time_ = Timestamp{time_.tick + 1};
  outstanding_.insert(time_);
  if (debug_) {
    // Model update: a fresh start timestamp remembers the current memory.
    debug_->time = time_;
    debug_->snapshots[time_] = debug_->memory;
  }
  if (options_.max_outstanding && outstanding_.size() > *options_.max_outstanding) {
    const Timestamp oldest = *outstanding_.begin();
    outstanding_.erase(outstanding_.begin());
    if (debug_) debug_->snapshots.erase(oldest);
  }
  return time_;
}

void Server::require_outstanding(Timestamp start_ts) const {
  if (!outstanding_.contains(start_ts)) {
    throw UnknownTimestamp("start timestamp " + to_string(start_ts) +
                           " was not issued or already finished");
  }
}

std::optional<Value> Server::read_locked(const Key& key, Timestamp start_ts) {
  require_valid_key(key);
  switch (kind_) {
    case EngineKind::SI:
      require_outstanding(start_ts);
      return version_lookup(history_of(store_, key), start_ts);
    case EngineKind::RC: {
      const KeyHistory& history = history_of(store_, key);
      if (history.empty()) return std::nullopt;
      return history.front().value;
    }
    case EngineKind::RU: {
      const auto it = ru_writes_.find(key);
      if (it == ru_writes_.end() || it->second.empty()) return std::nullopt;
      return it->second.back().first;
    }
  }
  return std::nullopt;
}

void Server::write_ru_locked(const Key& key, const Value& value) {
  if (kind_ != EngineKind::RU) {
    throw UnsupportedOperation("immediate writes are only supported by the ru engine");
  }
  require_valid_key(key);
  require_valid_value(value);
  ru_writes_[key].emplace_back(value, ++ru_seq_);
  ++mutations_;
}

Server::CommitOutcome Server::commit_locked(Timestamp start_ts, const WriteSet& writes) {
  for (const auto& [key, entry] : writes) {
    require_valid_key(key);
    require_valid_value(entry.value);
  }
  require_outstanding(start_ts);
  outstanding_.erase(start_ts);

  std::optional<Store> start_snapshot;
  if (debug_) {
    const auto it = debug_->snapshots.find(start_ts);
    if (it != debug_->snapshots.end()) {
      start_snapshot = std::move(it->second);
      debug_->snapshots.erase(it);
    }
  }

  switch (kind_) {
    case EngineKind::RU:
      return {true, std::nullopt};
    case EngineKind::RC:
      break;
    case EngineKind::SI: {
      if (!has_updates(writes)) return {true, std::nullopt};
      bool ok = true;
      for (const auto& [key, entry] : writes) {
        if (entry.updated && !check_key(history_of(store_, key), start_ts)) {
          ok = false;
          break;
        }
      }
      if (start_snapshot) {
        const bool expected = can_commit(restrict_to_writes(store_, writes),
                                         restrict_to_writes(*start_snapshot, writes), writes);
        if (expected != ok) {
          record_violation_locked(Verdict::fail(
              start_ts.tick, "commit-check",
              "per-key check_key decided " + std::string(ok ? "commit" : "abort") +
                  " but can_commit on the start snapshot disagrees"));
        }
      }
      if (!ok) return {false, std::nullopt};
      break;
    }
  }

  const Timestamp commit_ts{time_.tick + 1};
  time_ = commit_ts;
  apply_commit_in_place(store_, writes, commit_ts);
  if (has_updates(writes)) ++mutations_;
  if (debug_) {
    // Model update: memory advances by the same commit at the new time.
    apply_commit_in_place(debug_->memory, writes, commit_ts);
    debug_->time = commit_ts;
  }
  return {true, commit_ts};
}

void Server::after_handler_locked() {
  if (!debug_) return;
  const Verdict verdict = check_model_locked();
  if (!verdict.pass) record_violation_locked(verdict);
}

void Server::record_violation_locked(const Verdict& verdict) {
  ++violations_;
  if (options_.abort_on_model_violation) throw ModelViolation(verdict);
}

Verdict Server::check_model_locked() const {
  if (!debug_) return Verdict::ok();
  const DebugModel& model = *debug_;
  if (model.time != time_) {
    return Verdict::fail(model.time.tick, "time",
                         "model time " + to_string(model.time) +
                             " differs from server time " + to_string(time_));
  }
  if (model.memory != store_) {
    return Verdict::fail(model.time.tick, "memory", "model memory differs from the store");
  }
  for (const auto& [start, snapshot] : model.snapshots) {
    if (start > model.time) {
      return Verdict::fail(start.tick, "snapshot-time",
                           "snapshot at " + to_string(start) + " is after the current time");
    }
    std::set<Key> keys;
    for (const auto& [key, history] : snapshot) keys.insert(key);
    for (const auto& [key, history] : model.memory) keys.insert(key);
    for (const Key& key : keys) {
      const KeyHistory& prefix = history_of(snapshot, key);
      const KeyHistory& full = history_of(model.memory, key);
      if (!is_cut(start, prefix, full)) {
        return Verdict::fail(start.tick, "cut",
                             "timestamp " + to_string(start) + " does not cut key '" + key +
                                 "': snapshot " + to_string(prefix) + ", current " +
                                 to_string(full));
      }
    }
  }
  return Verdict::ok();
}

Verdict Server::debug_check_model() const {
  std::lock_guard lock(mutex_);
  return check_model_locked();
}

Timestamp Server::current_time() const {
  std::lock_guard lock(mutex_);
  return time_;
}

Store Server::committed_store() const {
  std::lock_guard lock(mutex_);
  return store_;
}

std::map<Key, std::vector<std::pair<Value, std::uint64_t>>> Server::ru_writes() const {
  std::lock_guard lock(mutex_);
  return ru_writes_;
}

std::uint64_t Server::mutation_count() const {
  std::lock_guard lock(mutex_);
  return mutations_;
}

std::uint64_t Server::last_stamp() const {
  std::lock_guard lock(mutex_);
  return stamp_;
}

std::size_t Server::model_violations() const {
  std::lock_guard lock(mutex_);
  return violations_;
}

std::size_t Server::outstanding_transactions() const {
  std::lock_guard lock(mutex_);
  return outstanding_.size();
}

std::optional<DebugModel> Server::debug_model() const {
  std::lock_guard lock(mutex_);
  return debug_;
}

}  // namespace sikv
