// SPDX-License-Identifier: Apache-2.0
#include "sikv/checker.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <utility>
#include <vector>

namespace sikv {

std::string_view to_string(IsolationLevel level) {
  switch (level) {
    case IsolationLevel::RU:
      return "ru";
    case IsolationLevel::RC:
      return "rc";
    case IsolationLevel::SI:
      return "si";
  }
  return "?";
}

std::optional<IsolationLevel> parse_level(std::string_view name) {
  if (name == "ru") return IsolationLevel::RU;
  if (name == "rc") return IsolationLevel::RC;
  if (name == "si") return IsolationLevel::SI;
  return std::nullopt;
}

namespace {

using TxnId = std::pair<std::uint64_t, std::uint64_t>;  // (conn, txn_seq)

struct TxnState {
  Timestamp start_ts;
  std::uint64_t begin_stamp = 0;
  std::map<Key, Value> own_writes;
  WriteList attempted;
};

struct CommittedTxn {
  std::uint64_t stamp;
  TxnId txn;
  WriteList writes;
};

std::string show(const std::optional<Value>& value) {
  return value ? "\"" + *value + "\"" : std::string("none");
}

bool overlaps(const WriteList& a, const WriteList& b) {
  for (const auto& [ka, va] : a) {
    for (const auto& [kb, vb] : b) {
      if (ka == kb) return true;
    }
  }
  return false;
}

}  // namespace

KeyHistory committed_history_at(const Trace& trace, const Key& key, std::uint64_t stamp) {
  std::map<TxnId, const WriteList*> attempts;
  KeyHistory history;
  for (const TraceEvent& event : trace.events) {
    const TxnId id{event.conn_id, event.txn_seq};
    if (const auto* attempt = std::get_if<CommitAttemptEvent>(&event.kind)) {
      attempts[id] = &attempt->writes;
    } else if (const auto* result = std::get_if<CommitResultEvent>(&event.kind)) {
      if (!result->ok || !result->commit_ts || result->stamp >= stamp) continue;
      const auto it = attempts.find(id);
      if (it == attempts.end()) continue;
      for (const auto& [k, v] : *it->second) {
        if (k == key) history.push_back(Version{v, *result->commit_ts});
      }
    }
  }
  std::stable_sort(history.begin(), history.end(), [](const Version& a, const Version& b) {
    return a.commit_ts > b.commit_ts;
  });
  return history;
}

Verdict check(const Trace& trace, IsolationLevel level) {
  if (const Verdict wf = validate_wellformed(trace); !wf) {
    throw ContractViolation("check on an ill-formed trace: [" + wf.rule + "] " + wf.explanation);
  }

  std::map<TxnId, TxnState> txns;
  std::map<Key, std::set<Value>> written;    // every write logged so far
  std::map<Key, std::set<Value>> committed;  // values of successful commits so far
  std::vector<CommittedTxn> commits;

  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& event = trace.events[i];
    const TxnId id{event.conn_id, event.txn_seq};
    TxnState& txn = txns[id];

    if (const auto* begin = std::get_if<BeginEvent>(&event.kind)) {
      txn.start_ts = begin->start_ts;
      txn.begin_stamp = begin->stamp;
    } else if (const auto* w = std::get_if<LocalWriteEvent>(&event.kind)) {
      txn.own_writes[w->key] = w->value;
      written[w->key].insert(w->value);
    } else if (const auto* w = std::get_if<RuWriteEvent>(&event.kind)) {
      txn.own_writes[w->key] = w->value;
      written[w->key].insert(w->value);
    } else if (const auto* attempt = std::get_if<CommitAttemptEvent>(&event.kind)) {
      txn.attempted = attempt->writes;
    } else if (const auto* result = std::get_if<CommitResultEvent>(&event.kind)) {
      if (level == IsolationLevel::SI) {
        bool conflict = false;
        for (const CommittedTxn& other : commits) {
          if (other.txn != id && other.stamp > txn.begin_stamp && other.stamp < result->stamp &&
              overlaps(other.writes, txn.attempted)) {
            conflict = true;
            break;
          }
        }
        if (result->ok == conflict) {
          return Verdict::fail(
              i, "si-commit",
              conflict ? "commit succeeded although a concurrent commit wrote an overlapping key"
                       : "commit failed without any concurrent write to its keys");
        }
      }
      if (result->ok) {
        for (const auto& [k, v] : txn.attempted) {
          committed[k].insert(v);
          written[k].insert(v);
        }
        commits.push_back(CommittedTxn{result->stamp, id, txn.attempted});
      }
    } else if (const auto* read = std::get_if<ReadEvent>(&event.kind)) {
      if (const auto own = txn.own_writes.find(read->key); own != txn.own_writes.end()) {
        if (read->result != own->second) {
          return Verdict::fail(i, "own-write",
                               "read of '" + read->key + "' returned " + show(read->result) +
                                   " but the transaction last wrote " + show(own->second));
        }
        continue;
      }
      switch (level) {
        case IsolationLevel::RU:
          if (read->result && !written[read->key].contains(*read->result)) {
            return Verdict::fail(i, "ru-read",
                                 "read of '" + read->key + "' returned " + show(read->result) +
                                     ", which no earlier event wrote");
          }
          break;
        case IsolationLevel::RC:
          if (read->result && !committed[read->key].contains(*read->result)) {
            return Verdict::fail(i, "rc-read",
                                 "read of '" + read->key + "' returned " + show(read->result) +
                                     ", which no earlier successful commit wrote");
          }
          break;
        case IsolationLevel::SI: {
          const KeyHistory snapshot = committed_history_at(trace, read->key, txn.begin_stamp);
          std::optional<Value> expected;
          try {
            expected = version_lookup(snapshot, txn.start_ts);
          } catch (const ProtocolViolation& e) {
            return Verdict::fail(i, "si-read", e.what());
          }
          if (read->result != expected) {
            return Verdict::fail(i, "si-read",
                                 "read of '" + read->key + "' returned " + show(read->result) +
                                     " but the start snapshot holds " + show(expected));
          }
          break;
        }
      }
    }
  }
  return Verdict::ok();
}

Verdict check_prefix_monotone(const Trace& trace) {
  std::map<TxnId, const WriteList*> attempts;
  std::map<Key, KeyHistory> histories;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& event = trace.events[i];
    const TxnId id{event.conn_id, event.txn_seq};
    if (const auto* attempt = std::get_if<CommitAttemptEvent>(&event.kind)) {
      attempts[id] = &attempt->writes;
      continue;
    }
    const auto* result = std::get_if<CommitResultEvent>(&event.kind);
    if (!result || !result->ok || !result->commit_ts) continue;
    const auto it = attempts.find(id);
    if (it == attempts.end()) continue;
    for (const auto& [key, value] : *it->second) {
      KeyHistory& before = histories[key];
      KeyHistory after = before;
      after.push_back(Version{value, *result->commit_ts});
      std::stable_sort(after.begin(), after.end(), [](const Version& a, const Version& b) {
        return a.commit_ts > b.commit_ts;
      });
      const bool extends = after.size() == before.size() + 1 &&
                           std::equal(before.begin(), before.end(), after.begin() + 1) &&
                           (before.empty() || after.front().commit_ts > before.front().commit_ts);
      if (!extends) {
        return Verdict::fail(i, "prefix",
                             "history of '" + key + "' changes from " + to_string(before) +
                                 " to " + to_string(after) + " instead of growing at its end");
      }
      before = std::move(after);
    }
  }
  return Verdict::ok();
}

InclusionReport check_inclusion(const Trace& trace) {
  InclusionReport report;
  report.ru = check(trace, IsolationLevel::RU);
  report.rc = check(trace, IsolationLevel::RC);
  report.si = check(trace, IsolationLevel::SI);
  report.violation = (report.si.pass && !report.rc.pass) || (report.rc.pass && !report.ru.pass);
  return report;
}

}  // namespace sikv
