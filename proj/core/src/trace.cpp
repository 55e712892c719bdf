// SPDX-License-Identifier: Apache-2.0
#include "sikv/trace.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sikv {

using json = nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Per-connection transaction sequencing shared by the recorder and the
// validator. Returns an empty string when the event is acceptable.
struct Sequencer {
  struct Conn {
    std::optional<std::uint64_t> txn;
    bool attempted = false;
    bool finished = false;
  };
  std::map<std::uint64_t, Conn> conns;

  std::string accept(const TraceEvent& event) {
    Conn& c = conns[event.conn_id];
    if (std::holds_alternative<BeginEvent>(event.kind)) {
      const std::uint64_t expected = c.txn ? *c.txn + 1 : 0;
      if (event.txn_seq != expected) {
        return "begin of txn " + std::to_string(event.txn_seq) + " on connection " +
               std::to_string(event.conn_id) + ", expected txn " + std::to_string(expected);
      }
      c = Conn{event.txn_seq, false, false};
      return {};
    }
    if (!c.txn || *c.txn != event.txn_seq) {
      return "event of txn " + std::to_string(event.txn_seq) + " on connection " +
             std::to_string(event.conn_id) + " outside that transaction";
    }
    if (c.finished) return "event after the transaction's commit result";
    if (std::holds_alternative<CommitResultEvent>(event.kind)) {
      if (!c.attempted) return "commit result without a commit attempt";
      c.finished = true;
      return {};
    }
    if (c.attempted) return "event after the transaction's commit attempt";
    if (std::holds_alternative<CommitAttemptEvent>(event.kind)) c.attempted = true;
    return {};
  }
};

json writes_to_json(const WriteList& writes) {
  json out = json::array();
  for (const auto& [k, v] : writes) out.push_back(json::array({k, v}));
  return out;
}

const json& need(const json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) throw DecodeError(0, std::string("missing field '") + name + "'");
  return *it;
}

std::uint64_t need_uint(const json& j, const char* name) {
  const json& f = need(j, name);
  if (!f.is_number_unsigned()) {
    throw DecodeError(0, std::string("field '") + name + "' is not an unsigned integer");
  }
  return f.get<std::uint64_t>();
}

std::string need_string(const json& j, const char* name) {
  const json& f = need(j, name);
  if (!f.is_string()) throw DecodeError(0, std::string("field '") + name + "' is not a string");
  return f.get<std::string>();
}

Key need_key(const json& j) {
  Key key = need_string(j, "key");
  if (!is_valid_key(key)) throw DecodeError(0, "invalid key");
  return key;
}

Value need_value(const json& j) {
  Value value = need_string(j, "val");
  if (!is_valid_value(value)) throw DecodeError(0, "invalid value");
  return value;
}

std::optional<std::uint64_t> opt_stamp(const json& j) {
  const auto it = j.find("stamp");
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_unsigned()) throw DecodeError(0, "field 'stamp' is not an unsigned integer");
  return it->get<std::uint64_t>();
}

json parse_json_object(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DecodeError(e.byte > 0 ? e.byte - 1 : 0, "malformed line");
  }
  if (!j.is_object()) throw DecodeError(0, "line is not an object");
  return j;
}

}  // namespace

std::optional<std::uint64_t> TraceEvent::stamp() const {
  return std::visit(Overloaded{
                        [](const BeginEvent& e) -> std::optional<std::uint64_t> { return e.stamp; },
                        [](const ReadEvent& e) { return e.stamp; },
                        [](const LocalWriteEvent&) -> std::optional<std::uint64_t> { return {}; },
                        [](const RuWriteEvent& e) -> std::optional<std::uint64_t> { return e.stamp; },
                        [](const CommitAttemptEvent&) -> std::optional<std::uint64_t> { return {}; },
                        [](const CommitResultEvent& e) -> std::optional<std::uint64_t> {
                          return e.stamp;
                        },
                    },
                    kind);
}

TraceRecorder::TraceRecorder(EngineKind engine, std::vector<Key> keys)
    : engine_(engine), keys_(std::move(keys)) {}

TraceRecorder::TraceRecorder(const TraceRecorder& other) {
  std::lock_guard lock(other.mutex_);
  engine_ = other.engine_;
  keys_ = other.keys_;
  events_ = other.events_;
  conns_ = other.conns_;
}

void TraceRecorder::record(TraceEvent event) {
  std::lock_guard lock(mutex_);
  ConnState& c = conns_[event.conn_id];
  const bool begin = std::holds_alternative<BeginEvent>(event.kind);
  if (begin) {
    const std::uint64_t expected = c.txn ? *c.txn + 1 : 0;
    if (event.txn_seq != expected) {
      throw RecorderFault("begin of txn " + std::to_string(event.txn_seq) +
                          " on connection " + std::to_string(event.conn_id) +
                          ", expected txn " + std::to_string(expected));
    }
    c = ConnState{event.txn_seq, false, false, 0};
  } else {
    if (!c.txn || *c.txn != event.txn_seq) {
      throw RecorderFault("event on connection " + std::to_string(event.conn_id) +
                          " outside an active transaction");
    }
    if (c.finished) throw RecorderFault("event after the transaction's commit result");
    if (std::holds_alternative<CommitResultEvent>(event.kind)) {
      if (!c.attempted) throw RecorderFault("commit result without a commit attempt");
      c.finished = true;
    } else if (c.attempted) {
      throw RecorderFault("event after the transaction's commit attempt");
    } else if (std::holds_alternative<CommitAttemptEvent>(event.kind)) {
      c.attempted = true;
    }
  }
  if (const auto stamp = event.stamp()) c.anchor = *stamp;
  events_.emplace_back(c.anchor, std::move(event));
}

Trace TraceRecorder::trace() const {
  std::lock_guard lock(mutex_);
  auto ordered = events_;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  Trace out{engine_, keys_, {}};
  out.events.reserve(ordered.size());
  for (auto& [anchor, event] : ordered) out.events.push_back(std::move(event));
  return out;
}

std::size_t TraceRecorder::size() const {
  std::lock_guard lock(mutex_);
  return events_.size();
}

Verdict validate_wellformed(const Trace& trace) {
  Sequencer sequencer;
  std::uint64_t last_stamp = 0;
  std::set<Timestamp> start_timestamps;
  std::set<Timestamp> commit_timestamps;
  // Start timestamp and own-written keys of each connection's current txn.
  std::map<std::uint64_t, std::pair<Timestamp, std::set<Key>>> current;

  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& event = trace.events[i];
    if (std::string problem = sequencer.accept(event); !problem.empty()) {
      return Verdict::fail(i, "txn-order", problem);
    }
    if (const auto stamp = event.stamp()) {
      if (*stamp == 0 || *stamp <= last_stamp) {
        return Verdict::fail(i, "stamp-order",
                             "stamp " + std::to_string(*stamp) + " does not exceed previous stamp " +
                                 std::to_string(last_stamp));
      }
      last_stamp = *stamp;
    }
    auto& [start_ts, own_keys] = current[event.conn_id];
    const std::string problem = std::visit(
        Overloaded{
            [&](const BeginEvent& e) -> std::string {
              if (e.start_ts.tick == 0) return "begin without a start timestamp";
              if (!start_timestamps.insert(e.start_ts).second ||
                  commit_timestamps.contains(e.start_ts)) {
                return "start timestamp " + to_string(e.start_ts) + " issued twice";
              }
              start_ts = e.start_ts;
              own_keys.clear();
              return {};
            },
            [&](const ReadEvent& e) -> std::string {
              if (!e.stamp && !own_keys.contains(e.key)) {
                return "unstamped read of '" + e.key + "' without a preceding own write";
              }
              return {};
            },
            [&](const LocalWriteEvent& e) -> std::string {
              own_keys.insert(e.key);
              return {};
            },
            [&](const RuWriteEvent& e) -> std::string {
              own_keys.insert(e.key);
              return {};
            },
            [&](const CommitAttemptEvent& e) -> std::string {
              std::set<Key> keys;
              for (const auto& [k, v] : e.writes) {
                if (!keys.insert(k).second) return "duplicate key '" + k + "' in commit attempt";
              }
              return {};
            },
            [&](const CommitResultEvent& e) -> std::string {
              if (!e.commit_ts) return {};
              if (!(*e.commit_ts > start_ts)) {
                return "commit timestamp " + to_string(*e.commit_ts) +
                       " not after start timestamp " + to_string(start_ts);
              }
              if (start_timestamps.contains(*e.commit_ts) ||
                  !commit_timestamps.insert(*e.commit_ts).second) {
                return "commit timestamp " + to_string(*e.commit_ts) + " reused";
              }
              return {};
            },
        },
        event.kind);
    if (!problem.empty()) return Verdict::fail(i, "timestamps", problem);
  }
  return Verdict::ok();
}

std::string encode_event(const TraceEvent& event) {
  json j = json::object();
  j["conn"] = event.conn_id;
  j["txn"] = event.txn_seq;
  std::visit(Overloaded{
                 [&](const BeginEvent& e) {
                   j["ev"] = "begin";
                   j["ts"] = e.start_ts.tick;
                   j["stamp"] = e.stamp;
                 },
                 [&](const ReadEvent& e) {
                   j["ev"] = "read";
                   j["key"] = e.key;
                   j["val"] = e.result ? json(*e.result) : json(nullptr);
                   if (e.stamp) j["stamp"] = *e.stamp;
                 },
                 [&](const LocalWriteEvent& e) {
                   j["ev"] = "write";
                   j["key"] = e.key;
                   j["val"] = e.value;
                 },
                 [&](const RuWriteEvent& e) {
                   j["ev"] = "ru_write";
                   j["key"] = e.key;
                   j["val"] = e.value;
                   j["stamp"] = e.stamp;
                 },
                 [&](const CommitAttemptEvent& e) {
                   j["ev"] = "commit";
                   j["writes"] = writes_to_json(e.writes);
                 },
                 [&](const CommitResultEvent& e) {
                   j["ev"] = "result";
                   j["ok"] = e.ok;
                   j["cts"] = e.commit_ts ? json(e.commit_ts->tick) : json(nullptr);
                   j["stamp"] = e.stamp;
                 },
             },
             event.kind);
  return j.dump() + '\n';
}

TraceEvent decode_event(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  const json j = parse_json_object(line);
  TraceEvent event;
  event.conn_id = need_uint(j, "conn");
  event.txn_seq = need_uint(j, "txn");
  const std::string ev = need_string(j, "ev");
  if (ev == "begin") {
    const std::uint64_t ts = need_uint(j, "ts");
    if (ts == 0) throw DecodeError(0, "start timestamp must be positive");
    event.kind = BeginEvent{Timestamp{ts}, need_uint(j, "stamp")};
  } else if (ev == "read") {
    const json& val = need(j, "val");
    std::optional<Value> result;
    if (!val.is_null()) result = need_value(j);
    event.kind = ReadEvent{need_key(j), result, opt_stamp(j)};
  } else if (ev == "write") {
    event.kind = LocalWriteEvent{need_key(j), need_value(j)};
  } else if (ev == "ru_write") {
    event.kind = RuWriteEvent{need_key(j), need_value(j), need_uint(j, "stamp")};
  } else if (ev == "commit") {
    const json& writes = need(j, "writes");
    if (!writes.is_array()) throw DecodeError(0, "field 'writes' is not an array");
    CommitAttemptEvent attempt;
    for (const json& pair : writes) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string()) {
        throw DecodeError(0, "write entry is not a [key, value] pair");
      }
      attempt.writes.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
    }
    event.kind = std::move(attempt);
  } else if (ev == "result") {
    const json& ok = need(j, "ok");
    if (!ok.is_boolean()) throw DecodeError(0, "field 'ok' is not a boolean");
    CommitResultEvent result{ok.get<bool>(), std::nullopt, need_uint(j, "stamp")};
    if (!need(j, "cts").is_null()) {
      const std::uint64_t cts = need_uint(j, "cts");
      if (cts == 0) throw DecodeError(0, "commit timestamp must be positive");
      result.commit_ts = Timestamp{cts};
    }
    event.kind = result;
  } else {
    throw DecodeError(0, "unknown event kind '" + ev + "'");
  }
  return event;
}

std::string encode_header(EngineKind engine, const std::vector<Key>& keys) {
  json j = json::object();
  j["engine"] = std::string(to_string(engine));
  j["keys"] = keys;
  return j.dump() + '\n';
}

std::string serialize(const Trace& trace) {
  std::string out = encode_header(trace.engine, trace.keys);
  for (const TraceEvent& event : trace.events) out += encode_event(event);
  return out;
}

Trace parse_trace(std::string_view text) {
  Trace trace;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!text.empty()) {
    const auto lf = text.find('\n');
    const std::string_view line = text.substr(0, lf);
    text = lf == std::string_view::npos ? std::string_view{} : text.substr(lf + 1);
    ++line_no;
    try {
      if (!have_header) {
        const json j = parse_json_object(line);
        const auto engine = parse_engine(need_string(j, "engine"));
        if (!engine) throw DecodeError(0, "unknown engine");
        const json& keys = need(j, "keys");
        if (!keys.is_array()) throw DecodeError(0, "field 'keys' is not an array");
        trace.engine = *engine;
        for (const json& k : keys) {
          if (!k.is_string() || !is_valid_key(k.get<std::string>())) {
            throw DecodeError(0, "invalid key in header");
          }
          trace.keys.push_back(k.get<std::string>());
        }
        have_header = true;
      } else {
        trace.events.push_back(decode_event(line));
      }
    } catch (const DecodeError& e) {
      throw TraceParseError(line_no, e.what());
    }
  }
  if (!have_header) throw TraceParseError(1, "missing header line");
  return trace;
}

void save(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << serialize(trace);
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Trace load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_trace(buffer.str());
}

}  // namespace sikv
