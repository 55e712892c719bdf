// SPDX-License-Identifier: Apache-2.0
#include "sikv/protocol.hpp"

#include <set>

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

std::string dump_line(const json& j) { return j.dump() + '\n'; }

std::string_view strip_lf(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  return line;
}

json parse_object(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    // nlohmann reports 1-based positions.
    throw DecodeError(e.byte > 0 ? e.byte - 1 : 0, "malformed message");
  }
  if (!j.is_object()) throw DecodeError(0, "message is not an object");
  return j;
}

const json& field(const json& j, const char* name, std::size_t line_size) {
  const auto it = j.find(name);
  if (it == j.end()) {
    throw DecodeError(line_size, std::string("missing field '") + name + "'");
  }
  return *it;
}

std::string string_field(const json& j, const char* name, std::size_t n) {
  const json& f = field(j, name, n);
  if (!f.is_string()) {
    throw DecodeError(n, std::string("field '") + name + "' is not a string");
  }
  return f.get<std::string>();
}

Timestamp ts_field(const json& j, const char* name, std::size_t n) {
  const json& f = field(j, name, n);
  if (!f.is_number_unsigned() || f.get<std::uint64_t>() == 0) {
    throw DecodeError(n, std::string("field '") + name + "' is not a positive integer");
  }
  return Timestamp{f.get<std::uint64_t>()};
}

std::uint64_t stamp_field(const json& j, std::size_t n) {
  const json& f = field(j, "stamp", n);
  if (!f.is_number_unsigned()) throw DecodeError(n, "field 'stamp' is not an integer");
  return f.get<std::uint64_t>();
}

Key checked_key(std::string key, std::size_t n) {
  if (!is_valid_key(key)) throw DecodeError(n, "invalid key");
  return key;
}

Value checked_value(std::string value, std::size_t n) {
  if (!is_valid_value(value)) throw DecodeError(n, "invalid value");
  return value;
}

void expect_fields(const json& j, std::initializer_list<const char*> names,
                   std::size_t n) {
  if (j.size() != names.size()) throw DecodeError(n, "unexpected fields in message");
  for (const char* name : names) field(j, name, n);
}

}  // namespace

WriteList to_write_list(const WriteSet& writes) {
  WriteList out;
  out.reserve(writes.size());
  for (const auto& [key, entry] : writes) {
    if (entry.updated) out.emplace_back(key, entry.value);
  }
  return out;
}

WriteSet to_write_set(const WriteList& writes) {
  WriteSet out;
  for (const auto& [key, value] : writes) {
    if (!out.emplace(key, WriteEntry{value, true}).second) {
      throw ContractViolation("duplicate key '" + key + "' in write list");
    }
  }
  return out;
}

std::string_view op_name(const Request& request) {
  return std::visit(Overloaded{
                        [](const StartRequest&) { return std::string_view("start"); },
                        [](const ReadRequest&) { return std::string_view("read"); },
                        [](const WriteRequest&) { return std::string_view("write"); },
                        [](const CommitRequest&) { return std::string_view("commit"); },
                    },
                    request);
}

std::string encode(const Request& request) {
  json j = json::object();
  std::visit(Overloaded{
                 [&](const StartRequest&) { j["op"] = "start"; },
                 [&](const ReadRequest& r) {
                   j["op"] = "read";
                   j["key"] = r.key;
                   j["ts"] = r.start_ts.tick;
                 },
                 [&](const WriteRequest& r) {
                   j["op"] = "write";
                   j["key"] = r.key;
                   j["val"] = r.value;
                 },
                 [&](const CommitRequest& r) {
                   j["op"] = "commit";
                   j["ts"] = r.start_ts.tick;
                   json writes = json::array();
                   for (const auto& [k, v] : r.writes) writes.push_back(json::array({k, v}));
                   j["writes"] = std::move(writes);
                 },
             },
             request);
  return dump_line(j);
}

std::string encode(const Reply& reply) {
  json j = json::object();
  std::visit(Overloaded{
                 [&](const StartResponse& r) {
                   j["re"] = "start";
                   j["ts"] = r.ts.tick;
                   j["stamp"] = reply.stamp;
                 },
                 [&](const ReadResponse& r) {
                   j["re"] = "read";
                   j["val"] = r.value ? json(*r.value) : json(nullptr);
                   j["stamp"] = reply.stamp;
                 },
                 [&](const AckResponse&) {
                   j["re"] = "write";
                   j["stamp"] = reply.stamp;
                 },
                 [&](const CommitResponse& r) {
                   j["re"] = "commit";
                   j["committed"] = r.committed;
                   j["cts"] = r.commit_ts ? json(r.commit_ts->tick) : json(nullptr);
                   j["stamp"] = reply.stamp;
                 },
                 [&](const ErrorResponse& r) {
                   j["re"] = "error";
                   j["code"] = r.code;
                   j["message"] = r.message;
                 },
             },
             reply.response);
  return dump_line(j);
}

Request decode_request(std::string_view line) {
  line = strip_lf(line);
  const std::size_t n = line.size();
  const json j = parse_object(line);
  const std::string op = string_field(j, "op", n);
  if (op == "start") {
    expect_fields(j, {"op"}, n);
    return StartRequest{};
  }
  if (op == "read") {
    expect_fields(j, {"op", "key", "ts"}, n);
    return ReadRequest{checked_key(string_field(j, "key", n), n), ts_field(j, "ts", n)};
  }
  if (op == "write") {
    expect_fields(j, {"op", "key", "val"}, n);
    return WriteRequest{checked_key(string_field(j, "key", n), n),
                        checked_value(string_field(j, "val", n), n)};
  }
  if (op == "commit") {
    expect_fields(j, {"op", "ts", "writes"}, n);
    const json& writes = field(j, "writes", n);
    if (!writes.is_array()) throw DecodeError(n, "field 'writes' is not an array");
    CommitRequest commit{ts_field(j, "ts", n), {}};
    std::set<Key> seen;
    for (const json& pair : writes) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() ||
          !pair[1].is_string()) {
        throw DecodeError(n, "write entry is not a [key, value] pair");
      }
      Key key = checked_key(pair[0].get<std::string>(), n);
      if (!seen.insert(key).second) throw DecodeError(n, "duplicate key in writes");
      commit.writes.emplace_back(std::move(key),
                                 checked_value(pair[1].get<std::string>(), n));
    }
    return commit;
  }
  throw DecodeError(n, "unknown op '" + op + "'");
}

Reply decode_reply(std::string_view line) {
  line = strip_lf(line);
  const std::size_t n = line.size();
  const json j = parse_object(line);
  const std::string re = string_field(j, "re", n);
  if (re == "start") {
    expect_fields(j, {"re", "stamp", "ts"}, n);
    return {StartResponse{ts_field(j, "ts", n)}, stamp_field(j, n)};
  }
  if (re == "read") {
    expect_fields(j, {"re", "stamp", "val"}, n);
    const json& v = field(j, "val", n);
    if (v.is_null()) return {ReadResponse{std::nullopt}, stamp_field(j, n)};
    if (!v.is_string()) throw DecodeError(n, "field 'val' is not a string or null");
    return {ReadResponse{checked_value(v.get<std::string>(), n)}, stamp_field(j, n)};
  }
  if (re == "write") {
    expect_fields(j, {"re", "stamp"}, n);
    return {AckResponse{}, stamp_field(j, n)};
  }
  if (re == "commit") {
    expect_fields(j, {"re", "committed", "cts", "stamp"}, n);
    const json& committed = field(j, "committed", n);
    if (!committed.is_boolean()) throw DecodeError(n, "field 'committed' is not a boolean");
    CommitResponse r{committed.get<bool>(), std::nullopt};
    if (!field(j, "cts", n).is_null()) r.commit_ts = ts_field(j, "cts", n);
    return {r, stamp_field(j, n)};
  }
  if (re == "error") {
    expect_fields(j, {"re", "code", "message"}, n);
    return {ErrorResponse{string_field(j, "code", n), string_field(j, "message", n)}, 0};
  }
  throw DecodeError(n, "unknown response kind '" + re + "'");
}

}  // namespace sikv
