// SPDX-License-Identifier: Apache-2.0
#pragma once

// Request/response messages exchanged between client proxies and the server,
// and their single-line wire encoding. Every message encodes to one
// LF-terminated line of flat JSON with keys in alphabetical order:
//
//   {"op":"start"}
//   {"key":"x","op":"read","ts":3}
//   {"key":"x","op":"write","val":"1"}
//   {"op":"commit","ts":3,"writes":[["x","1"]]}
//
//   {"re":"start","stamp":1,"ts":1}
//   {"re":"read","stamp":2,"val":"1"}          (val is null when absent)
//   {"re":"write","stamp":3}
//   {"committed":true,"cts":4,"re":"commit","stamp":4}
//   {"code":"unsupported","message":"...","re":"error"}
//
// `stamp` is the server's linearization counter for the handled request.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "sikv/core.hpp"

namespace sikv {

using WriteList = std::vector<std::pair<Key, Value>>;

struct StartRequest {
  friend bool operator==(const StartRequest&, const StartRequest&) = default;
};
struct ReadRequest {
  Key key;
  Timestamp start_ts;
  friend bool operator==(const ReadRequest&, const ReadRequest&) = default;
};
/// Immediate-propagation write; only the read-uncommitted engine accepts it.
struct WriteRequest {
  Key key;
  Value value;
  friend bool operator==(const WriteRequest&, const WriteRequest&) = default;
};
struct CommitRequest {
  Timestamp start_ts;
  WriteList writes;
  friend bool operator==(const CommitRequest&, const CommitRequest&) = default;
};

using Request = std::variant<StartRequest, ReadRequest, WriteRequest, CommitRequest>;

struct StartResponse {
  Timestamp ts;
  friend bool operator==(const StartResponse&, const StartResponse&) = default;
};
struct ReadResponse {
  std::optional<Value> value;
  friend bool operator==(const ReadResponse&, const ReadResponse&) = default;
};
struct AckResponse {
  friend bool operator==(const AckResponse&, const AckResponse&) = default;
};
struct CommitResponse {
  bool committed = false;
  std::optional<Timestamp> commit_ts;
  friend bool operator==(const CommitResponse&, const CommitResponse&) = default;
};
struct ErrorResponse {
  std::string code;
  std::string message;
  friend bool operator==(const ErrorResponse&, const ErrorResponse&) = default;
};

using Response = std::variant<StartResponse, ReadResponse, AckResponse,
                              CommitResponse, ErrorResponse>;

/// A response together with the server stamp of the request that produced
/// it. Error responses are unstamped (stamp 0).
struct Reply {
  Response response;
  std::uint64_t stamp = 0;
  friend bool operator==(const Reply&, const Reply&) = default;
};

namespace error_code {
inline constexpr std::string_view kUnsupported = "unsupported";
inline constexpr std::string_view kUnknownTimestamp = "unknown_ts";
inline constexpr std::string_view kProtocol = "protocol";
inline constexpr std::string_view kInvalid = "invalid";
inline constexpr std::string_view kMalformed = "malformed";
}  // namespace error_code

class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::size_t offset, const std::string& what)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Converts a write set into the wire list (updated entries only).
WriteList to_write_list(const WriteSet& writes);
/// Throws ContractViolation on duplicate keys.
WriteSet to_write_set(const WriteList& writes);

std::string encode(const Request& request);
std::string encode(const Reply& reply);

/// Accepts a line with or without its trailing LF.
Request decode_request(std::string_view line);
Reply decode_reply(std::string_view line);

std::string_view op_name(const Request& request);

}  // namespace sikv
