// SPDX-License-Identifier: Apache-2.0
#pragma once

// A deterministic 500-request script exercising every request kind,
// including rejected ones. Later requests use timestamps issued by earlier
// replies, so two equivalent transports see identical request lines.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sikv/protocol.hpp"
#include "sikv/server.hpp"

namespace sikv::test_support {

inline constexpr std::size_t kGoldenScriptLength = 500;

struct Transcript {
  std::vector<std::string> requests;
  std::vector<std::string> replies;
};

/// `send` takes one encoded request line and returns the raw reply line.
inline Transcript run_golden_script(EngineKind engine,
                                    const std::function<std::string(const std::string&)>& send) {
  std::mt19937_64 rng(0x5eed0000 + static_cast<std::uint64_t>(engine));
  const char* const keys[] = {"x", "y", "z"};
  std::vector<Timestamp> open;
  Transcript out;
  for (std::size_t i = 0; i < kGoldenScriptLength; ++i) {
    Request request;
    const auto pick = rng() % 10;
    if (open.empty() || pick < 2) {
      request = StartRequest{};
    } else if (pick < 5) {
      const Timestamp ts = rng() % 20 == 0 ? Timestamp{100000} : open[rng() % open.size()];
      request = ReadRequest{keys[rng() % 3], ts};
    } else if (pick < 7) {
      request = WriteRequest{keys[rng() % 3], std::to_string(rng() % 100)};
    } else {
      const std::size_t at = rng() % open.size();
      CommitRequest commit{open[at], {}};
      for (const char* key : keys) {
        if (rng() % 2) commit.writes.emplace_back(key, std::to_string(i));
      }
      request = commit;
      open.erase(open.begin() + static_cast<std::ptrdiff_t>(at));
    }
    const std::string line = encode(request);
    const std::string reply_line = send(line);
    if (std::holds_alternative<StartRequest>(request)) {
      const Reply reply = decode_reply(reply_line);
      if (const auto* start = std::get_if<StartResponse>(&reply.response)) open.push_back(start->ts);
    }
    out.requests.push_back(line);
    out.replies.push_back(reply_line);
  }
  return out;
}

}  // namespace sikv::test_support
