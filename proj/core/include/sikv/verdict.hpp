// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

namespace sikv {

/// Outcome of a trace or model check. A failure names the violated rule and
/// the position it was detected at (an event index for traces, a start
/// timestamp for the server model).
struct Verdict {
  bool pass = true;
  std::size_t index = 0;
  std::string rule;
  std::string explanation;

  static Verdict ok() { return {}; }
  static Verdict fail(std::size_t index, std::string rule,
                      std::string explanation) {
    return {false, index, std::move(rule), std::move(explanation)};
  }

  explicit operator bool() const { return pass; }
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

}  // namespace sikv
