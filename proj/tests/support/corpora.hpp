// SPDX-License-Identifier: Apache-2.0
#pragma once

// Input corpora shared by the unit tests and the acceptance binary.

#include <optional>
#include <string>
#include <vector>

#include "schedules.hpp"
#include "sikv/core.hpp"
#include "sikv/harness.hpp"
#include "sikv/scenarios.hpp"
#include "sikv/trace.hpp"

namespace sikv::test_support {

// Every strictly decreasing subset of {1..max_ts} of size <= max_len, as a
// history whose values name their timestamps.
inline std::vector<KeyHistory> all_histories(std::uint64_t max_ts, std::size_t max_len) {
  std::vector<KeyHistory> out;
  for (std::uint32_t mask = 0; mask < (1u << max_ts); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) > max_len) continue;
    KeyHistory h;
    for (std::uint64_t t = max_ts; t >= 1; --t) {
      if (mask & (1u << (t - 1))) h.push_back(Version{"v" + std::to_string(t), Timestamp{t}});
    }
    out.push_back(std::move(h));
  }
  return out;
}

// Traces of every straight-line schedule of a scenario plus each single
// mutation of them: each read result replaced and each commit outcome
// flipped.
inline std::vector<Trace> agreement_corpus(const std::string& name) {
  const Scenario& scenario = *find_scenario(name);
  std::vector<Trace> out;
  for (const EngineKind engine : scenario.engines) {
    for (const auto& schedule : straight_line_schedules(scenario, engine)) {
      const Trace base = replay(scenario, engine, schedule).trace;
      out.push_back(base);
      for (std::size_t i = 0; i < base.events.size(); ++i) {
        if (std::holds_alternative<ReadEvent>(base.events[i].kind)) {
          for (const std::optional<Value>& v : {std::optional<Value>{}, std::optional<Value>{"0"},
                                               std::optional<Value>{"1"}, std::optional<Value>{"2"}}) {
            Trace m = base;
            auto& read = std::get<ReadEvent>(m.events[i].kind);
            if (read.result == v) continue;
            read.result = v;
            out.push_back(std::move(m));
          }
        } else if (std::holds_alternative<CommitResultEvent>(base.events[i].kind)) {
          Trace m = base;
          auto& result = std::get<CommitResultEvent>(m.events[i].kind);
          result.ok = !result.ok;
          out.push_back(std::move(m));
        }
      }
    }
  }
  return out;
}

}  // namespace sikv::test_support
