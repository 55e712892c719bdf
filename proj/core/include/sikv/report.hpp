// SPDX-License-Identifier: Apache-2.0
#pragma once

// Machine-readable renderings of verdicts, exploration reports and replay
// schedules. Object keys are sorted, so equal inputs give equal bytes.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "sikv/checker.hpp"
#include "sikv/harness.hpp"

namespace sikv {

std::string verdict_json(const Verdict& verdict, IsolationLevel level);
std::string inclusion_json(const InclusionReport& report);
std::string report_json(const ExplorationReport& report);
/// Outcome, failures and the three verdicts of a replayed schedule.
std::string replay_json(const ReplayResult& result);

/// A replay file is a JSON array of client indices.
std::string schedule_json(const std::vector<std::size_t>& schedule);
/// Throws DecodeError on anything but an array of non-negative integers.
std::vector<std::size_t> parse_schedule(std::string_view text);

}  // namespace sikv
