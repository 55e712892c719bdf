// SPDX-License-Identifier: Apache-2.0
#pragma once

// Built-in litmus scenarios for the explorer.

#include <string_view>
#include <vector>

#include "sikv/harness.hpp"

namespace sikv {

const std::vector<Scenario>& scenario_catalog();

/// nullptr when no scenario has that name.
const Scenario* find_scenario(std::string_view name);

}  // namespace sikv
