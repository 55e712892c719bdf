// SPDX-License-Identifier: Apache-2.0
#pragma once

// Decides whether a well-formed trace is consistent with read uncommitted,
// read committed or snapshot isolation.
//
// Rules, by name as they appear in failing verdicts:
//   own-write  a read after the transaction wrote the key returns its latest
//              write (every level)
//   ru-read    otherwise none, or some value written anywhere earlier in the
//              log (uncommitted writes included)
//   rc-read    otherwise none, or some value of a successful commit logged
//              earlier
//   si-read    otherwise the latest value committed before the transaction
//              began (none if there is none)
//   si-commit  a commit succeeds iff no other successful commit to one of its
//              keys lies between its begin and its commit result

#include <cstdint>
#include <optional>
#include <string_view>

#include "sikv/core.hpp"
#include "sikv/trace.hpp"
#include "sikv/verdict.hpp"

namespace sikv {

enum class IsolationLevel { RU, RC, SI };

std::string_view to_string(IsolationLevel level);
std::optional<IsolationLevel> parse_level(std::string_view name);

/// Throws ContractViolation when the trace is not well formed.
Verdict check(const Trace& trace, IsolationLevel level);

/// Versions committed to `key` by successful commits stamped before `stamp`,
/// newest first. Commits without a commit timestamp contribute nothing.
KeyHistory committed_history_at(const Trace& trace, const Key& key, std::uint64_t stamp);

/// Every key's committed history only ever grows at the new end.
Verdict check_prefix_monotone(const Trace& trace);

struct InclusionReport {
  Verdict ru;
  Verdict rc;
  Verdict si;
  /// A stronger level passed where a weaker one failed.
  bool violation = false;
};

InclusionReport check_inclusion(const Trace& trace);

}  // namespace sikv
