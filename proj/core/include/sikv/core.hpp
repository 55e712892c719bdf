// SPDX-License-Identifier: Apache-2.0
#pragma once

// Pure transaction logic shared by the engines and the checkers: version
// lookup against a start timestamp, the per-key commit check, commit
// application and the cut predicate relating a snapshot to a live history.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sikv {

/// Keys are non-empty UTF-8 strings without control characters.
using Key = std::string;
/// Values are opaque UTF-8 strings without an embedded newline.
using Value = std::string;

/// A tick of the server clock. Start and commit timestamps are drawn from
/// the same counter, so a tick is never both.
struct Timestamp {
  std::uint64_t tick = 0;

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

struct Version {
  Value value;
  Timestamp commit_ts;

  friend bool operator==(const Version&, const Version&) = default;
};

/// Committed versions of one key, newest first. Commit timestamps strictly
/// decrease from head to tail.
using KeyHistory = std::vector<Version>;

/// A buffered write. `updated` mirrors the per-key update flag of the
/// transaction; every entry produced by the client has it set.
struct WriteEntry {
  Value value;
  bool updated = true;

  friend bool operator==(const WriteEntry&, const WriteEntry&) = default;
};

using WriteSet = std::map<Key, WriteEntry>;
using Store = std::map<Key, KeyHistory>;

/// A message or history that the assembled system can never produce, such
/// as a version whose commit timestamp equals a start timestamp.
class ProtocolViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

bool is_valid_utf8(std::string_view text);
bool is_valid_key(std::string_view key);
bool is_valid_value(std::string_view value);
void require_valid_key(std::string_view key);
void require_valid_value(std::string_view value);

/// True iff commit timestamps strictly decrease from head to tail.
bool is_well_formed(const KeyHistory& history);

/// The history stored for `key`, or an empty history for a key never written.
const KeyHistory& history_of(const Store& store, const Key& key);

/// Value of the newest version committed strictly before `start_ts`.
/// Throws ProtocolViolation if any version carries exactly `start_ts`.
std::optional<Value> version_lookup(const KeyHistory& history,
                                    Timestamp start_ts);

/// True iff nothing was committed to the key at or after `start_ts`.
bool check_key(const KeyHistory& history, Timestamp start_ts);

/// Every key the transaction updated must have the same history in the
/// current store as in its start snapshot. Throws ContractViolation when a
/// written key is missing from either map.
bool can_commit(const Store& current, const Store& snapshot,
                const WriteSet& writes);

/// Prepends Version(value, commit_ts) to the history of every updated key.
/// `commit_ts` must exceed every timestamp already in the store.
Store apply_commit(Store store, const WriteSet& writes, Timestamp commit_ts);

/// In-place variant used by the server; same contract as apply_commit.
void apply_commit_in_place(Store& store, const WriteSet& writes,
                           Timestamp commit_ts);

/// `t` cuts `full` at `prefix`: `full` is some newer versions followed by
/// `prefix`, everything in `prefix` is older than `t` and everything else is
/// newer.
bool is_cut(Timestamp t, const KeyHistory& prefix, const KeyHistory& full);

std::string to_string(Timestamp ts);
std::string to_string(const KeyHistory& history);

}  // namespace sikv
