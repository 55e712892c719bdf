// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deterministic exploration of small concurrent transaction programs against
// an in-process server. Each client runs a Program: a list of instructions
// where every transactional operation (start, read, local write, commit, one
// wait poll operation) is one schedulable step, and assertions, branches and
// halts take effect immediately after the step that precedes them.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sikv/checker.hpp"
#include "sikv/client.hpp"
#include "sikv/core.hpp"
#include "sikv/server.hpp"
#include "sikv/trace.hpp"

namespace sikv {

/// Local bindings of one client: read results, and commit outcomes stored as
/// "true"/"false".
using Env = std::map<std::string, std::optional<Value>>;
using EnvValue = std::function<Value(const Env&)>;
using EnvPredicate = std::function<bool(const Env&)>;

struct Instr {
  enum class Op { Start, Read, Write, Commit, Wait, WeakWait, Assert, JumpUnless, Halt };
  Op op = Op::Halt;
  Key key;
  std::string var;
  EnvValue value;
  EnvPredicate cond;
  ValuePredicate wait_for;
  std::string label;
  bool assert_ok = false;
  std::size_t target = 0;
};

class Program {
 public:
  Program& start();
  Program& read(const Key& key, const std::string& var = {});
  Program& write(const Key& key, const Value& value);
  Program& write(const Key& key, EnvValue value);
  /// Stores the outcome in `var` when given.
  Program& commit(const std::string& var = {});
  /// Commit whose outcome must be true.
  Program& assert_commit(const std::string& var = {});
  Program& wait(const Key& key, const Value& value);
  Program& weak_wait(const Key& key, const Value& value);
  Program& check(const std::string& label, EnvPredicate cond);
  /// Instructions up to the matching end_if run only when cond holds.
  Program& if_then(EnvPredicate cond);
  Program& end_if();
  /// Stops the client without committing its open transaction.
  Program& halt();

  const std::vector<Instr>& instrs() const { return instrs_; }

 private:
  std::vector<Instr> instrs_;
  std::vector<std::size_t> open_ifs_;
};

/// Reads a binding; empty when unset or none.
std::optional<Value> binding(const Env& env, const std::string& var);
/// Reads a binding as an integer; empty when unset, none or not a number.
std::optional<long long> int_binding(const Env& env, const std::string& var);

/// Committed state and client bindings at the end of a schedule.
struct FinalState {
  /// Latest visible value per key (committed for si/rc, last write for ru).
  std::map<Key, std::optional<Value>> latest;
  std::vector<Env> envs;
};

enum class ExploreMode { Exhaustive, Random };
std::string_view to_string(ExploreMode mode);
std::optional<ExploreMode> parse_mode(std::string_view name);

struct AssertionFailure {
  std::size_t client = 0;
  std::string label;
  /// Replaying this prefix reproduces the failure.
  std::vector<std::size_t> schedule;
};

struct LevelTally {
  std::uint64_t pass = 0;
  std::uint64_t fail = 0;
};

struct ExplorationReport {
  std::string scenario;
  EngineKind engine = EngineKind::SI;
  ExploreMode mode = ExploreMode::Exhaustive;
  std::optional<std::uint64_t> seed;
  std::uint64_t runs = 0;
  std::size_t step_bound = 0;
  bool state_caching = false;

  /// Schedules run to completion.
  std::uint64_t interleavings = 0;
  /// Branches cut because an equivalent state was already explored.
  std::uint64_t pruned = 0;
  /// Branches that hit the step bound or had every live client blocked.
  std::uint64_t inconclusive = 0;

  std::uint64_t assertion_failures = 0;
  /// The first few failures, in exploration order.
  std::vector<AssertionFailure> failures;
  std::map<std::string, std::uint64_t> outcomes;

  std::array<LevelTally, 3> verdicts{};  // indexed by IsolationLevel
  /// First complete schedule whose trace fails each level.
  std::array<std::optional<std::vector<std::size_t>>, 3> first_failing{};
  std::uint64_t inclusion_violations = 0;
  std::uint64_t wellformed_failures = 0;
  std::uint64_t prefix_failures = 0;
  /// Traces failing the level the engine is supposed to provide.
  std::uint64_t engine_level_failures = 0;
  /// Complete schedules during which the server's debug model was violated.
  std::uint64_t model_violations = 0;

  std::vector<std::string> unmet_conditions;
  bool expected = false;
};

struct Scenario {
  std::string name;
  std::string summary;
  std::vector<EngineKind> engines;
  std::vector<Key> keys;
  /// Committed by a setup transaction before any client runs.
  WriteList initial;
  std::function<std::vector<Program>(EngineKind)> programs;
  /// (client, variable) pairs that make up an outcome.
  std::vector<std::pair<std::size_t, std::string>> observe;
  /// Extra checks on each completed schedule; returns failure labels.
  std::function<std::vector<std::string>(EngineKind, const FinalState&)> epilogue;
  /// Whole-exploration requirements (e.g. an outcome that must be witnessed);
  /// returns the unmet ones.
  std::function<std::vector<std::string>(const ExplorationReport&)> requirements;
  /// Merge schedules reaching identical states. Needed where polling makes
  /// the raw schedule space too large; off elsewhere so that schedule counts
  /// stay exact.
  bool state_caching = false;

  bool targets(EngineKind engine) const;
};

struct ExploreOptions {
  std::size_t step_bound = 1000;
  /// Overrides the scenario's own setting when set.
  std::optional<bool> state_caching;
  /// How many failures to keep in the report.
  std::size_t max_failures = 16;
};

/// Every schedule, runnable clients tried in ascending index order. A wait
/// whose poll came up empty is only rescheduled after the store changed.
ExplorationReport explore_exhaustive(const Scenario& scenario, EngineKind engine,
                                     const ExploreOptions& options = {});

/// `runs` schedules drawn from a generator seeded with `seed`.
ExplorationReport explore_random(const Scenario& scenario, EngineKind engine, std::uint64_t seed,
                                 std::uint64_t runs, const ExploreOptions& options = {});

/// Zero assertion failures, clean traces and every scenario requirement met.
/// Throws ContractViolation when the report belongs to another scenario.
bool evaluate_expected(const Scenario& scenario, const ExplorationReport& report);
std::vector<std::string> unmet_requirements(const Scenario& scenario,
                                            const ExplorationReport& report);

struct ReplayResult {
  Trace trace;
  std::vector<AssertionFailure> failures;
  /// Every client finished.
  bool complete = false;
  std::string outcome;
  FinalState final_state;
};

/// Runs exactly the given schedule. Throws ContractViolation when it names a
/// client that cannot step.
ReplayResult replay(const Scenario& scenario, EngineKind engine,
                    const std::vector<std::size_t>& schedule);

/// "c2.vx=1 c2.vy=none" style rendering of the observed bindings.
std::string outcome_of(const Scenario& scenario, const FinalState& state);

}  // namespace sikv
