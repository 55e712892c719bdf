// SPDX-License-Identifier: Apache-2.0
#include "sikv/scenarios.hpp"

#include <algorithm>

namespace sikv {

namespace {

const std::vector<EngineKind> kAllEngines{EngineKind::SI, EngineKind::RC, EngineKind::RU};

EnvPredicate equals(const std::string& var, const Value& value) {
  return [var, value](const Env& env) { return binding(env, var) == value; };
}

bool is_none(const Env& env, const std::string& var) {
  const auto it = env.find(var);
  return it != env.end() && !it->second;
}

bool witnessed(const ExplorationReport& report, const std::string& outcome) {
  const auto it = report.outcomes.find(outcome);
  return it != report.outcomes.end() && it->second > 0;
}

Scenario read_uncommitted_data() {
  Scenario s;
  s.name = "read-uncommitted-data";
  s.summary = "a reader sees nothing or the value of a writer that never commits";
  s.engines = kAllEngines;
  s.keys = {"x"};
  s.programs = [](EngineKind) {
    Program writer;
    writer.start().write("x", "1").halt();
    Program reader;
    reader.start()
        .read("x", "vx")
        .check("vx = none or vx = 1",
               [](const Env& env) { return is_none(env, "vx") || binding(env, "vx") == "1"; })
        .commit();
    return std::vector<Program>{writer, reader};
  };
  s.observe = {{1, "vx"}};
  s.requirements = [](const ExplorationReport& report) {
    std::vector<std::string> unmet;
    if (report.engine == EngineKind::RU && report.mode == ExploreMode::Exhaustive) {
      if (!witnessed(report, "c1.vx=none")) unmet.push_back("outcome vx = none not witnessed");
      if (!witnessed(report, "c1.vx=1")) unmet.push_back("outcome vx = 1 not witnessed");
    }
    return unmet;
  };
  return s;
}

Scenario read_own_data() {
  Scenario s;
  s.name = "read-own-data";
  s.summary = "a transaction reads its own uncommitted write";
  s.engines = kAllEngines;
  s.keys = {"x"};
  s.programs = [](EngineKind) {
    Program a;
    a.start().write("x", "1").commit();
    Program b;
    b.start().write("x", "2").read("x", "vx").check("vx = 2", equals("vx", "2")).commit();
    return std::vector<Program>{a, b};
  };
  s.observe = {{1, "vx"}};
  return s;
}

Scenario dirty_read() {
  Scenario s;
  s.name = "dirty-read";
  s.summary = "a reader never sees a write that was not committed";
  s.engines = kAllEngines;
  s.keys = {"x"};
  s.programs = [](EngineKind engine) {
    Program writer;
    writer.start().write("x", "1").halt();
    Program reader;
    reader.start().read("x", "vx");
    if (engine == EngineKind::RU) {
      reader.check("vx = none or vx = 1", [](const Env& env) {
        return is_none(env, "vx") || binding(env, "vx") == "1";
      });
    } else {
      reader.check("vx = none", [](const Env& env) { return is_none(env, "vx"); });
    }
    reader.commit();
    return std::vector<Program>{writer, reader};
  };
  s.observe = {{1, "vx"}};
  return s;
}

Scenario commit_order() {
  Scenario s;
  s.name = "commit-order";
  s.summary = "two transactions cannot both see each other's commits";
  s.engines = kAllEngines;
  s.keys = {"a", "b", "x", "y"};
  s.programs = [](EngineKind) {
    Program t1;
    t1.start().write("x", "1").read("y", "vy").if_then(equals("vy", "1")).write("a", "1").end_if().commit();
    Program t2;
    t2.start().write("y", "1").read("x", "vx").if_then(equals("vx", "1")).write("b", "1").end_if().commit();
    Program t3;
    t3.start()
        .read("a", "va")
        .read("b", "vb")
        .check("not (va = 1 and vb = 1)",
               [](const Env& env) {
                 return !(binding(env, "va") == "1" && binding(env, "vb") == "1");
               })
        .commit();
    return std::vector<Program>{t1, t2, t3};
  };
  s.observe = {{2, "va"}, {2, "vb"}};
  return s;
}

Scenario write_skew() {
  Scenario s;
  s.name = "write-skew";
  s.summary = "two transactions read each other's key and write disjoint keys; both commit";
  s.engines = kAllEngines;
  s.keys = {"x", "y"};
  s.programs = [](EngineKind) {
    Program a;
    a.start().read("y", "vy").write("x", "1").assert_commit();
    Program b;
    b.start().read("x", "vx").write("y", "1").assert_commit();
    return std::vector<Program>{a, b};
  };
  s.observe = {{0, "vy"}, {1, "vx"}};
  return s;
}

Scenario read_skew() {
  Scenario s;
  s.name = "read-skew";
  s.summary = "a reader sees both or neither of two writes committed together";
  s.engines = kAllEngines;
  s.keys = {"x", "y"};
  s.programs = [](EngineKind) {
    Program writer;
    writer.start().write("x", "1").write("y", "1").assert_commit();
    Program reader;
    reader.start()
        .read("x", "vx")
        .read("y", "vy")
        .check("vx = vy", [](const Env& env) { return env.at("vx") == env.at("vy"); })
        .assert_commit();
    return std::vector<Program>{writer, reader};
  };
  s.observe = {{1, "vx"}, {1, "vy"}};
  return s;
}

Scenario non_repeatable_read() {
  Scenario s;
  s.name = "non-repeatable-read";
  s.summary = "two reads of one key in a transaction agree";
  s.engines = kAllEngines;
  s.keys = {"x"};
  s.programs = [](EngineKind) {
    Program writer;
    writer.start().write("x", "1").assert_commit();
    Program reader;
    reader.start()
        .read("x", "v1")
        .read("x", "v2")
        .check("v1 = v2", [](const Env& env) { return env.at("v1") == env.at("v2"); })
        .assert_commit();
    return std::vector<Program>{writer, reader};
  };
  s.observe = {{1, "v1"}, {1, "v2"}};
  return s;
}

constexpr long long kBankTotal = 10;

Program transfer(long long amount) {
  Program p;
  p.start()
      .read("src", "bal")
      .if_then([amount](const Env& env) {
        const auto bal = int_binding(env, "bal");
        return bal && *bal >= amount;
      })
      .write("src", [amount](const Env& env) { return std::to_string(*int_binding(env, "bal") - amount); })
      .read("dst", "bd")
      .write("dst", [amount](const Env& env) { return std::to_string(int_binding(env, "bd").value_or(0) + amount); })
      .end_if()
      .commit("ok");
  return p;
}

bool applied(const Env& env, long long amount) {
  const auto bal = int_binding(env, "bal");
  return binding(env, "ok") == "true" && bal && *bal >= amount;
}

Scenario bank_transfer() {
  Scenario s;
  s.name = "bank-transfer";
  s.summary = "two transfers of 7 and 6 from an account holding 10";
  s.engines = kAllEngines;
  s.keys = {"dst", "src"};
  s.initial = {{"src", std::to_string(kBankTotal)}, {"dst", "0"}};
  s.programs = [](EngineKind) { return std::vector<Program>{transfer(7), transfer(6)}; };
  s.observe = {{0, "ok"}, {1, "ok"}, {0, "bal"}, {1, "bal"}};
  s.epilogue = [](EngineKind engine, const FinalState& state) {
    std::vector<std::string> failures;
    auto balance = [&](const Key& key) -> std::optional<long long> {
      const auto it = state.latest.find(key);
      if (it == state.latest.end() || !it->second) return std::nullopt;
      Env env{{"v", it->second}};
      return int_binding(env, "v");
    };
    const auto src = balance("src");
    const auto dst = balance("dst");
    if (!src || !dst) {
      failures.push_back("balances unreadable");
      return failures;
    }
    if (*src + *dst != kBankTotal) {
      failures.push_back("src + dst = " + std::to_string(*src + *dst) + ", expected " +
                         std::to_string(kBankTotal));
    }
    if (*src < 0 || *dst < 0) failures.push_back("negative balance");
    if (engine == EngineKind::SI && applied(state.envs[0], 7) && applied(state.envs[1], 6)) {
      failures.push_back("both conflicting transfers committed");
    }
    return failures;
  };
  return s;
}

Scenario atomic_transactions() {
  Scenario s;
  s.name = "atomic-transactions";
  s.summary = "a reader sees x and y from the same writer";
  s.engines = kAllEngines;
  s.keys = {"x", "y"};
  s.programs = [](EngineKind) {
    Program a;
    a.start().write("x", "1").write("y", "1").commit();
    Program b;
    b.start().write("x", "2").write("y", "2").commit();
    Program reader;
    reader.start()
        .read("x", "vx")
        .read("y", "vy")
        .check("vx = vy", [](const Env& env) { return env.at("vx") == env.at("vy"); })
        .assert_commit();
    return std::vector<Program>{a, b, reader};
  };
  s.observe = {{2, "vx"}, {2, "vy"}};
  return s;
}

Scenario convenience_of_points_to() {
  Scenario s;
  s.name = "convenience-of-points-to";
  s.summary = "copy a function of x into y";
  s.engines = kAllEngines;
  s.keys = {"x", "y"};
  s.programs = [](EngineKind) {
    Program writer;
    writer.start().write("x", "1").commit();
    Program copier;
    copier.start()
        .read("x", "r")
        .if_then([](const Env& env) { return binding(env, "r").has_value(); })
        .write("y", [](const Env& env) { return *binding(env, "r"); })
        .end_if()
        .commit("ok");
    return std::vector<Program>{writer, copier};
  };
  s.observe = {{1, "r"}};
  s.epilogue = [](EngineKind, const FinalState& state) {
    std::vector<std::string> failures;
    const Env& copier = state.envs[1];
    const auto y = state.latest.at("y");
    if (binding(copier, "ok") == "true" && binding(copier, "r") != y) {
      failures.push_back("y does not hold the copied value");
    }
    if (y && *y != "1") failures.push_back("y holds a value never written to x");
    return failures;
  };
  return s;
}

Scenario disjoint_writes() {
  Scenario s;
  s.name = "disjoint-writes";
  s.summary = "transactions writing different keys both commit";
  s.engines = kAllEngines;
  s.keys = {"x", "y"};
  s.programs = [](EngineKind) {
    Program a;
    a.start().write("x", "1").assert_commit();
    Program b;
    b.start().write("y", "1").assert_commit();
    return std::vector<Program>{a, b};
  };
  return s;
}

Scenario read_only_commit() {
  Scenario s;
  s.name = "read-only-commit";
  s.summary = "a transaction that only reads always commits";
  s.engines = kAllEngines;
  s.keys = {"x"};
  s.programs = [](EngineKind) {
    Program writer;
    writer.start().write("x", "1").commit();
    Program reader;
    reader.start().read("x", "vx").assert_commit();
    return std::vector<Program>{writer, reader};
  };
  s.observe = {{1, "vx"}};
  return s;
}

Scenario capturing_causality() {
  Scenario s;
  s.name = "capturing-causality";
  s.summary = "a chain of waits orders x before y; whoever sees y sees x";
  s.engines = kAllEngines;
  s.keys = {"x", "y"};
  s.programs = [](EngineKind) {
    Program a;
    a.start().write("x", "1").commit();
    Program b;
    b.wait("x", "1").start().write("y", "1").commit();
    Program c;
    c.wait("y", "1").start().read("x", "vx").check("vx = 1", equals("vx", "1")).commit();
    return std::vector<Program>{a, b, c};
  };
  s.observe = {{2, "vx"}};
  s.state_caching = true;
  return s;
}

Scenario sequential_writes_commit() {
  Scenario s;
  s.name = "sequential-writes-commit";
  s.summary = "a write ordered after another write's commit also commits";
  s.engines = kAllEngines;
  s.keys = {"x"};
  s.programs = [](EngineKind) {
    Program a;
    a.start().write("x", "1").assert_commit();
    Program b;
    b.wait("x", "1").start().write("x", "2").assert_commit();
    return std::vector<Program>{a, b};
  };
  return s;
}

Scenario si_vs_serializability() {
  Scenario s;
  s.name = "si-vs-serializability";
  s.summary = "two writers sharing a snapshot both flip a value; a serial order could not";
  s.engines = kAllEngines;
  s.keys = {"x", "y", "z"};
  s.programs = [](EngineKind) {
    Program init;
    init.start().write("x", "1").write("y", "1").write("z", "1").commit();
    Program flip_y;
    flip_y.wait("z", "1").start().read("x", "vx").if_then(equals("vx", "1")).write("y", "-1").end_if().commit();
    Program flip_x;
    flip_x.wait("z", "1").start().read("y", "vy").if_then(equals("vy", "1")).write("x", "-1").end_if().commit();
    Program observer;
    observer.wait("z", "1")
        .start()
        .read("x", "vx")
        .read("y", "vy")
        .check("vx + vy = -2 or vx + vy >= 0",
               [](const Env& env) {
                 const auto vx = int_binding(env, "vx");
                 const auto vy = int_binding(env, "vy");
                 if (!vx || !vy) return false;
                 return *vx + *vy == -2 || *vx + *vy >= 0;
               })
        .commit();
    return std::vector<Program>{init, flip_y, flip_x, observer};
  };
  s.observe = {{3, "vx"}, {3, "vy"}};
  s.requirements = [](const ExplorationReport& report) {
    std::vector<std::string> unmet;
    if (report.engine == EngineKind::SI && report.mode == ExploreMode::Exhaustive &&
        !witnessed(report, "c3.vx=-1 c3.vy=-1")) {
      unmet.push_back("outcome vx + vy = -2 not witnessed");
    }
    return unmet;
  };
  s.state_caching = true;
  return s;
}

Scenario same_key_writes() {
  Scenario s;
  s.name = "same-key-writes";
  s.summary = "two single-write transactions on one key; with a shared snapshot one aborts";
  s.engines = kAllEngines;
  s.keys = {"x"};
  s.programs = [](EngineKind) {
    Program a;
    a.start().write("x", "1").commit("ok");
    Program b;
    b.start().write("x", "2").commit("ok");
    return std::vector<Program>{a, b};
  };
  s.observe = {{0, "ok"}, {1, "ok"}};
  s.epilogue = [](EngineKind, const FinalState& state) {
    std::vector<std::string> failures;
    if (binding(state.envs[0], "ok") == "false" && binding(state.envs[1], "ok") == "false") {
      failures.push_back("both writers aborted");
    }
    return failures;
  };
  s.requirements = [](const ExplorationReport& report) {
    std::vector<std::string> unmet;
    if (report.engine == EngineKind::SI && report.mode == ExploreMode::Exhaustive) {
      const bool abort_seen = witnessed(report, "c0.ok=true c1.ok=false") ||
                              witnessed(report, "c0.ok=false c1.ok=true");
      if (!abort_seen) unmet.push_back("no schedule aborted a writer");
    }
    return unmet;
  };
  return s;
}

Scenario weak_wait_scenario() {
  Scenario s;
  s.name = "weak-wait";
  s.summary = "one transaction re-reads until another client's write shows up";
  s.engines = {EngineKind::RC, EngineKind::RU};
  s.keys = {"x"};
  s.programs = [](EngineKind) {
    Program writer;
    writer.start().write("x", "1").commit();
    Program waiter;
    waiter.weak_wait("x", "1").start().read("x", "vx").check("vx = 1", equals("vx", "1")).commit();
    return std::vector<Program>{writer, waiter};
  };
  s.observe = {{1, "vx"}};
  return s;
}

}  // namespace

const std::vector<Scenario>& scenario_catalog() {
  static const std::vector<Scenario> catalog{
      read_uncommitted_data(),   read_own_data(),
      dirty_read(),              commit_order(),
      write_skew(),              read_skew(),
      non_repeatable_read(),     bank_transfer(),
      atomic_transactions(),     convenience_of_points_to(),
      disjoint_writes(),         read_only_commit(),
      capturing_causality(),     sequential_writes_commit(),
      si_vs_serializability(),   same_key_writes(),
      weak_wait_scenario(),
  };
  return catalog;
}

const Scenario* find_scenario(std::string_view name) {
  const auto& catalog = scenario_catalog();
  const auto it = std::find_if(catalog.begin(), catalog.end(),
                               [&](const Scenario& s) { return s.name == name; });
  return it == catalog.end() ? nullptr : &*it;
}

}  // namespace sikv
