// SPDX-License-Identifier: Apache-2.0
#include "sikv/harness.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

namespace sikv {

// ---------------------------------------------------------------------------
// Program builder

Program& Program::start() {
  instrs_.push_back(Instr{.op = Instr::Op::Start});
  return *this;
}

Program& Program::read(const Key& key, const std::string& var) {
  instrs_.push_back(Instr{.op = Instr::Op::Read, .key = key, .var = var});
  return *this;
}

Program& Program::write(const Key& key, const Value& value) {
  return write(key, [value](const Env&) { return value; });
}

Program& Program::write(const Key& key, EnvValue value) {
  instrs_.push_back(Instr{.op = Instr::Op::Write, .key = key, .value = std::move(value)});
  return *this;
}

Program& Program::commit(const std::string& var) {
  instrs_.push_back(Instr{.op = Instr::Op::Commit, .var = var});
  return *this;
}

Program& Program::assert_commit(const std::string& var) {
  instrs_.push_back(
      Instr{.op = Instr::Op::Commit, .var = var, .label = "commit", .assert_ok = true});
  return *this;
}

Program& Program::wait(const Key& key, const Value& value) {
  instrs_.push_back(Instr{.op = Instr::Op::Wait,
                          .key = key,
                          .wait_for = [value](const Value& v) { return v == value; }});
  return *this;
}

Program& Program::weak_wait(const Key& key, const Value& value) {
  instrs_.push_back(Instr{.op = Instr::Op::WeakWait,
                          .key = key,
                          .wait_for = [value](const Value& v) { return v == value; }});
  return *this;
}

Program& Program::check(const std::string& label, EnvPredicate cond) {
  instrs_.push_back(Instr{.op = Instr::Op::Assert, .cond = std::move(cond), .label = label});
  return *this;
}

Program& Program::if_then(EnvPredicate cond) {
  open_ifs_.push_back(instrs_.size());
  instrs_.push_back(Instr{.op = Instr::Op::JumpUnless, .cond = std::move(cond)});
  return *this;
}

Program& Program::end_if() {
  if (open_ifs_.empty()) throw ContractViolation("end_if without if_then");
  instrs_[open_ifs_.back()].target = instrs_.size();
  open_ifs_.pop_back();
  return *this;
}

Program& Program::halt() {
  instrs_.push_back(Instr{.op = Instr::Op::Halt});
  return *this;
}

std::optional<Value> binding(const Env& env, const std::string& var) {
  const auto it = env.find(var);
  if (it == env.end()) return std::nullopt;
  return it->second;
}

std::optional<long long> int_binding(const Env& env, const std::string& var) {
  const auto value = binding(env, var);
  if (!value) return std::nullopt;
  long long out = 0;
  const char* begin = value->data();
  const char* end = begin + value->size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return out;
}

std::string_view to_string(ExploreMode mode) {
  return mode == ExploreMode::Exhaustive ? "exhaustive" : "random";
}

std::optional<ExploreMode> parse_mode(std::string_view name) {
  if (name == "exhaustive") return ExploreMode::Exhaustive;
  if (name == "random") return ExploreMode::Random;
  return std::nullopt;
}

bool Scenario::targets(EngineKind engine) const {
  return std::find(engines.begin(), engines.end(), engine) != engines.end();
}

std::string outcome_of(const Scenario& scenario, const FinalState& state) {
  std::string out;
  for (const auto& [client, var] : scenario.observe) {
    if (!out.empty()) out += ' ';
    out += "c" + std::to_string(client) + "." + var + "=";
    if (client >= state.envs.size() || !state.envs[client].contains(var)) {
      out += "unset";
    } else {
      const auto& value = state.envs[client].at(var);
      out += value ? *value : "none";
    }
  }
  return out;
}

namespace {

// ---------------------------------------------------------------------------
// World: server, trace and clients of one partially explored schedule.

struct ClientState {
  Connection conn;
  std::size_t pc = 0;
  Env env;
  std::optional<WaitLoop> wait;
  bool finished = false;
  bool blocked = false;
  std::uint64_t poll_mark = 0;
};

class World {
 public:
  World(const Scenario& scenario, EngineKind engine,
        std::shared_ptr<const std::vector<Program>> programs, bool fair_blocking)
      : programs_(std::move(programs)),
        fair_blocking_(fair_blocking),
        server_(engine, std::set<Key>(scenario.keys.begin(), scenario.keys.end()),
                ServerOptions{.debug_model = true}),
        recorder_(engine, scenario.keys) {
    const std::uint64_t setup_id = programs_->size();
    if (!scenario.initial.empty()) {
      Connection setup(std::make_unique<InProcessChannel>(server_), engine, setup_id, &recorder_);
      setup.start();
      for (const auto& [key, value] : scenario.initial) setup.write(key, value);
      if (!setup.commit()) throw std::logic_error("setup transaction failed to commit");
    }
    for (std::size_t i = 0; i < programs_->size(); ++i) {
      clients_.push_back(ClientState{
          Connection(std::make_unique<InProcessChannel>(server_), engine, i, &recorder_)});
      settle(i);
    }
  }

  std::unique_ptr<World> clone() const { return std::unique_ptr<World>(new World(*this, 0)); }

  bool runnable(std::size_t c) const {
    const ClientState& client = clients_[c];
    if (client.finished) return false;
    if (fair_blocking_ && client.blocked) return server_.mutation_count() != client.poll_mark;
    return true;
  }

  std::vector<std::size_t> runnable() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < clients_.size(); ++c) {
      if (runnable(c)) out.push_back(c);
    }
    return out;
  }

  bool all_finished() const {
    return std::all_of(clients_.begin(), clients_.end(),
                       [](const ClientState& c) { return c.finished; });
  }

  void step(std::size_t c) {
    schedule_.push_back(c);
    ClientState& client = clients_[c];
    client.blocked = false;
    const Instr& instr = program(c)[client.pc];
    try {
      switch (instr.op) {
        case Instr::Op::Start:
          client.conn.start();
          ++client.pc;
          break;
        case Instr::Op::Read: {
          auto value = client.conn.read(instr.key);
          if (!instr.var.empty()) client.env[instr.var] = std::move(value);
          ++client.pc;
          break;
        }
        case Instr::Op::Write:
          client.conn.write(instr.key, instr.value(client.env));
          ++client.pc;
          break;
        case Instr::Op::Commit: {
          const bool ok = client.conn.commit();
          if (!instr.var.empty()) client.env[instr.var] = ok ? "true" : "false";
          if (instr.assert_ok && !ok) fail(c, instr.label);
          ++client.pc;
          break;
        }
        case Instr::Op::Wait:
        case Instr::Op::WeakWait: {
          if (!client.wait) {
            client.wait.emplace(instr.op == Instr::Op::Wait ? WaitLoop::Kind::Strong
                                                             : WaitLoop::Kind::Weak,
                                instr.key, instr.wait_for);
          }
          // The poll observes the store as of its start (strong) or its read
          // (weak); changes after that point make a retry worthwhile.
          const WaitLoop::Phase snapshot_phase = client.wait->kind() == WaitLoop::Kind::Strong
                                                     ? WaitLoop::Phase::Start
                                                     : WaitLoop::Phase::Read;
          if (client.wait->phase() == snapshot_phase) client.poll_mark = server_.mutation_count();
          if (client.wait->step(client.conn)) {
            client.wait.reset();
            ++client.pc;
          } else if (client.wait->last_poll_failed()) {
            client.blocked = true;
          }
          break;
        }
        default:
          throw std::logic_error("instruction is not a step");
      }
    } catch (const std::exception& e) {
      fail(c, std::string("error: ") + e.what());
      client.finished = true;
      return;
    }
    settle(c);
  }

  FinalState final_state() const {
    FinalState state;
    if (server_.kind() == EngineKind::RU) {
      for (const auto& [key, writes] : server_.ru_writes()) {
        state.latest[key] = writes.empty() ? std::nullopt : std::optional<Value>(writes.back().first);
      }
    } else {
      for (const auto& [key, history] : server_.committed_store()) {
        state.latest[key] =
            history.empty() ? std::nullopt : std::optional<Value>(history.front().value);
      }
    }
    for (const ClientState& client : clients_) state.envs.push_back(client.env);
    return state;
  }

  // Everything that determines future behaviour and final outcomes. Engines
  // only ever compare timestamps, so they are replaced by their rank, and a
  // poll only cares whether the store changed since it looked.
  std::string fingerprint() const {
    const Store store = server_.committed_store();
    std::set<Timestamp> stamps{server_.current_time()};
    for (const auto& [key, history] : store) {
      for (const Version& v : history) stamps.insert(v.commit_ts);
    }
    for (const ClientState& client : clients_) {
      if (const auto ts = client.conn.start_ts()) stamps.insert(*ts);
    }
    auto rank = [&](Timestamp ts) { return std::distance(stamps.begin(), stamps.find(ts)); };
    const std::uint64_t mutations = server_.mutation_count();

    std::ostringstream out;
    out << rank(server_.current_time()) << '|' << server_.outstanding_transactions() << '|'
        << (server_.model_violations() > 0) << '|';
    for (const auto& [key, history] : store) {
      out << key << '[';
      for (const Version& v : history) out << v.value << '@' << rank(v.commit_ts) << ',';
      out << ']';
    }
    out << '|';
    for (const auto& [key, writes] : server_.ru_writes()) {
      if (!writes.empty()) out << key << '=' << writes.back().first << ',';
    }
    for (const ClientState& client : clients_) {
      out << '#' << client.pc << (client.finished ? 'F' : '-') << (client.blocked ? 'B' : '-')
          << (mutations != client.poll_mark ? 'M' : '-') << ';';
      if (const auto ts = client.conn.start_ts()) out << rank(*ts);
      out << ';';
      for (const auto& [key, entry] : client.conn.cache()) out << key << '=' << entry.value << ',';
      out << ';';
      for (const auto& [var, value] : client.env) out << var << '=' << (value ? *value : "~") << ',';
      if (client.wait) {
        out << ";w" << static_cast<int>(client.wait->phase()) << client.wait->last_poll_failed()
            << client.wait->observed().value_or("~");
      }
    }
    return out.str();
  }

  std::vector<AssertionFailure> take_failures() { return std::exchange(pending_, {}); }
  const std::vector<std::size_t>& schedule() const { return schedule_; }
  Trace trace() const { return recorder_.trace(); }
  std::size_t model_violations() const { return server_.model_violations(); }
  bool client_finished(std::size_t c) const { return clients_[c].finished; }
  std::size_t size() const { return clients_.size(); }

 private:
  World(const World& other, int)
      : programs_(other.programs_),
        fair_blocking_(other.fair_blocking_),
        server_(other.server_),
        recorder_(other.recorder_),
        schedule_(other.schedule_) {
    for (const ClientState& c : other.clients_) {
      clients_.push_back(ClientState{
          c.conn.rebind(std::make_unique<InProcessChannel>(server_), &recorder_), c.pc, c.env,
          c.wait, c.finished, c.blocked, c.poll_mark});
    }
  }

  const std::vector<Instr>& program(std::size_t c) const { return (*programs_)[c].instrs(); }

  void fail(std::size_t c, const std::string& label) {
    pending_.push_back(AssertionFailure{c, label, schedule_});
  }

  // Runs the non-step instructions that follow the client's last step.
  void settle(std::size_t c) {
    ClientState& client = clients_[c];
    const auto& instrs = program(c);
    while (!client.finished) {
      if (client.pc >= instrs.size()) {
        client.finished = true;
        break;
      }
      const Instr& instr = instrs[client.pc];
      if (instr.op == Instr::Op::Assert) {
        if (!instr.cond(client.env)) fail(c, instr.label);
        ++client.pc;
      } else if (instr.op == Instr::Op::JumpUnless) {
        client.pc = instr.cond(client.env) ? client.pc + 1 : instr.target;
      } else if (instr.op == Instr::Op::Halt) {
        client.finished = true;
      } else {
        break;
      }
    }
  }

  std::shared_ptr<const std::vector<Program>> programs_;
  bool fair_blocking_;
  Server server_;
  TraceRecorder recorder_;
  std::vector<ClientState> clients_;
  std::vector<std::size_t> schedule_;
  std::vector<AssertionFailure> pending_;
};

IsolationLevel engine_level(EngineKind engine) {
  switch (engine) {
    case EngineKind::SI:
      return IsolationLevel::SI;
    case EngineKind::RC:
      return IsolationLevel::RC;
    case EngineKind::RU:
      return IsolationLevel::RU;
  }
  return IsolationLevel::SI;
}

class Explorer {
 public:
  Explorer(const Scenario& scenario, EngineKind engine, ExploreMode mode,
           const ExploreOptions& options)
      : scenario_(scenario), engine_(engine), options_(options) {
    if (!scenario.targets(engine)) {
      throw ContractViolation("scenario '" + scenario.name + "' does not target engine " +
                              std::string(to_string(engine)));
    }
    programs_ = std::make_shared<const std::vector<Program>>(scenario.programs(engine));
    report_.scenario = scenario.name;
    report_.engine = engine;
    report_.mode = mode;
    report_.step_bound = options.step_bound;
    report_.state_caching =
        mode == ExploreMode::Exhaustive && options.state_caching.value_or(scenario.state_caching);
  }

  std::unique_ptr<World> fresh(bool fair_blocking) const {
    return std::make_unique<World>(scenario_, engine_, programs_, fair_blocking);
  }

  void collect(World& world) {
    for (AssertionFailure& failure : world.take_failures()) {
      ++report_.assertion_failures;
      if (report_.failures.size() < options_.max_failures) {
        report_.failures.push_back(std::move(failure));
      }
    }
  }

  void finish(World& world) {
    ++report_.interleavings;
    if (world.model_violations() > 0) ++report_.model_violations;
    const FinalState state = world.final_state();
    ++report_.outcomes[outcome_of(scenario_, state)];
    if (scenario_.epilogue) {
      for (const std::string& label : scenario_.epilogue(engine_, state)) {
        ++report_.assertion_failures;
        if (report_.failures.size() < options_.max_failures) {
          report_.failures.push_back(AssertionFailure{0, label, world.schedule()});
        }
      }
    }
    const Trace trace = world.trace();
    if (!validate_wellformed(trace)) {
      ++report_.wellformed_failures;
      return;
    }
    if (!check_prefix_monotone(trace)) ++report_.prefix_failures;
    const InclusionReport inclusion = check_inclusion(trace);
    const std::array<const Verdict*, 3> verdicts{&inclusion.ru, &inclusion.rc, &inclusion.si};
    for (std::size_t level = 0; level < 3; ++level) {
      if (verdicts[level]->pass) {
        ++report_.verdicts[level].pass;
      } else {
        ++report_.verdicts[level].fail;
        if (!report_.first_failing[level]) report_.first_failing[level] = world.schedule();
      }
    }
    if (inclusion.violation) ++report_.inclusion_violations;
    if (!verdicts[static_cast<std::size_t>(engine_level(engine_))]->pass) {
      ++report_.engine_level_failures;
    }
  }

  void dfs(std::unique_ptr<World> world) {
    collect(*world);
    const std::vector<std::size_t> runnable = world->runnable();
    if (runnable.empty()) {
      if (world->all_finished()) {
        finish(*world);
      } else {
        ++report_.inconclusive;
      }
      return;
    }
    if (world->schedule().size() >= options_.step_bound) {
      ++report_.inconclusive;
      return;
    }
    if (report_.state_caching) {
      const std::string fp = world->fingerprint();
      const std::pair<std::size_t, std::size_t> key{std::hash<std::string>{}(fp), fnv1a(fp)};
      if (!visited_.insert(key).second) {
        ++report_.pruned;
        return;
      }
    }
    for (std::size_t i = 0; i + 1 < runnable.size(); ++i) {
      std::unique_ptr<World> child = world->clone();
      child->step(runnable[i]);
      dfs(std::move(child));
    }
    world->step(runnable.back());
    dfs(std::move(world));
  }

  ExplorationReport exhaustive() {
    dfs(fresh(true));
    return done();
  }

  ExplorationReport random(std::uint64_t seed, std::uint64_t runs) {
    report_.seed = seed;
    report_.runs = runs;
    std::mt19937_64 rng(seed);
    for (std::uint64_t run = 0; run < runs; ++run) {
      std::unique_ptr<World> world = fresh(false);
      for (;;) {
        collect(*world);
        const std::vector<std::size_t> runnable = world->runnable();
        if (runnable.empty()) {
          finish(*world);
          break;
        }
        if (world->schedule().size() >= options_.step_bound) {
          ++report_.inconclusive;
          break;
        }
        world->step(runnable[rng() % runnable.size()]);
      }
    }
    return done();
  }

 private:
  struct PairHash {
    std::size_t operator()(const std::pair<std::size_t, std::size_t>& p) const {
      return p.first ^ (p.second * 0x9e3779b97f4a7c15ULL);
    }
  };

  static std::size_t fnv1a(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const unsigned char ch : text) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }

  ExplorationReport done() {
    report_.unmet_conditions = unmet_requirements(scenario_, report_);
    report_.expected = evaluate_expected(scenario_, report_);
    return std::move(report_);
  }

  const Scenario& scenario_;
  EngineKind engine_;
  ExploreOptions options_;
  std::shared_ptr<const std::vector<Program>> programs_;
  ExplorationReport report_;
  std::unordered_set<std::pair<std::size_t, std::size_t>, PairHash> visited_;
};

}  // namespace

ExplorationReport explore_exhaustive(const Scenario& scenario, EngineKind engine,
                                     const ExploreOptions& options) {
  return Explorer(scenario, engine, ExploreMode::Exhaustive, options).exhaustive();
}

ExplorationReport explore_random(const Scenario& scenario, EngineKind engine, std::uint64_t seed,
                                 std::uint64_t runs, const ExploreOptions& options) {
  return Explorer(scenario, engine, ExploreMode::Random, options).random(seed, runs);
}

std::vector<std::string> unmet_requirements(const Scenario& scenario,
                                            const ExplorationReport& report) {
  if (report.scenario != scenario.name) {
    throw ContractViolation("report for '" + report.scenario + "' evaluated against '" +
                            scenario.name + "'");
  }
  if (!scenario.requirements) return {};
  return scenario.requirements(report);
}

bool evaluate_expected(const Scenario& scenario, const ExplorationReport& report) {
  const std::vector<std::string> unmet = unmet_requirements(scenario, report);
  return report.assertion_failures == 0 && unmet.empty() && report.wellformed_failures == 0 &&
         report.prefix_failures == 0 && report.inclusion_violations == 0 &&
         report.engine_level_failures == 0 && report.model_violations == 0;
}

ReplayResult replay(const Scenario& scenario, EngineKind engine,
                    const std::vector<std::size_t>& schedule) {
  if (!scenario.targets(engine)) {
    throw ContractViolation("scenario '" + scenario.name + "' does not target engine " +
                            std::string(to_string(engine)));
  }
  auto programs = std::make_shared<const std::vector<Program>>(scenario.programs(engine));
  World world(scenario, engine, programs, false);
  ReplayResult result;
  auto collect = [&] {
    for (AssertionFailure& f : world.take_failures()) result.failures.push_back(std::move(f));
  };
  collect();
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const std::size_t c = schedule[i];
    if (c >= world.size() || !world.runnable(c)) {
      throw ContractViolation("schedule position " + std::to_string(i) + " names client " +
                              std::to_string(c) + ", which cannot step");
    }
    world.step(c);
    collect();
  }
  result.complete = world.all_finished();
  result.final_state = world.final_state();
  result.outcome = outcome_of(scenario, result.final_state);
  if (result.complete && scenario.epilogue) {
    for (const std::string& label : scenario.epilogue(engine, result.final_state)) {
      result.failures.push_back(AssertionFailure{0, label, schedule});
    }
  }
  result.trace = world.trace();
  return result;
}

}  // namespace sikv
