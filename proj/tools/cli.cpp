// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "sikv/checker.hpp"
#include "sikv/harness.hpp"
#include "sikv/report.hpp"
#include "sikv/scenarios.hpp"
#include "sikv/trace.hpp"

namespace sikv::cli {

namespace {

std::atomic<TcpServer*> g_active_server{nullptr};

extern "C" void handle_stop_signal(int) {
  if (TcpServer* server = g_active_server.load()) server->request_stop();
}

std::set<Key> split_keys(const std::string& text) {
  std::set<Key> keys;
  std::stringstream in(text);
  std::string key;
  while (std::getline(in, key, ',')) {
    if (!key.empty()) keys.insert(key);
  }
  return keys;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

struct ServeArgs {
  std::string engine;
  std::string listen = "127.0.0.1:7001";
  bool debug_model = false;
  std::string keys;
  std::size_t max_outstanding = 0;
};

struct ExploreArgs {
  std::string scenario;
  std::string engine;
  std::string mode = "exhaustive";
  std::uint64_t seed = 1;
  std::uint64_t runs = 1000;
  std::size_t step_bound = 1000;
  std::string emit_traces;
  std::string replay;
};

struct CheckArgs {
  std::string trace;
  std::string level;
  bool inclusion = false;
};

int main_serve(const ServeArgs& args, std::ostream& err) {
  HostPort address;
  try {
    address = parse_host_port(args.listen);
  } catch (const std::invalid_argument& e) {
    err << "serve: " << e.what() << '\n';
    return exit_code::kUsage;
  }
  std::set<Key> keys = split_keys(args.keys);
  for (const Key& key : keys) {
    if (!is_valid_key(key)) {
      err << "serve: invalid key '" << key << "'\n";
      return exit_code::kUsage;
    }
  }
  ServerOptions options;
  options.debug_model = args.debug_model;
  options.abort_on_model_violation = args.debug_model;
  if (args.max_outstanding > 0) options.max_outstanding = args.max_outstanding;
  Server server(*parse_engine(args.engine), keys, options);
  return serve(server, address, err, [&](TcpServer& tcp) {
    err << "serving " << args.engine << " on " << address.host << ':' << tcp.port() << '\n';
  });
}

void emit(const std::filesystem::path& dir, const std::string& stem, const Scenario& scenario,
          EngineKind engine, const std::vector<std::size_t>& schedule) {
  const ReplayResult result = replay(scenario, engine, schedule);
  save(result.trace, dir / (stem + ".trace.jsonl"));
  write_file(dir / (stem + ".replay.json"), schedule_json(schedule));
}

int main_replay(const ExploreArgs& args, const Scenario& scenario, EngineKind engine,
                std::ostream& out, std::ostream& err) {
  std::vector<std::size_t> schedule;
  ReplayResult result;
  try {
    schedule = parse_schedule(read_file(args.replay));
    result = replay(scenario, engine, schedule);
  } catch (const std::exception& e) {
    err << "explore: replay " << args.replay << ": " << e.what() << '\n';
    return exit_code::kData;
  }
  if (!args.emit_traces.empty()) {
    std::filesystem::create_directories(args.emit_traces);
    save(result.trace, std::filesystem::path(args.emit_traces) / "replay.trace.jsonl");
  }
  for (const AssertionFailure& f : result.failures) {
    err << "client " << f.client << ": " << f.label << '\n';
  }
  out << replay_json(result);
  return result.failures.empty() ? exit_code::kPass : exit_code::kFail;
}

int main_explore(const ExploreArgs& args, std::ostream& out, std::ostream& err) {
  const Scenario* scenario = find_scenario(args.scenario);
  if (!scenario) {
    err << "explore: unknown scenario '" << args.scenario << "'\n";
    return exit_code::kUsage;
  }
  const EngineKind engine = *parse_engine(args.engine);
  if (!scenario->targets(engine)) {
    err << "explore: scenario '" << scenario->name << "' does not run on engine " << args.engine
        << '\n';
    return exit_code::kUsage;
  }
  if (!args.replay.empty()) return main_replay(args, *scenario, engine, out, err);

  ExploreOptions options;
  options.step_bound = args.step_bound;
  const ExploreMode mode = *parse_mode(args.mode);
  const ExplorationReport report =
      mode == ExploreMode::Exhaustive
          ? explore_exhaustive(*scenario, engine, options)
          : explore_random(*scenario, engine, args.seed, args.runs, options);
  out << report_json(report);

  if (!args.emit_traces.empty()) {
    const std::filesystem::path dir(args.emit_traces);
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < report.failures.size(); ++i) {
      emit(dir, "failure-" + std::to_string(i), *scenario, engine, report.failures[i].schedule);
    }
    for (const IsolationLevel level :
         {IsolationLevel::RU, IsolationLevel::RC, IsolationLevel::SI}) {
      if (const auto& schedule = report.first_failing[static_cast<std::size_t>(level)]) {
        emit(dir, "fails-" + std::string(to_string(level)), *scenario, engine, *schedule);
      }
    }
  }

  err << scenario->name << " on " << args.engine << ": " << report.interleavings
      << " schedules, " << report.assertion_failures << " assertion failures, "
      << report.inconclusive << " inconclusive";
  if (report.pruned > 0) err << ", " << report.pruned << " merged";
  err << '\n';
  for (const std::string& unmet : report.unmet_conditions) err << "unmet: " << unmet << '\n';
  if (report.model_violations > 0) {
    err << "server model violated in " << report.model_violations << " schedules\n";
    return exit_code::kModelViolation;
  }
  return report.expected ? exit_code::kPass : exit_code::kFail;
}

int main_check(const CheckArgs& args, std::ostream& out, std::ostream& err) {
  if (args.level.empty() && !args.inclusion) {
    err << "check: give --level, --inclusion or both\n";
    return exit_code::kUsage;
  }
  if (!std::filesystem::exists(args.trace)) {
    err << "check: no such file '" << args.trace << "'\n";
    return exit_code::kUsage;
  }
  Trace trace;
  try {
    trace = load(args.trace);
  } catch (const TraceParseError& e) {
    err << "check: " << args.trace << ": " << e.what() << '\n';
    return exit_code::kData;
  } catch (const std::exception& e) {
    err << "check: " << e.what() << '\n';
    return exit_code::kData;
  }
  if (const Verdict wf = validate_wellformed(trace); !wf) {
    err << "check: " << args.trace << ": ill-formed trace at event " << wf.index << " ["
        << wf.rule << "] " << wf.explanation << '\n';
    return exit_code::kData;
  }
  int code = exit_code::kPass;
  if (!args.level.empty()) {
    const IsolationLevel level = *parse_level(args.level);
    const Verdict verdict = check(trace, level);
    out << verdict_json(verdict, level);
    if (!verdict.pass) {
      err << "fails " << args.level << " at event " << verdict.index << " [" << verdict.rule
          << "] " << verdict.explanation << '\n';
      code = exit_code::kFail;
    }
  }
  if (args.inclusion) {
    const InclusionReport report = check_inclusion(trace);
    out << inclusion_json(report);
    if (report.violation) {
      err << "inclusion violated\n";
      code = exit_code::kFail;
    }
  }
  return code;
}

}  // namespace

int serve(Server& server, const HostPort& address, std::ostream& err,
          const std::function<void(TcpServer&)>& on_listening) {
  std::unique_ptr<TcpServer> tcp;
  try {
    tcp = std::make_unique<TcpServer>(server, address);
  } catch (const AddressInUse& e) {
    err << "serve: address in use: " << e.what() << '\n';
    return exit_code::kRuntime;
  } catch (const TransportError& e) {
    err << "serve: " << e.what() << '\n';
    return exit_code::kRuntime;
  }
  g_active_server.store(tcp.get());
  auto previous_int = std::signal(SIGINT, handle_stop_signal);
  auto previous_term = std::signal(SIGTERM, handle_stop_signal);
  if (on_listening) on_listening(*tcp);
  tcp->serve();
  tcp->stop();
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);
  g_active_server.store(nullptr);
  if (tcp->model_violated()) {
    err << "serve: server model violated; aborting\n";
    return exit_code::kModelViolation;
  }
  return exit_code::kPass;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-version transactional key-value store: server, explorer and checker", "sikv"};
  app.require_subcommand(1);
  const std::vector<std::string> engines{"si", "rc", "ru"};

  ServeArgs serve_args;
  CLI::App* serve_cmd = app.add_subcommand("serve", "Run the TCP server");
  serve_cmd->add_option("--engine", serve_args.engine, "Isolation level of the server")
      ->required()
      ->check(CLI::IsMember(engines));
  serve_cmd->add_option("--listen", serve_args.listen, "HOST:PORT to listen on")
      ->capture_default_str();
  serve_cmd->add_flag("--debug-model", serve_args.debug_model,
                      "Check the server's logical model after every request; abort on violation");
  serve_cmd->add_option("--keys", serve_args.keys, "Comma-separated keys to pre-create");
  serve_cmd->add_option("--max-outstanding", serve_args.max_outstanding,
                        "Evict the oldest unfinished transaction beyond this many (0 = unbounded)");

  ExploreArgs explore_args;
  CLI::App* explore_cmd = app.add_subcommand("explore", "Explore a scenario's interleavings");
  explore_cmd->add_option("--scenario", explore_args.scenario, "Scenario name")->required();
  explore_cmd->add_option("--engine", explore_args.engine, "Engine to run against")
      ->required()
      ->check(CLI::IsMember(engines));
  explore_cmd->add_option("--mode", explore_args.mode, "exhaustive or random")
      ->check(CLI::IsMember({"exhaustive", "random"}))
      ->capture_default_str();
  explore_cmd->add_option("--seed", explore_args.seed, "Random mode seed")->capture_default_str();
  explore_cmd->add_option("--runs", explore_args.runs, "Random mode schedule count")
      ->capture_default_str();
  explore_cmd->add_option("--step-bound", explore_args.step_bound, "Steps before a schedule is inconclusive")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  explore_cmd->add_option("--emit-traces", explore_args.emit_traces,
                          "Directory for traces and replay files of failing schedules");
  explore_cmd->add_option("--replay", explore_args.replay, "Replay file to run instead of exploring");

  CLI::App* list_cmd = app.add_subcommand("scenarios", "List the built-in scenarios");

  CheckArgs check_args;
  CLI::App* check_cmd = app.add_subcommand("check", "Check a trace file against an isolation level");
  check_cmd->add_option("--trace", check_args.trace, "Trace file (JSON lines)")->required();
  check_cmd->add_option("--level", check_args.level, "ru, rc or si")
      ->check(CLI::IsMember({"ru", "rc", "si"}));
  check_cmd->add_flag("--inclusion", check_args.inclusion,
                      "Report all three levels and flag a stronger pass over a weaker fail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::kPass;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_code::kPass;
  } catch (const CLI::ParseError& e) {
    err << e.get_name() << ": " << e.what() << '\n';
    CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << "run '" << sub->get_name() << " --help' for usage\n";
    return exit_code::kUsage;
  }

  try {
    if (serve_cmd->parsed()) return main_serve(serve_args, err);
    if (explore_cmd->parsed()) return main_explore(explore_args, out, err);
    if (check_cmd->parsed()) return main_check(check_args, out, err);
    if (list_cmd->parsed()) {
      for (const Scenario& s : scenario_catalog()) out << s.name << "  " << s.summary << '\n';
      return exit_code::kPass;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kRuntime;
  }
  return exit_code::kUsage;
}

}  // namespace sikv::cli
