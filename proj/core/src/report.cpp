// SPDX-License-Identifier: Apache-2.0
#include "sikv/report.hpp"

#include "json.hpp"
#include "sikv/protocol.hpp"

namespace sikv {

using json = nlohmann::json;

namespace {

json verdict_object(const Verdict& verdict) {
  json j = json::object();
  j["pass"] = verdict.pass;
  if (!verdict.pass) {
    j["event"] = verdict.index;
    j["rule"] = verdict.rule;
    j["explanation"] = verdict.explanation;
  }
  return j;
}

constexpr IsolationLevel kLevels[] = {IsolationLevel::RU, IsolationLevel::RC, IsolationLevel::SI};

}  // namespace

std::string verdict_json(const Verdict& verdict, IsolationLevel level) {
  json j = verdict_object(verdict);
  j["level"] = std::string(to_string(level));
  return j.dump() + '\n';
}

std::string inclusion_json(const InclusionReport& report) {
  json j = json::object();
  j["ru"] = verdict_object(report.ru);
  j["rc"] = verdict_object(report.rc);
  j["si"] = verdict_object(report.si);
  j["violation"] = report.violation;
  return j.dump() + '\n';
}

std::string report_json(const ExplorationReport& report) {
  json j = json::object();
  j["scenario"] = report.scenario;
  j["engine"] = std::string(to_string(report.engine));
  j["mode"] = std::string(to_string(report.mode));
  j["seed"] = report.seed ? json(*report.seed) : json(nullptr);
  j["runs"] = report.runs;
  j["step_bound"] = report.step_bound;
  j["state_caching"] = report.state_caching;
  j["interleavings"] = report.interleavings;
  j["pruned"] = report.pruned;
  j["inconclusive"] = report.inconclusive;
  j["assertion_failures"] = report.assertion_failures;
  json failures = json::array();
  for (const AssertionFailure& f : report.failures) {
    failures.push_back({{"client", f.client}, {"label", f.label}, {"schedule", f.schedule}});
  }
  j["failures"] = failures;
  json outcomes = json::object();
  for (const auto& [outcome, count] : report.outcomes) outcomes[outcome] = count;
  j["outcomes"] = outcomes;
  json verdicts = json::object();
  json first_failing = json::object();
  for (const IsolationLevel level : kLevels) {
    const auto i = static_cast<std::size_t>(level);
    const std::string name(to_string(level));
    verdicts[name] = {{"pass", report.verdicts[i].pass}, {"fail", report.verdicts[i].fail}};
    first_failing[name] =
        report.first_failing[i] ? json(*report.first_failing[i]) : json(nullptr);
  }
  j["verdicts"] = verdicts;
  j["first_failing"] = first_failing;
  j["inclusion_violations"] = report.inclusion_violations;
  j["wellformed_failures"] = report.wellformed_failures;
  j["prefix_failures"] = report.prefix_failures;
  j["engine_level_failures"] = report.engine_level_failures;
  j["model_violations"] = report.model_violations;
  j["unmet"] = report.unmet_conditions;
  j["expected"] = report.expected;
  return j.dump(2) + '\n';
}

std::string replay_json(const ReplayResult& result) {
  json j = json::object();
  j["complete"] = result.complete;
  j["events"] = result.trace.events.size();
  j["outcome"] = result.outcome;
  json failures = json::array();
  for (const AssertionFailure& f : result.failures) {
    failures.push_back({{"client", f.client}, {"label", f.label}, {"schedule", f.schedule}});
  }
  j["failures"] = failures;
  json verdicts = json::object();
  if (validate_wellformed(result.trace)) {
    const InclusionReport inclusion = check_inclusion(result.trace);
    verdicts["ru"] = verdict_object(inclusion.ru);
    verdicts["rc"] = verdict_object(inclusion.rc);
    verdicts["si"] = verdict_object(inclusion.si);
    verdicts["violation"] = inclusion.violation;
  }
  j["verdicts"] = verdicts;
  return j.dump(2) + '\n';
}

std::string schedule_json(const std::vector<std::size_t>& schedule) {
  return json(schedule).dump() + '\n';
}

std::vector<std::size_t> parse_schedule(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DecodeError(e.byte > 0 ? e.byte - 1 : 0, "malformed schedule");
  }
  if (!j.is_array()) throw DecodeError(0, "schedule is not an array");
  std::vector<std::size_t> out;
  for (const json& step : j) {
    if (!step.is_number_unsigned()) throw DecodeError(0, "schedule entry is not a client index");
    out.push_back(step.get<std::size_t>());
  }
  return out;
}

}  // namespace sikv
