#include "doctest.h"
#include "fleetplan/sim.hpp"
#include "json.hpp"

using namespace fleetplan;
using nlohmann::json;

namespace {

// One agent, one single-subtask task four seconds long, three meters of
// approach plus one meter inside the region.
const char* kTrivial = R"({
  "workspace": [0, 0, 30, 25],
  "fleet": [
    {"name": "A", "count": 1, "capabilities": ["a"], "base": [10, 4], "max_speed": 1.5}
  ],
  "missions": [
    {
      "id": 1,
      "release_time": 0.0,
      "tasks": [
        {
          "id": 1,
          "kind": "static_known",
          "region": [9, 0, 11, 2],
          "duration_params": {"d0": 4.0, "n_sat": 1},
          "subtasks": [
            {"id": 100, "n": 1, "action": "a", "location": [10, 1]}
          ]
        }
      ],
      "precedence": [],
      "concurrence": []
    }
  ],
  "planner": {"horizon": 4},
  "sim": {"dt": 0.1, "seed": 3, "tick_budget": 2000, "trace_stride": 0}
})";

const char* kPaired = R"({
  "workspace": [0, 0, 30, 25],
  "fleet": [
    {"name": "A", "count": 4, "capabilities": ["a"], "base": [14, 12], "max_speed": 1.5}
  ],
  "missions": [
    {
      "id": 1,
      "release_time": 0.0,
      "tasks": [
        {
          "id": 1,
          "kind": "static_known",
          "region": [1, 1, 5, 5],
          "duration_params": {"d0": 4.0, "n_sat": 2},
          "subtasks": [{"id": 100, "n": 2, "action": "a", "location": [3, 3]}]
        },
        {
          "id": 2,
          "kind": "static_known",
          "region": [25, 20, 29, 24],
          "duration_params": {"d0": 4.0, "n_sat": 2},
          "subtasks": [{"id": 200, "n": 2, "action": "a", "location": [27, 22]}]
        }
      ],
      "precedence": [],
      "concurrence": [[1, 2]]
    }
  ],
  "planner": {"horizon": 4},
  "sim": {"dt": 0.1, "seed": 3, "tick_budget": 5000, "trace_stride": 0}
})";

}  // namespace

TEST_CASE("movement clamps exactly at the goal") {
  const Scenario s = parse_scenario(R"({
    "workspace": [0, 0, 30, 25],
    "fleet": [{"name": "A", "count": 1, "capabilities": ["a"], "base": [0, 0], "max_speed": 1.5}],
    "missions": [],
    "sim": {"dt": 1.0, "tick_budget": 10}
  })");
  World w = make_world(s, Method::ours, 1);
  w.agents[0].goal = Vec2{1.5, 0.0};
  tick(w);
  CHECK(w.agents[0].base.position == Vec2{1.5, 0.0});
}

TEST_CASE("single-agent mission response is the navigation plus service time") {
  const Scenario s = parse_scenario(kTrivial);
  const SimResult result = run_scenario(s, Method::ours, 1);
  REQUIRE(result.metrics.success);
  REQUIRE(result.metrics.mission_times.size() == 1);
  // Region entry after 1.4s, then 0.9m to the subtask (0.6s), service 4.0s.
  CHECK(result.metrics.average_response() == doctest::Approx(6.0).epsilon(1e-9));
  CHECK(result.metrics.tasks_done == 1);
  CHECK(result.metrics.subtasks_done == 1);
  for (const auto& [name, count] : result.metrics.violations) CHECK(count == 0);
}

TEST_CASE("zero missions succeed immediately") {
  const Scenario s = parse_scenario(R"({
    "workspace": [0, 0, 30, 25],
    "fleet": [{"name": "A", "count": 2, "capabilities": ["a"], "base": [1, 1]}],
    "missions": [],
    "sim": {"dt": 0.1, "tick_budget": 100}
  })");
  const SimResult result = run_scenario(s, Method::ours, 1);
  CHECK(result.metrics.success);
  CHECK(result.metrics.mission_times.empty());
  CHECK(result.metrics.average_response() == 0.0);
}

TEST_CASE("late mission release fires the new-mission trigger") {
  Scenario s = parse_scenario(kTrivial);
  s.missions[0].mission.release_time = 26.0;
  World w = make_world(s, Method::ours, 1);
  while (w.clock < 25.5) tick(w);
  CHECK(w.graph.nodes.empty());
  while (w.clock < 26.05) tick(w);
  CHECK(w.graph.nodes.size() == 1);
  bool saw_release = false;
  for (const std::string& line : w.trace)
    if (json::parse(line)["ev"] == "mission_release") saw_release = true;
  CHECK(saw_release);
  // The replan the trigger scheduled lands on the next boundary.
  tick(w);
  int replans_after_release = 0;
  for (const std::string& line : w.trace) {
    const json ev = json::parse(line);
    if (ev["ev"] == "replan" && ev["t"].get<double>() >= 26.0)
      ++replans_after_release;
  }
  CHECK(replans_after_release >= 1);
}

TEST_CASE("progress trigger needs strictly more than half") {
  const Scenario s = parse_scenario(kTrivial);
  World w = make_world(s, Method::ours, 1);
  w.assigned_at_plan = 6;
  w.scenario.planner.horizon = 6;

  w.completed_since_plan = 3;
  CHECK(check_replan_triggers(w).empty());
  w.completed_since_plan = 4;
  CHECK(check_replan_triggers(w) == std::set<ReplanReason>{ReplanReason::progress});

  w.completed_since_plan = 0;
  w.infeasible_since_plan = true;
  CHECK(check_replan_triggers(w) ==
        std::set<ReplanReason>{ReplanReason::infeasible});
}

TEST_CASE("failure injection at the extremes") {
  SUBCASE("alpha zero never kills anyone") {
    Scenario s = parse_scenario(kTrivial);
    s.sim.alpha = 0.0;
    const SimResult result = run_scenario(s, Method::ours, 5);
    for (const std::string& line : result.trace_lines)
      CHECK(json::parse(line)["ev"] != "agent_fail");
    CHECK(result.metrics.success);
  }

  SUBCASE("alpha one kills every participant at the first start") {
    Scenario s = parse_scenario(kTrivial);
    s.sim.alpha = 1.0;
    s.sim.tick_budget = 500;
    const SimResult result = run_scenario(s, Method::ours, 5);
    CHECK(!result.metrics.success);
    std::set<int> started, failed;
    for (const std::string& line : result.trace_lines) {
      const json ev = json::parse(line);
      if (ev["ev"] == "task_start" && started.empty())
        for (const auto& m : ev["members"]) started.insert(m.get<int>());
      if (ev["ev"] == "agent_fail") failed.insert(ev["agent"].get<int>());
    }
    CHECK(!started.empty());
    CHECK(started == failed);
  }
}

TEST_CASE("metrics are byte-identical across reruns") {
  const Scenario s = parse_scenario(kTrivial);
  const SimResult a = run_scenario(s, Method::ours, 9);
  const SimResult b = run_scenario(s, Method::ours, 9);
  CHECK(a.metrics_json == b.metrics_json);
  CHECK(a.trace_lines == b.trace_lines);
}

TEST_CASE("reported response matches the recomputed objective") {
  const Scenario s = parse_scenario(kTrivial);
  const SimResult result = run_scenario(s, Method::ours, 2);
  double sum = 0.0;
  for (const auto& [release, finish] : result.metrics.mission_times)
    sum += finish - release;
  const double expected =
      sum / static_cast<double>(result.metrics.mission_times.size());
  const json metrics = json::parse(result.metrics_json);
  CHECK(metrics["resp_time_s"].get<double>() == expected);
}

TEST_CASE("paired tasks start on the same tick") {
  const Scenario s = parse_scenario(kPaired);
  const SimResult result = run_scenario(s, Method::ours, 4);
  REQUIRE(result.metrics.success);
  std::map<int, double> starts;
  for (const std::string& line : result.trace_lines) {
    const json ev = json::parse(line);
    if (ev["ev"] == "task_start") starts[ev["task"].get<int>()] = ev["t"];
  }
  REQUIRE(starts.count(1));
  REQUIRE(starts.count(2));
  CHECK(std::abs(starts[1] - starts[2]) <= s.sim.dt + 1e-9);
  const json metrics = json::parse(result.metrics_json);
  for (const auto& [name, count] : metrics["violations"].items())
    CHECK(count.get<int>() == 0);
}

TEST_CASE("inject_failures installs the rate") {
  const Scenario s = parse_scenario(kTrivial);
  World w = make_world(s, Method::ours, 1);
  inject_failures(w, 0.25);
  CHECK(w.scenario.sim.alpha == doctest::Approx(0.25));
}
