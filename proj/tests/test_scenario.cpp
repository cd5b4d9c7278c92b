#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fleetplan/scenario.hpp"
#include "fleetplan/sim.hpp"
#include "json.hpp"

using namespace fleetplan;
using nlohmann::json;

namespace {

const char* kThreeTasks = R"({
  "workspace": [0, 0, 30, 25],
  "fleet": [
    {"name": "A", "count": 6, "capabilities": ["a", "b"], "base": [15, 2], "max_speed": 1.5}
  ],
  "missions": [
    {
      "id": 1,
      "release_time": 0.0,
      "tasks": [
        {"id": 1, "kind": "static_known", "region": [1, 1, 5, 5],
         "duration_params": {"d0": 4.0, "n_sat": 2},
         "subtasks": [{"id": 100, "n": 2, "action": "a", "location": [3, 3]}]},
        {"id": 2, "kind": "static_known", "region": [12, 18, 16, 22],
         "duration_params": {"d0": 4.0, "n_sat": 2},
         "subtasks": [{"id": 200, "n": 1, "action": "b", "location": [14, 20]}]},
        {"id": 3, "kind": "static_known", "region": [24, 1, 28, 5],
         "duration_params": {"d0": 4.0, "n_sat": 2},
         "subtasks": [{"id": 300, "n": 2, "action": "a", "location": [26, 3]}]}
      ],
      "precedence": [[1, 2]],
      "concurrence": []
    }
  ],
  "planner": {"horizon": 3},
  "sim": {"dt": 0.1, "seed": 1, "tick_budget": 5000, "trace_stride": 0}
})";

}  // namespace

TEST_CASE("scenario serialization round-trips") {
  const Scenario a = parse_scenario(kThreeTasks);
  const std::string first = serialize_scenario(a);
  const Scenario b = parse_scenario(first);
  const std::string second = serialize_scenario(b);
  CHECK(first == second);
  CHECK(scenario_hash(a) == scenario_hash(b));
}

TEST_CASE("mission poset files round-trip") {
  const Scenario s = parse_scenario(kThreeTasks);
  const std::string text = serialize_mission_spec(s.missions[0]);
  const MissionSpec again = parse_mission_spec(text);
  CHECK(serialize_mission_spec(again) == text);
  CHECK(again.mission.precedence == s.missions[0].mission.precedence);
}

TEST_CASE("validation rejects broken scenarios") {
  auto mutate = [&](auto&& edit) {
    json j = json::parse(kThreeTasks);
    edit(j);
    return j.dump();
  };
  CHECK_THROWS_AS(parse_scenario(mutate([](json& j) { j["fleet"] = json::array(); })),
                  ValidationError);
  CHECK_THROWS_AS(parse_scenario(mutate([](json& j) {
                    j["missions"][0]["tasks"][0]["region"] = {-5, 0, 2, 2};
                  })),
                  ValidationError);
  CHECK_THROWS_AS(parse_scenario(mutate([](json& j) {
                    j["missions"][0]["tasks"][0]["subtasks"][0]["action"] = "fly";
                  })),
                  ValidationError);
  CHECK_THROWS_AS(parse_scenario(mutate([](json& j) {
                    j["missions"][0]["tasks"][1]["id"] = 1;
                  })),
                  ValidationError);
  CHECK_THROWS_AS(parse_scenario(mutate([](json& j) {
                    j["missions"][0]["concurrence"] = {{1, 2}};
                  })),
                  ValidationError);  // ordered pair cannot start together
  CHECK_THROWS_AS(parse_scenario("not json"), ValidationError);
}

TEST_CASE("greedy keeps every slot at one task") {
  const Scenario s = parse_scenario(kThreeTasks);
  const SimResult result = run_scenario(s, Method::greedy, 1);
  REQUIRE(result.metrics.success);
  for (const std::string& line : result.trace_lines) {
    const json ev = json::parse(line);
    if (ev["ev"] != "replan") continue;
    for (const auto& slot : ev["slots"]) CHECK(slot.size() <= 1);
  }
}

TEST_CASE("inf_h coincides with ours when the horizon already covers everything") {
  const Scenario s = parse_scenario(kThreeTasks);  // horizon 3, 3 tasks
  const SimResult ours = run_scenario(s, Method::ours, 1);
  const SimResult infh = run_scenario(s, Method::inf_h, 1);
  const json a = json::parse(ours.metrics_json);
  const json b = json::parse(infh.metrics_json);
  CHECK(a["resp_time_s"] == b["resp_time_s"]);
  CHECK(a["tasks_done"] == b["tasks_done"]);
  CHECK(a["ticks"] == b["ticks"]);
  CHECK(a["agents_T"] == b["agents_T"]);
}

TEST_CASE("run_one writes the three artifacts and reproduces reports") {
  const Scenario s = parse_scenario(kThreeTasks);
  const auto dir = std::filesystem::temp_directory_path() / "fleetplan_test_run";
  std::filesystem::remove_all(dir);
  const RunReport r1 = run_one(s, Method::ours, 7, dir.string());
  CHECK(std::filesystem::exists(dir / "metrics.json"));
  CHECK(std::filesystem::exists(dir / "trace.jsonl"));
  CHECK(std::filesystem::exists(dir / "report.json"));

  std::ifstream f(dir / "metrics.json");
  std::stringstream buf;
  buf << f.rdbuf();
  CHECK(buf.str() == r1.metrics_json + "\n");

  const RunReport r2 = run_one(s, Method::ours, 7, "");
  CHECK(r1.metrics_json == r2.metrics_json);
  CHECK(r1.scenario_hash == r2.scenario_hash);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep aggregates one row per method") {
  const Scenario s = parse_scenario(kThreeTasks);
  const SweepResult result = sweep(s, {Method::ours, Method::greedy}, {1, 2}, "");
  CHECK(result.runs.size() == 4);
  int rows = 0;
  std::istringstream csv(result.csv);
  std::string line;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);  // header + two methods
}
