#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fleetplan/assign.hpp"
#include "fleetplan/localcoord.hpp"
#include "fleetplan/model.hpp"

namespace fleetplan {

enum class Method { ours, inf_h, greedy };

Method method_from_string(const std::string& name);
std::string to_string(Method method);

struct FleetType {
  std::string name;
  int count = 0;
  std::set<Action> capabilities;
  Vec2 base;
  double max_speed = 1.5;
};

struct SimConfig {
  double dt = 0.1;
  double alpha = 0.0;        // per-task-start failure probability
  std::uint64_t seed = 1;
  long tick_budget = 60000;
  int trace_stride = 10;     // snapshot every N ticks; 0 disables
};

struct Scenario {
  Rect workspace;
  std::vector<FleetType> fleet;
  std::vector<MissionSpec> missions;       // explicit poset missions
  std::vector<TemplateParams> templates;   // release_time < 0 means "sample"
  double release_mu = 30.0;
  double release_sigma = 10.0;
  PlannerConfig planner;
  LocalConfig local;
  SimConfig sim;
};

// Parses/serializes the scenario JSON document; parse(serialize(s)) is the
// identity. Throws ValidationError with a description on bad input.
Scenario parse_scenario(const std::string& json_text);
std::string serialize_scenario(const Scenario& scenario);
Scenario load_scenario(const std::string& path);

// Mission poset file, reusable standalone.
MissionSpec parse_mission_spec(const std::string& json_text);
std::string serialize_mission_spec(const MissionSpec& spec);

// One mission-template document (the "mission_templates" entry shape).
TemplateParams parse_template_params(const std::string& json_text);

void validate_scenario(const Scenario& scenario);

// FNV-1a over the canonical serialization.
std::string scenario_hash(const Scenario& scenario);

// ---------------------------------------------------------------------------
// Run artifacts
// ---------------------------------------------------------------------------

struct RunReport {
  std::string scenario_hash;
  Method method = Method::ours;
  std::uint64_t seed = 0;
  std::string metrics_json;   // deterministic document
  double wall_seconds = 0.0;  // measured, reported outside the metrics doc
  bool success = false;
};

// Runs one scenario and writes trace.jsonl, metrics.json and report.json
// under out_dir (no files when out_dir is empty).
RunReport run_one(const Scenario& scenario, Method method, std::uint64_t seed,
                  const std::string& out_dir);

struct SweepResult {
  std::vector<RunReport> runs;
  std::string csv;  // one aggregate row per method
};

// Cross product of methods and seeds; failures are recorded per cell and the
// sweep continues. Honors FLEETPLAN_JOBS for parallel runs.
SweepResult sweep(const Scenario& scenario, const std::vector<Method>& methods,
                  const std::vector<std::uint64_t>& seeds,
                  const std::string& out_dir);

}  // namespace fleetplan
