#pragma once

#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fleetplan/formation.hpp"
#include "fleetplan/localcoord.hpp"
#include "fleetplan/scenario.hpp"

namespace fleetplan {

enum class AgentMode { idle, navigating, waiting, executing };

enum class ReplanReason { progress, new_mission, infeasible };

struct SimAgent {
  Agent base;
  AgentMode mode = AgentMode::idle;
  int subteam = -1;                 // index into World::subteams, -1 = none
  std::optional<Vec2> goal;
  SubtaskId serving = -1;           // subtask this agent is crewed on
};

// One collaborative subtask being executed by a synchronized crew.
struct SubtaskRun {
  TaskId task = -1;
  std::vector<AgentId> crew;
  double remaining = 0.0;
  bool active = false;       // quorum complete, duration counting down
  double started_at = -1.0;
};

struct Subteam {
  int id = 0;
  std::vector<AgentId> members;
  std::vector<TaskId> sequence;
  std::size_t position = 0;         // current task index
  bool task_started = false;
  std::map<Action, int> capacity;   // of the slot this roster was formed for
  // Local coordination state for the current task.
  std::optional<RoutePlan> route;
  std::optional<OccupancyGrid> grid;
  CoalitionScheme scheme;
  bool dissolved = false;

  TaskId current_task() const {
    return position < sequence.size() ? sequence[position] : -1;
  }
};

struct MissionRecord {
  Mission mission;
  bool released = false;
  double actual_release = 0.0;
};

struct MetricsLog {
  bool success = false;
  long ticks = 0;
  double end_clock = 0.0;
  std::vector<std::pair<double, double>> mission_times;  // (release, finish)
  double mode_time_nav = 0.0, mode_time_wait = 0.0, mode_time_exec = 0.0;
  int tasks_done = 0, subtasks_done = 0;
  int replans = 0;
  long planner_nodes = 0;
  long planner_nodes_max_round = 0;
  bool budget_hit = false;
  std::map<std::string, int> violations;
  std::vector<std::string> replan_reasons;

  double average_response() const;
};

struct World {
  Scenario scenario;
  Method method = Method::ours;
  double clock = 0.0;
  long tick_count = 0;
  std::vector<SimAgent> agents;
  TaskTable tasks;
  std::vector<MissionRecord> missions;
  TaskGraph graph;
  std::vector<Subteam> subteams;
  std::map<SubtaskId, SubtaskRun> runs;
  std::set<TaskId> completed;
  std::mt19937_64 rng;

  bool pending_replan = true;   // plan at t=0
  std::set<ReplanReason> pending_reasons{ReplanReason::new_mission};
  int completed_since_plan = 0;
  int assigned_at_plan = 0;
  int new_missions_since_plan = 0;
  bool infeasible_since_plan = false;
  double last_safety_replan = -1e9;
  int next_subteam_id = 0;

  std::map<TaskId, double> task_start_clock;
  std::vector<std::vector<TaskId>> static_groups;  // concurrence, for audits
  std::set<std::size_t> groups_audited;

  MetricsLog log;
  std::vector<std::string> trace;
  double wall_plan_seconds = 0.0;

  const SimAgent* agent(AgentId id) const;
  SimAgent* agent(AgentId id);
};

// Builds the initial world: fleet instantiated from the scenario, mission
// release times fixed (sampled where requested) from the seed.
World make_world(const Scenario& scenario, Method method, std::uint64_t seed);

// Sets the per-task-start failure probability.
void inject_failures(World& world, double alpha);

// Trigger query: progress quota met, new missions released, or infeasibility
// reported since the last plan.
std::set<ReplanReason> check_replan_triggers(const World& world);

// One dt step: releases missions, replans when scheduled, moves agents and
// targets, detects, starts and advances subtasks, fires triggers.
void tick(World& world);

// Ticks until every released mission is done or the budget expires, then
// finalizes the metrics log.
MetricsLog run_world(World& world);

// Convenience: build, run, and serialize in one call.
struct SimResult {
  MetricsLog metrics;
  std::string metrics_json;
  std::vector<std::string> trace_lines;
};
SimResult run_scenario(const Scenario& scenario, Method method,
                       std::uint64_t seed);

std::string metrics_to_json(const MetricsLog& log, const World& world);

}  // namespace fleetplan
