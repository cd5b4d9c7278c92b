#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fleetplan/errors.hpp"
#include "fleetplan/geometry.hpp"

namespace fleetplan {

using AgentId = int;
using TaskId = int;
using SubtaskId = int;
using MissionId = int;
using Action = std::string;

// ===========================================================================
// Domain types
// ===========================================================================

struct Agent {
  AgentId id = 0;
  Vec2 position;
  double max_speed = 1.0;          // m/s, > 0
  std::set<Action> capabilities;   // nonempty
  bool alive = true;
  double busy_until = 0.0;         // expected release time from current task
  Vec2 release_position;           // expected position when released
};

enum class SubtaskState { undetected, detected, in_progress, done };

struct Subtask {
  SubtaskId id = 0;
  int required_agents = 1;         // at least this many agents act together
  Action action;
  Vec2 location;
  SubtaskState state = SubtaskState::detected;
  bool mobile = false;
  Vec2 velocity;                   // zero if immobile
};

// Two parameters of the saturating duration function.
struct DurationParams {
  double base_duration = 10.0;     // per required agent
  int saturation = 4;              // extra agents beyond this do not help
};

enum class TaskKind { static_known, static_unknown, dynamic_known };
enum class TaskState { pending, assigned, executing, done };

struct CollabTask {
  TaskId id = 0;
  Rect region;
  std::vector<Subtask> subtasks;
  DurationParams duration;
  TaskKind kind = TaskKind::static_known;
  TaskState state = TaskState::pending;

  bool all_subtasks_done() const;
  // action -> max required_agents over this task's subtasks of that action.
  std::map<Action, int> peak_requirements() const;
  int max_required_agents() const;
};

struct Mission {
  MissionId id = 0;
  double release_time = 0.0;
  std::vector<TaskId> tasks;
  std::vector<std::pair<TaskId, TaskId>> precedence;   // (before, after)
  std::vector<std::pair<TaskId, TaskId>> concurrence;  // unordered pairs
  std::optional<double> finish_time;
};

// A mission together with the task bodies it references. Matches the mission
// poset file layout.
struct MissionSpec {
  Mission mission;
  std::vector<CollabTask> tasks;
};

struct TaskGraph {
  std::vector<TaskId> nodes;                                // sorted
  std::vector<std::pair<TaskId, TaskId>> precedence_edges;  // (before, after)
  std::vector<std::vector<TaskId>> concurrence_groups;      // disjoint, sorted

  bool contains(TaskId id) const;
  std::vector<TaskId> predecessors(TaskId id) const;
  // Group containing `id`, or nullptr if it is not concurrence-constrained.
  const std::vector<TaskId>* group_of(TaskId id) const;
};

using TaskTable = std::map<TaskId, CollabTask>;

// ===========================================================================
// Operations
// ===========================================================================

// Duration of a subtask requiring `required_agents` when `team_size` agents
// are assigned: base_duration * required / min(team_size, saturation).
// Throws InfeasibleTeamError when team_size < required_agents.
double eta(int required_agents, int team_size, const DurationParams& params);

// DAG over all unfinished tasks; precedence edges between unfinished tasks,
// concurrence pairs merged into disjoint groups. Throws MalformedMissionError
// on a relation cycle.
TaskGraph build_task_graph(const std::vector<Mission>& missions,
                           const std::set<TaskId>& completed);

// Unassigned nodes whose predecessors are all done (absent) or executing.
// A concurrence group is returned whole or not at all.
std::set<TaskId> eligible_tasks(const TaskGraph& graph,
                                const std::set<TaskId>& executing);

// ---------------------------------------------------------------------------
// Mission template: deliveries, then surveillances, then captures.
// ---------------------------------------------------------------------------

struct TemplateTask {
  Rect region;
  int subtask_count = 1;
  int required_agents = 1;
  std::vector<Action> actions;      // cycled over subtasks
  DurationParams duration;
  double unknown_fraction = 0.0;    // share of subtasks initially undetected
  double target_speed = 0.0;        // > 0 makes subtasks mobile
};

struct TemplateParams {
  MissionId mission_id = 0;
  double release_time = 0.0;
  TaskId first_task_id = 0;
  SubtaskId first_subtask_id = 0;
  std::vector<TemplateTask> delivery;
  std::vector<TemplateTask> surveillance;
  std::vector<TemplateTask> capture;
  std::uint64_t layout_seed = 0;    // deterministic subtask placement
  // Indices into the emitted task list (deliveries, then surveillances, then
  // captures); both ends must come from the same category.
  std::vector<std::pair<int, int>> concurrence_pairs;
};

// Every delivery precedes every surveillance; every surveillance precedes
// every capture. Throws MalformedMissionError when no tasks are given.
MissionSpec expand_template_mission(const TemplateParams& params);

}  // namespace fleetplan
