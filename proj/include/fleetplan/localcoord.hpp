#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "fleetplan/model.hpp"

namespace fleetplan {

struct LocalConfig {
  int batch_size = 4;         // collaborative subtasks planned per round
  double sensor_radius = 3.0; // m
  double cell_size = 1.0;     // m
  int k_stab = 2;             // max deviating group size
  int coalition_cap = 4;      // per-coalition member bound
  double capture_radius = 1.0;
  int exact_slots = 16;       // exact routing while subtasks*agents <= this
};

// Member snapshot a coordinator plans with.
struct LocalAgentState {
  AgentId id = 0;
  Vec2 position;
  double free_time = 0.0;
  double max_speed = 1.0;
  std::set<Action> capabilities;
};

struct ActionPlanStep {
  double time = 0.0;  // planned service start
  Vec2 goal;
  Action action;
  SubtaskId subtask = -1;
};

struct ActionPlan {
  AgentId agent = 0;
  std::vector<ActionPlanStep> steps;
};

// Crews plus the synchronized-arrival schedule they induce.
struct RoutePlan {
  std::vector<SubtaskId> dispatch_order;
  std::map<SubtaskId, std::vector<AgentId>> crews;
  std::map<SubtaskId, double> start_time, end_time;
  std::vector<ActionPlan> plans;
  double makespan = 0.0;
};

// Minimum-makespan routing of a set of detected immobile subtasks: each is
// served by a capable crew of at least its required size, service starting at
// the crew's latest arrival. Exact branch and bound while
// subtasks*agents <= exact_slots, greedy insertion plus pairwise-exchange
// polish above. Throws LocalInfeasibleError when some subtask's requirement
// exceeds the capable member count.
RoutePlan plan_subtask_routes(const std::vector<LocalAgentState>& team,
                              const std::vector<Subtask>& subtasks,
                              const DurationParams& duration,
                              const LocalConfig& config);

// Routing over all of a static/known task's unfinished subtasks.
RoutePlan plan_static_known(const std::vector<LocalAgentState>& team,
                            const CollabTask& task, const LocalConfig& config);

// ---------------------------------------------------------------------------
// Exploration
// ---------------------------------------------------------------------------

struct OccupancyGrid {
  Rect region;
  double cell_size = 1.0;
  int nx = 0, ny = 0;
  std::vector<std::uint8_t> visited;

  OccupancyGrid() = default;
  OccupancyGrid(const Rect& r, double cell);
  Vec2 cell_center(int ix, int iy) const;
  bool cell_visited(int ix, int iy) const { return visited[iy * nx + ix] != 0; }
  int cell_of(const Vec2& p) const;  // flat index, clamped into the grid
  bool fully_visited() const;
};

struct SubtaskPool {
  std::vector<Vec2> exploration_waypoints;  // one per frontier cluster
  std::vector<SubtaskId> collaborative;     // detected, unfinished
};

// Marks cells within sensor range of any member, detects subtasks in visited
// cells, and rebuilds the frontier waypoints. Returns newly detected ids.
std::vector<SubtaskId> explore_step(OccupancyGrid& grid,
                                    const std::vector<Vec2>& member_positions,
                                    double sensor_radius, CollabTask& task);

// Frontier cells (unvisited, 4-adjacent to visited) clustered by
// 4-connectivity; one waypoint per cluster at the cluster centroid.
std::vector<Vec2> frontier_waypoints(const OccupancyGrid& grid);

SubtaskPool build_pool(const OccupancyGrid& grid, const CollabTask& task);

// ---------------------------------------------------------------------------
// Simultaneous exploration and coordination
// ---------------------------------------------------------------------------

struct SecRound {
  RoutePlan routes;                                // planned collaborative work
  std::vector<std::pair<AgentId, Vec2>> explorers; // member -> waypoint
  bool complete = false;                           // explored and all done
};

SecRound plan_sec_round(const std::vector<LocalAgentState>& idle_members,
                        const CollabTask& task, const SubtaskPool& pool,
                        const OccupancyGrid& grid, const LocalConfig& config);

// ---------------------------------------------------------------------------
// Dynamic coalition formation
// ---------------------------------------------------------------------------

struct CoalitionScheme {
  std::map<SubtaskId, std::vector<AgentId>> coalitions;
  bool operator==(const CoalitionScheme& o) const { return coalitions == o.coalitions; }
};

// (invalid-coalition count, bottleneck intercept+service cost); compared
// lexicographically, lower is better.
std::pair<int, double> scheme_cost(const CoalitionScheme& scheme,
                                   const std::vector<LocalAgentState>& team,
                                   const std::vector<Subtask>& targets,
                                   const DurationParams& duration,
                                   const LocalConfig& config);

// Iterated strict improvement over joint moves of at most k_stab agents;
// the fixed point admits no improving deviation of that size. Throws
// LocalInfeasibleError when some target cannot ever be covered.
CoalitionScheme dcf_round(const std::vector<LocalAgentState>& team,
                          const std::vector<Subtask>& targets,
                          CoalitionScheme scheme, const DurationParams& duration,
                          const LocalConfig& config);

// Drops the finished target, frees its coalition, and reconverges.
// Returns nothing when no targets remain (task complete).
std::optional<CoalitionScheme> on_subtask_complete(
    const std::vector<LocalAgentState>& team, std::vector<Subtask>& targets,
    CoalitionScheme scheme, SubtaskId completed, const DurationParams& duration,
    const LocalConfig& config);

// ---------------------------------------------------------------------------
// Exhaustive oracles
// ---------------------------------------------------------------------------

namespace oracle {

// True when no joint move of at most k_stab agents strictly improves the
// scheme measure. Bounds: agents <= 6, targets <= 4.
bool kss_stable(const CoalitionScheme& scheme,
                const std::vector<LocalAgentState>& team,
                const std::vector<Subtask>& targets,
                const DurationParams& duration, const LocalConfig& config);

// Best measure over every scheme. Same bounds.
std::pair<int, double> best_scheme_cost(const std::vector<LocalAgentState>& team,
                                        const std::vector<Subtask>& targets,
                                        const DurationParams& duration,
                                        const LocalConfig& config);

}  // namespace oracle

}  // namespace fleetplan
