#pragma once

#include <map>
#include <vector>

#include "fleetplan/assign.hpp"
#include "fleetplan/model.hpp"

namespace fleetplan {

// Readiness cost of each alive agent for the first task of each nonempty
// slot: expected release time plus travel from the expected release position.
struct CostMatrix {
  std::vector<AgentId> agents;      // row order
  std::vector<int> slot_indices;    // column -> index into assignment.slots
  std::vector<std::vector<double>> cost;
};

struct SubteamRoster {
  int slot = 0;  // index into the assignment's slots
  std::vector<AgentId> members;
  std::map<Action, int> action_counts;
};

struct LocalTaskPlan {
  AgentId agent = 0;
  std::vector<std::pair<Rect, TaskId>> steps;
};

CostMatrix build_cost_matrix(const std::vector<Agent>& fleet,
                             const Assignment& assignment, const TaskTable& tasks,
                             double nav_speed);

// Disjoint rosters meeting every slot's per-action capacity, minimizing the
// latest member readiness (then total readiness). Otherwise-idle agents are
// added greedily up to ceil((1+redundancy) * bound) per action. Throws
// FormationInfeasibleError when no selection meets the lower bounds.
std::vector<SubteamRoster> form_subteams(const CostMatrix& matrix,
                                         const Assignment& assignment,
                                         const std::vector<Agent>& fleet,
                                         double redundancy);

// Every roster member receives the slot's task sequence verbatim.
std::vector<LocalTaskPlan> emit_local_plans(const std::vector<SubteamRoster>& rosters,
                                            const Assignment& assignment,
                                            const TaskTable& tasks);

}  // namespace fleetplan
