#include "fleetplan/formation.hpp"

#include <algorithm>
#include <cmath>

#include "fleetplan/optim.hpp"

namespace fleetplan {

CostMatrix build_cost_matrix(const std::vector<Agent>& fleet,
                             const Assignment& assignment, const TaskTable& tasks,
                             double nav_speed) {
  CostMatrix m;
  for (const Agent& a : fleet)
    if (a.alive) m.agents.push_back(a.id);
  for (int k = 0; k < static_cast<int>(assignment.slots.size()); ++k)
    if (!assignment.slots[k].sequence.empty()) m.slot_indices.push_back(k);

  for (AgentId id : m.agents) {
    const Agent& agent = *std::find_if(fleet.begin(), fleet.end(),
                                       [&](const Agent& a) { return a.id == id; });
    std::vector<double> row;
    for (int k : m.slot_indices) {
      const TaskId first = assignment.slots[k].sequence.front();
      const Vec2 target = tasks.at(first).region.centroid();
      row.push_back(agent.busy_until +
                    distance(agent.release_position, target) / nav_speed);
    }
    m.cost.push_back(std::move(row));
  }
  return m;
}

namespace {

std::map<Action, int> upper_bounds(const std::map<Action, int>& lower,
                                   double redundancy) {
  std::map<Action, int> ub;
  for (const auto& [a, n] : lower)
    ub[a] = static_cast<int>(std::ceil((1.0 + redundancy) * n));
  return ub;
}

}  // namespace

std::vector<SubteamRoster> form_subteams(const CostMatrix& matrix,
                                         const Assignment& assignment,
                                         const std::vector<Agent>& fleet,
                                         double redundancy) {
  std::map<AgentId, const Agent*> by_id;
  for (const Agent& a : fleet) by_id[a.id] = &a;

  BottleneckProblem problem;
  problem.n_agents = static_cast<int>(matrix.agents.size());
  for (AgentId id : matrix.agents)
    problem.capabilities.push_back(by_id.at(id)->capabilities);
  for (int k : matrix.slot_indices)
    problem.slots.push_back({assignment.slots[k].capacity});
  problem.cost = matrix.cost;
  for (int i = 0; i < problem.n_agents; ++i) {
    std::vector<std::uint8_t> row;
    for (std::size_t c = 0; c < matrix.slot_indices.size(); ++c) {
      bool compatible = false;
      for (const auto& [a, n] : problem.slots[c].lower)
        if (n > 0 && problem.capabilities[i].count(a)) compatible = true;
      row.push_back(compatible ? 1 : 0);
    }
    problem.eligible.push_back(std::move(row));
  }

  const BottleneckSolution sol = solve_bottleneck(problem);
  if (!sol.feasible)
    throw FormationInfeasibleError(
        "no roster selection meets the capacity lower bounds",
        sol.blocking_slot < 0 ? -1 : matrix.slot_indices[sol.blocking_slot],
        sol.blocking_action);

  std::vector<SubteamRoster> rosters(matrix.slot_indices.size());
  for (std::size_t c = 0; c < matrix.slot_indices.size(); ++c)
    rosters[c].slot = matrix.slot_indices[c];
  std::vector<bool> taken(matrix.agents.size(), false);
  for (int i = 0; i < problem.n_agents; ++i)
    if (sol.slot_of_agent[i] >= 0) {
      rosters[sol.slot_of_agent[i]].members.push_back(matrix.agents[i]);
      taken[i] = true;
    }

  // Redundancy: spare idle agents join the cheapest compatible roster while
  // every touched action stays within its upper bound.
  if (redundancy > 0.0) {
    std::vector<std::tuple<double, AgentId, std::size_t, int>> spare;  // cost, agent, row, col
    for (std::size_t i = 0; i < matrix.agents.size(); ++i) {
      if (taken[i]) continue;
      for (std::size_t c = 0; c < matrix.slot_indices.size(); ++c)
        if (problem.eligible[i][c])
          spare.emplace_back(matrix.cost[i][c], matrix.agents[i], i,
                             static_cast<int>(c));
    }
    std::sort(spare.begin(), spare.end());
    for (const auto& [cost, id, row, col] : spare) {
      if (taken[row]) continue;
      const auto& lower = problem.slots[col].lower;
      const auto ub = upper_bounds(lower, redundancy);
      std::map<Action, int> counts;
      for (AgentId member : rosters[col].members)
        for (const Action& a : by_id.at(member)->capabilities)
          if (lower.count(a)) counts[a]++;
      bool fits = false, overflow = false;
      for (const auto& [a, bound] : ub) {
        if (!problem.capabilities[row].count(a)) continue;
        fits = true;
        if (counts[a] + 1 > std::max(bound, counts[a])) overflow = true;
      }
      if (fits && !overflow) {
        rosters[col].members.push_back(id);
        taken[row] = true;
      }
    }
  }

  for (SubteamRoster& r : rosters) {
    std::sort(r.members.begin(), r.members.end());
    for (AgentId id : r.members)
      for (const Action& a : by_id.at(id)->capabilities)
        if (assignment.slots[r.slot].capacity.count(a)) r.action_counts[a]++;
  }
  return rosters;
}

std::vector<LocalTaskPlan> emit_local_plans(const std::vector<SubteamRoster>& rosters,
                                            const Assignment& assignment,
                                            const TaskTable& tasks) {
  std::vector<LocalTaskPlan> plans;
  for (const SubteamRoster& roster : rosters) {
    std::vector<std::pair<Rect, TaskId>> steps;
    for (TaskId id : assignment.slots[roster.slot].sequence)
      steps.emplace_back(tasks.at(id).region, id);
    for (AgentId member : roster.members) plans.push_back({member, steps});
  }
  return plans;
}

}  // namespace fleetplan
