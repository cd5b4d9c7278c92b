#pragma once

#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fleetplan/errors.hpp"
#include "fleetplan/model.hpp"

namespace fleetplan {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ===========================================================================
// Constrained min-max (bottleneck) assignment
// ===========================================================================
//
// Agents are assigned to at most one slot each. A slot's demand is a map
// action -> lower bound on the number of members holding that action; a
// member counts toward every demanded action it is capable of. The objective
// is the smallest possible maximum cost over selected (agent, slot) pairs,
// with minimum total cost as the secondary criterion.

struct SlotDemand {
  std::map<Action, int> lower;
};

struct BottleneckProblem {
  int n_agents = 0;
  std::vector<std::set<Action>> capabilities;      // per agent
  std::vector<SlotDemand> slots;
  std::vector<std::vector<double>> cost;           // [agent][slot]
  std::vector<std::vector<std::uint8_t>> eligible; // [agent][slot]
};

struct BottleneckSolution {
  bool feasible = false;
  double bottleneck = kInf;
  double total_cost = kInf;
  std::vector<int> slot_of_agent;  // -1 when unassigned
  // Set when infeasible: the demand column that cannot be covered.
  int blocking_slot = -1;
  Action blocking_action;
};

BottleneckSolution solve_bottleneck(const BottleneckProblem& problem);

// ===========================================================================
// Generic small-scale branch and bound over sequential decision slots
// ===========================================================================

struct BnbProblem {
  std::vector<int> option_counts;  // number of options per decision slot
  // Called with choices for slots [0, size); partial vectors are prefixes.
  std::function<bool(const std::vector<int>&)> prefix_feasible;
  std::function<double(const std::vector<int>&)> lower_bound;  // admissible
  std::function<double(const std::vector<int>&)> leaf_cost;
};

struct BnbStats {
  long nodes = 0;
  // Smallest bound among pruned nodes; >= optimum when the bound is admissible.
  double min_pruned_bound = kInf;
};

struct BnbResult {
  bool feasible = false;
  double cost = kInf;
  std::vector<int> choices;
  BnbStats stats;
};

BnbResult solve_bnb(const BnbProblem& problem);

// ===========================================================================
// Exhaustive oracles (exact by enumeration, refuse oversized instances)
// ===========================================================================

namespace oracle {

// Minimum achievable bottleneck by enumerating every membership vector.
// Bounds: n_agents <= 10, slots <= 4.
double bottleneck_optimum(const BottleneckProblem& problem);

struct RoutingAgent {
  AgentId id = 0;
  Vec2 position;
  double free_time = 0.0;
  double max_speed = 1.0;
  std::set<Action> capabilities;
};

struct RoutingSubtask {
  SubtaskId id = 0;
  int required_agents = 1;
  Action action;
  Vec2 location;
};

// Minimum makespan over all crew choices and per-agent visit orders.
// Bounds: subtasks <= 4, agents <= 4.
double routing_optimum(const std::vector<RoutingAgent>& agents,
                       const std::vector<RoutingSubtask>& subtasks,
                       const DurationParams& duration);

}  // namespace oracle

}  // namespace fleetplan
