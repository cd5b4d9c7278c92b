#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "fleetplan/model.hpp"

namespace fleetplan {

// ===========================================================================
// Types
// ===========================================================================

// One subteam's ordered task sequence plus the per-action capacity it
// requires. The locked prefix holds tasks currently executing and is never
// rewritten by a later planning round.
struct SubteamSlot {
  std::vector<TaskId> sequence;
  std::map<Action, int> capacity;
  int locked_prefix = 0;
  // Position/time the subteam plans from: current anchor for fresh slots,
  // expected release point and time of the locked prefix otherwise.
  Vec2 anchor_position;
  double anchor_time = 0.0;

  bool operator==(const SubteamSlot& o) const {
    return sequence == o.sequence && capacity == o.capacity &&
           locked_prefix == o.locked_prefix &&
           anchor_position == o.anchor_position && anchor_time == o.anchor_time;
  }
};

struct Assignment {
  std::vector<SubteamSlot> slots;
  int horizon_used = 0;  // tasks assigned this round (locked prefixes excluded)

  std::set<TaskId> assigned_tasks() const;
  std::set<TaskId> executing_tasks() const;  // union of locked prefixes
  bool operator==(const Assignment& o) const {
    return slots == o.slots && horizon_used == o.horizon_used;
  }
};

struct PlannerConfig {
  int horizon = 6;                   // H >= 1
  double unassigned_penalty = 100.0; // seconds per eligible task left out
  double redundancy = 0.0;           // roster surplus fraction (formation)
  bool prune_symmetric = true;
  bool prune_dominated = true;
  int per_slot_cap = 0;              // max tasks per slot; 0 = unlimited
  int k_max = 0;                     // cap on subteam count; 0 = horizon
  long node_budget = 5'000'000;      // search nodes per round
  double nav_speed = 1.5;            // m/s used for all travel estimates
};

struct SearchStats {
  long nodes = 0;
  bool budget_hit = false;
};

// ===========================================================================
// Operations
// ===========================================================================

// Appends the task and raises each affected action capacity to the maximum
// subtask requirement seen anywhere in the slot's sequence.
SubteamSlot update_capacity(SubteamSlot slot, const CollabTask& task);

// Fleet capacity bound: for every action, the summed slot capacities must not
// exceed the number of alive agents holding that action.
bool capacity_feasible(const Assignment& assignment,
                       const std::vector<Agent>& fleet);

// Estimated start/end times for every task in an assignment. Tasks in locked
// prefixes report the slot's anchor time. Returns nothing when the schedule
// has a circular wait (such an assignment is never selected).
struct ScheduleEstimate {
  std::map<TaskId, double> end_time;
  std::map<TaskId, double> start_time;
  std::vector<double> slot_end;  // per slot; anchor time for empty slots
};
std::optional<ScheduleEstimate> estimate_schedule(const Assignment& assignment,
                                                  const TaskGraph& graph,
                                                  const TaskTable& tasks,
                                                  double nav_speed);

// End time of the task at `index` in slot `slot`. Throws
// PrecedenceViolationError when a predecessor is neither done, executing,
// nor assigned anywhere in the assignment.
double estimated_end_time(const Assignment& assignment, int slot, int index,
                          const TaskGraph& graph, const TaskTable& tasks,
                          double nav_speed);

// Per-task execution estimate used inside the schedule: summed subtask
// durations at slot capacity, divided by the slot's assumed parallelism.
double exec_estimate(const CollabTask& task, const std::map<Action, int>& capacity);

// Score of an assignment (lower is better): penalty per eligible-but-
// unassigned task plus the latest estimated slot end time. Eligibility is
// taken at the round's root state (predecessors done or executing).
double evaluate_assignment(const Assignment& assignment, const TaskGraph& graph,
                           const TaskTable& tasks, const PlannerConfig& config);

// Best-first search over single-task expansions for a fixed subteam count K.
Assignment search_assignment_for_K(const TaskGraph& graph, const TaskTable& tasks,
                                   int K, const std::vector<Agent>& fleet,
                                   const std::vector<SubteamSlot>& executing_slots,
                                   Vec2 fresh_anchor, double clock,
                                   const PlannerConfig& config,
                                   SearchStats* stats = nullptr);

// Sweeps K over 1..H (never below the executing slot count) and returns the
// best-scoring assignment; ties break toward smaller K, then lexicographic
// task order.
Assignment plan_round(const TaskGraph& graph, const TaskTable& tasks,
                      const std::vector<Agent>& fleet,
                      const std::vector<SubteamSlot>& executing_slots,
                      Vec2 fresh_anchor, double clock,
                      const PlannerConfig& config, SearchStats* stats = nullptr);

// ===========================================================================
// Exhaustive oracle
// ===========================================================================

namespace oracle {

// Optimal score over every feasible assignment, enumerated slot by slot.
// Bounds: eligible tasks <= 7, K <= 3, H <= 6.
double assignment_optimum(const TaskGraph& graph, const TaskTable& tasks,
                          int K, const std::vector<Agent>& fleet,
                          const std::vector<SubteamSlot>& executing_slots,
                          Vec2 fresh_anchor, double clock,
                          const PlannerConfig& config);

// Minimum over K in 1..H, mirroring plan_round's sweep.
double plan_round_optimum(const TaskGraph& graph, const TaskTable& tasks,
                          const std::vector<Agent>& fleet,
                          const std::vector<SubteamSlot>& executing_slots,
                          Vec2 fresh_anchor, double clock,
                          const PlannerConfig& config);

}  // namespace oracle

}  // namespace fleetplan
