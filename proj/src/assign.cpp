#include "fleetplan/assign.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

#include "fleetplan/optim.hpp"

namespace fleetplan {

std::set<TaskId> Assignment::assigned_tasks() const {
  std::set<TaskId> out;
  for (const SubteamSlot& s : slots)
    out.insert(s.sequence.begin(), s.sequence.end());
  return out;
}

std::set<TaskId> Assignment::executing_tasks() const {
  std::set<TaskId> out;
  for (const SubteamSlot& s : slots)
    for (int i = 0; i < s.locked_prefix; ++i) out.insert(s.sequence[i]);
  return out;
}

SubteamSlot update_capacity(SubteamSlot slot, const CollabTask& task) {
  slot.sequence.push_back(task.id);
  for (const auto& [action, need] : task.peak_requirements()) {
    int& cur = slot.capacity[action];
    cur = std::max(cur, need);
  }
  return slot;
}

bool capacity_feasible(const Assignment& assignment,
                       const std::vector<Agent>& fleet) {
  std::map<Action, int> required;
  for (const SubteamSlot& slot : assignment.slots)
    for (const auto& [action, need] : slot.capacity) required[action] += need;
  for (const auto& [action, need] : required) {
    int capable = 0;
    for (const Agent& a : fleet)
      if (a.alive && a.capabilities.count(action)) ++capable;
    if (need > capable) return false;
  }
  return true;
}

double exec_estimate(const CollabTask& task, const std::map<Action, int>& capacity) {
  int total_capacity = 0;
  for (const auto& [action, count] : capacity) total_capacity += count;
  const int widest = std::max(1, task.max_required_agents());
  const int parallelism = std::max(1, total_capacity / widest);
  double sum = 0.0;
  for (const Subtask& s : task.subtasks) {
    const auto it = capacity.find(s.action);
    const int team = it == capacity.end() ? s.required_agents : it->second;
    sum += eta(s.required_agents, team, task.duration);
  }
  return sum / static_cast<double>(parallelism);
}

// ---------------------------------------------------------------------------
// Schedule estimation
// ---------------------------------------------------------------------------

namespace {

struct ScheduleSolver {
  const Assignment& assignment;
  const TaskGraph& graph;
  const TaskTable& tasks;
  double nav_speed;

  std::map<TaskId, std::pair<int, int>> place;  // task -> (slot, index)
  std::map<TaskId, double> arrival, end;
  std::set<TaskId> visiting;
  bool cyclic = false;
  bool missing_pred = false;

  ScheduleSolver(const Assignment& a, const TaskGraph& g, const TaskTable& t,
                 double speed)
      : assignment(a), graph(g), tasks(t), nav_speed(speed) {
    for (int k = 0; k < static_cast<int>(a.slots.size()); ++k)
      for (int i = 0; i < static_cast<int>(a.slots[k].sequence.size()); ++i)
        place[a.slots[k].sequence[i]] = {k, i};
  }

  bool locked(TaskId id) const {
    const auto [k, i] = place.at(id);
    return i < assignment.slots[k].locked_prefix;
  }

  // Subteam reaches the task: previous stop's end plus travel. Predecessor
  // waits are folded in before departure.
  double arrival_of(TaskId id) {
    if (auto it = arrival.find(id); it != arrival.end()) return it->second;
    if (!visiting.insert(id).second) {
      cyclic = true;
      return kInf;
    }
    const auto [k, i] = place.at(id);
    const SubteamSlot& slot = assignment.slots[k];
    double ready;
    Vec2 from;
    if (i == slot.locked_prefix || i == 0) {
      ready = slot.anchor_time;
      from = slot.anchor_position;
    } else {
      const TaskId prev = slot.sequence[i - 1];
      ready = end_of(prev);
      from = tasks.at(prev).region.centroid();
    }
    for (TaskId p : graph.predecessors(id)) {
      if (!graph.contains(p)) continue;  // completed
      if (!place.count(p)) {
        missing_pred = true;
        visiting.erase(id);
        return kInf;
      }
      ready = std::max(ready, end_of(p));
    }
    const Vec2 to = tasks.at(id).region.centroid();
    const double value = ready + distance(from, to) / nav_speed;
    visiting.erase(id);
    arrival[id] = value;
    return value;
  }

  double end_of(TaskId id) {
    if (auto it = end.find(id); it != end.end()) return it->second;
    const auto [k, i] = place.at(id);
    if (locked(id)) {
      const double value = assignment.slots[k].anchor_time;
      end[id] = value;
      return value;
    }
    // Concurrence-paired tasks start together once every paired subteam
    // would be on site.
    double start = arrival_of(id);
    if (const auto* group = graph.group_of(id)) {
      for (TaskId g : *group)
        if (g != id && place.count(g) && !locked(g))
          start = std::max(start, arrival_of(g));
    }
    if (cyclic || missing_pred) return kInf;
    const double value = start + exec_estimate(tasks.at(id), assignment.slots[k].capacity);
    end[id] = value;
    return value;
  }
};

}  // namespace

std::optional<ScheduleEstimate> estimate_schedule(const Assignment& assignment,
                                                  const TaskGraph& graph,
                                                  const TaskTable& tasks,
                                                  double nav_speed) {
  ScheduleSolver solver(assignment, graph, tasks, nav_speed);
  ScheduleEstimate out;
  for (int k = 0; k < static_cast<int>(assignment.slots.size()); ++k) {
    const SubteamSlot& slot = assignment.slots[k];
    double slot_end = slot.anchor_time;
    for (TaskId id : slot.sequence) {
      const double e = solver.end_of(id);
      if (solver.missing_pred)
        throw PrecedenceViolationError("predecessor of task " + std::to_string(id) +
                                       " is not scheduled");
      if (solver.cyclic) return std::nullopt;
      out.end_time[id] = e;
      out.start_time[id] = e - exec_estimate(tasks.at(id), slot.capacity);
      slot_end = std::max(slot_end, e);
    }
    out.slot_end.push_back(slot_end);
  }
  return out;
}

double estimated_end_time(const Assignment& assignment, int slot, int index,
                          const TaskGraph& graph, const TaskTable& tasks,
                          double nav_speed) {
  const auto schedule = estimate_schedule(assignment, graph, tasks, nav_speed);
  if (!schedule)
    throw PrecedenceViolationError("schedule has a circular wait");
  return schedule->end_time.at(assignment.slots[slot].sequence[index]);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

double evaluate_with_eligible(const Assignment& assignment, const TaskGraph& graph,
                              const TaskTable& tasks,
                              const std::set<TaskId>& round_eligible,
                              const PlannerConfig& config) {
  const std::set<TaskId> assigned = assignment.assigned_tasks();
  int unassigned = 0;
  for (TaskId t : round_eligible)
    if (!assigned.count(t)) ++unassigned;

  std::optional<ScheduleEstimate> schedule;
  try {
    schedule = estimate_schedule(assignment, graph, tasks, config.nav_speed);
  } catch (const PrecedenceViolationError&) {
    return kInf;
  }
  if (!schedule) return kInf;
  double makespan = -kInf;
  for (double e : schedule->slot_end) makespan = std::max(makespan, e);
  if (assignment.slots.empty()) makespan = 0.0;

  const double penalty =
      config.unassigned_penalty * static_cast<double>(unassigned);
  return penalty + makespan;
}

}  // namespace

double evaluate_assignment(const Assignment& assignment, const TaskGraph& graph,
                           const TaskTable& tasks, const PlannerConfig& config) {
  const std::set<TaskId> eligible =
      eligible_tasks(graph, assignment.executing_tasks());
  return evaluate_with_eligible(assignment, graph, tasks, eligible, config);
}

// ---------------------------------------------------------------------------
// Best-first search
// ---------------------------------------------------------------------------

namespace {

std::vector<int> flatten(const Assignment& a) {
  std::vector<int> key;
  for (const SubteamSlot& s : a.slots) {
    key.insert(key.end(), s.sequence.begin(), s.sequence.end());
    key.push_back(-1);
  }
  return key;
}

// True when every concurrence group is either untouched or fully assigned.
bool groups_complete(const Assignment& a, const TaskGraph& graph) {
  const std::set<TaskId> assigned = a.assigned_tasks();
  for (const auto& group : graph.concurrence_groups) {
    int present = 0, total = 0;
    for (TaskId g : group) {
      if (!graph.contains(g)) continue;
      ++total;
      if (assigned.count(g)) ++present;
    }
    if (present != 0 && present != total) return false;
  }
  return true;
}

struct SearchNode {
  Assignment assignment;
  double bound = 0.0;
  std::vector<int> key;
};

struct NodeOrder {
  bool operator()(const SearchNode& a, const SearchNode& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.key > b.key;  // min-heap: lexicographically smaller first
  }
};

}  // namespace

Assignment search_assignment_for_K(const TaskGraph& graph, const TaskTable& tasks,
                                   int K, const std::vector<Agent>& fleet,
                                   const std::vector<SubteamSlot>& executing_slots,
                                   Vec2 fresh_anchor, double clock,
                                   const PlannerConfig& config,
                                   SearchStats* stats) {
  Assignment root;
  root.slots = executing_slots;
  for (SubteamSlot& s : root.slots) s.locked_prefix = static_cast<int>(s.sequence.size());
  for (int k = static_cast<int>(executing_slots.size()); k < K; ++k) {
    SubteamSlot fresh;
    fresh.anchor_position = fresh_anchor;
    fresh.anchor_time = clock;
    root.slots.push_back(fresh);
  }

  const std::set<TaskId> executing = root.executing_tasks();
  const std::set<TaskId> round_eligible = eligible_tasks(graph, executing);

  // Candidate tasks, in id order, never rearranged.
  std::vector<TaskId> candidates;
  for (TaskId t : graph.nodes)
    if (!executing.count(t)) candidates.push_back(t);

  SearchStats local;
  SearchStats& st = stats ? *stats : local;

  auto makespan_of = [&](const Assignment& a) {
    const auto schedule = estimate_schedule(a, graph, tasks, config.nav_speed);
    if (!schedule) return kInf;
    double m = -kInf;
    for (double e : schedule->slot_end) m = std::max(m, e);
    return m;
  };

  auto lower_bound = [&](const Assignment& a, double makespan) {
    int unassigned = 0;
    const std::set<TaskId> assigned = a.assigned_tasks();
    for (TaskId t : round_eligible)
      if (!assigned.count(t)) ++unassigned;
    int room = config.horizon - a.horizon_used;
    if (config.per_slot_cap > 0) {
      int slot_room = 0;
      for (const SubteamSlot& s : a.slots)
        slot_room += std::max(0, config.per_slot_cap -
                                     static_cast<int>(s.sequence.size()));
      room = std::min(room, slot_room);
    }
    const int stuck = std::max(0, unassigned - std::max(0, room));
    return config.unassigned_penalty * static_cast<double>(stuck) + makespan;
  };

  std::priority_queue<SearchNode, std::vector<SearchNode>, NodeOrder> frontier;
  std::set<std::vector<int>> seen;

  SearchNode rootnode{root, lower_bound(root, makespan_of(root)), flatten(root)};
  frontier.push(rootnode);
  seen.insert(rootnode.key);
  st.nodes++;  // generated nodes, root included

  double best_score = kInf;
  Assignment best = root;
  bool have_best = false;

  while (!frontier.empty() && !st.budget_hit) {
    SearchNode node = frontier.top();
    frontier.pop();

    if (config.prune_dominated && have_best && node.bound >= best_score) continue;

    if (groups_complete(node.assignment, graph)) {
      const double score = evaluate_with_eligible(node.assignment, graph, tasks,
                                                  round_eligible, config);
      if (!have_best || score < best_score ||
          (score == best_score && node.key < flatten(best))) {
        have_best = true;
        best_score = score;
        best = node.assignment;
      }
    }

    if (node.assignment.horizon_used >= config.horizon) continue;

    const std::set<TaskId> assigned = node.assignment.assigned_tasks();
    for (TaskId t : candidates) {
      if (st.budget_hit) break;
      if (assigned.count(t)) continue;
      bool ready = true;
      for (TaskId p : graph.predecessors(t))
        if (graph.contains(p) && !executing.count(p) && !assigned.count(p)) {
          ready = false;
          break;
        }
      if (!ready) continue;
      const auto* group = graph.group_of(t);

      bool expanded_empty = false;
      for (int k = 0; k < K; ++k) {
        const SubteamSlot& slot = node.assignment.slots[k];
        if (config.per_slot_cap > 0 &&
            static_cast<int>(slot.sequence.size()) >= config.per_slot_cap)
          continue;
        // Interchangeable fresh slots: expand only the first empty one.
        if (config.prune_symmetric && slot.sequence.empty() &&
            slot.locked_prefix == 0) {
          if (expanded_empty) continue;
          expanded_empty = true;
        }
        if (group) {
          bool conflict = false;
          for (TaskId g : *group)
            if (g != t &&
                std::find(slot.sequence.begin(), slot.sequence.end(), g) !=
                    slot.sequence.end())
              conflict = true;
          if (conflict) continue;
        }

        Assignment child = node.assignment;
        child.slots[k] = update_capacity(child.slots[k], tasks.at(t));
        child.horizon_used++;
        if (!capacity_feasible(child, fleet)) continue;

        SearchNode cn{child, 0.0, flatten(child)};
        if (!seen.insert(cn.key).second) continue;
        cn.bound = lower_bound(child, makespan_of(child));
        if (config.prune_dominated && have_best && cn.bound >= best_score) continue;
        if (st.nodes >= config.node_budget) {
          st.budget_hit = true;
          break;
        }
        st.nodes++;
        frontier.push(std::move(cn));
      }
    }
  }
  return best;
}

Assignment plan_round(const TaskGraph& graph, const TaskTable& tasks,
                      const std::vector<Agent>& fleet,
                      const std::vector<SubteamSlot>& executing_slots,
                      Vec2 fresh_anchor, double clock,
                      const PlannerConfig& config, SearchStats* stats) {
  const int locked = static_cast<int>(executing_slots.size());
  const int k_min = std::max(1, locked);
  const int k_cap = config.k_max > 0 ? std::min(config.k_max, config.horizon)
                                     : config.horizon;
  const int k_max = std::max(k_cap, locked);

  Assignment best;
  double best_score = kInf;
  bool have = false;
  for (int K = k_min; K <= k_max; ++K) {
    SearchStats k_stats;
    Assignment a = search_assignment_for_K(graph, tasks, K, fleet, executing_slots,
                                           fresh_anchor, clock, config, &k_stats);
    if (stats) {
      stats->nodes += k_stats.nodes;
      stats->budget_hit = stats->budget_hit || k_stats.budget_hit;
    }
    const double score = evaluate_assignment(a, graph, tasks, config);
    if (!have || score < best_score) {
      have = true;
      best_score = score;
      best = std::move(a);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Exhaustive oracle
// ---------------------------------------------------------------------------

namespace oracle {

namespace {

struct OracleEvaluator {
  const TaskGraph& graph;
  const TaskTable& tasks;
  double nav_speed;
  const std::vector<std::vector<TaskId>>& sequences;
  const std::vector<SubteamSlot>& base_slots;  // anchors and locked prefixes

  std::map<TaskId, std::pair<int, int>> place;
  std::map<Action, int> slot_capacity(int k) const {
    std::map<Action, int> cap = base_slots[k].capacity;
    for (TaskId id : sequences[k])
      for (const auto& [a, n] : tasks.at(id).peak_requirements())
        cap[a] = std::max(cap[a], n);
    return cap;
  }

  std::map<TaskId, double> arrival_memo, end_memo;
  std::set<TaskId> visiting;
  bool bad = false;
  std::vector<std::map<Action, int>> caps;

  OracleEvaluator(const TaskGraph& g, const TaskTable& t, double speed,
                  const std::vector<std::vector<TaskId>>& seqs,
                  const std::vector<SubteamSlot>& base)
      : graph(g), tasks(t), nav_speed(speed), sequences(seqs), base_slots(base) {
    for (int k = 0; k < static_cast<int>(base.size()); ++k)
      for (int i = 0; i < static_cast<int>(base[k].sequence.size()); ++i)
        place[base[k].sequence[i]] = {k, -1};  // locked marker
    for (int k = 0; k < static_cast<int>(seqs.size()); ++k)
      for (int i = 0; i < static_cast<int>(seqs[k].size()); ++i)
        place[seqs[k][i]] = {k, i};
    for (int k = 0; k < static_cast<int>(seqs.size()); ++k)
      caps.push_back(slot_capacity(k));
  }

  double arrival_of(TaskId id) {
    if (auto it = arrival_memo.find(id); it != arrival_memo.end()) return it->second;
    if (!visiting.insert(id).second) {
      bad = true;
      return kInf;
    }
    const auto [k, i] = place.at(id);
    double ready;
    Vec2 from;
    if (i <= 0) {
      ready = base_slots[k].anchor_time;
      from = base_slots[k].anchor_position;
    } else {
      const TaskId prev = sequences[k][i - 1];
      ready = end_of(prev);
      from = tasks.at(prev).region.centroid();
    }
    for (TaskId p : graph.predecessors(id)) {
      if (!graph.contains(p)) continue;
      if (!place.count(p)) {
        bad = true;
        visiting.erase(id);
        return kInf;
      }
      ready = std::max(ready, end_of(p));
    }
    const double value =
        ready + distance(from, tasks.at(id).region.centroid()) / nav_speed;
    visiting.erase(id);
    arrival_memo[id] = value;
    return value;
  }

  double end_of(TaskId id) {
    if (auto it = end_memo.find(id); it != end_memo.end()) return it->second;
    const auto [k, i] = place.at(id);
    if (i < 0) {  // locked
      end_memo[id] = base_slots[k].anchor_time;
      return base_slots[k].anchor_time;
    }
    double start = arrival_of(id);
    if (const auto* group = graph.group_of(id)) {
      for (TaskId g : *group) {
        if (g == id || !place.count(g)) continue;
        if (place.at(g).second < 0) continue;
        start = std::max(start, arrival_of(g));
      }
    }
    if (bad) return kInf;
    const double value = start + exec_estimate(tasks.at(id), caps[k]);
    end_memo[id] = value;
    return value;
  }
};

}  // namespace

double assignment_optimum(const TaskGraph& graph, const TaskTable& tasks,
                          int K, const std::vector<Agent>& fleet,
                          const std::vector<SubteamSlot>& executing_slots,
                          Vec2 fresh_anchor, double clock,
                          const PlannerConfig& config) {
  if (graph.nodes.size() > 7 || K > 3 || config.horizon > 6)
    throw OracleBoundsError("assignment oracle limited to 7 tasks, 3 slots, H=6");

  std::vector<SubteamSlot> base = executing_slots;
  for (SubteamSlot& s : base) s.locked_prefix = static_cast<int>(s.sequence.size());
  for (int k = static_cast<int>(executing_slots.size()); k < K; ++k) {
    SubteamSlot fresh;
    fresh.anchor_position = fresh_anchor;
    fresh.anchor_time = clock;
    base.push_back(fresh);
  }

  std::set<TaskId> executing;
  for (const SubteamSlot& s : executing_slots)
    executing.insert(s.sequence.begin(), s.sequence.end());
  const std::set<TaskId> round_eligible = eligible_tasks(graph, executing);

  std::vector<TaskId> pool;
  for (TaskId t : graph.nodes)
    if (!executing.count(t)) pool.push_back(t);

  std::vector<std::vector<TaskId>> sequences(K);
  std::set<TaskId> used;
  double best = kInf;

  std::function<void()> score_leaf = [&]() {
    int total = 0;
    for (const auto& seq : sequences) total += static_cast<int>(seq.size());
    if (total > config.horizon) return;
    if (config.per_slot_cap > 0)
      for (int k = 0; k < K; ++k)
        if (static_cast<int>(sequences[k].size() + base[k].sequence.size()) >
            config.per_slot_cap)
          return;

    // Predecessors must be done, executing, or assigned somewhere.
    for (const auto& seq : sequences)
      for (TaskId t : seq)
        for (TaskId p : graph.predecessors(t))
          if (graph.contains(p) && !executing.count(p) && !used.count(p)) return;

    // Concurrence groups all-or-nothing, members in distinct slots.
    for (const auto& group : graph.concurrence_groups) {
      int present = 0, total_members = 0;
      for (TaskId g : group) {
        if (!graph.contains(g)) continue;
        ++total_members;
        if (used.count(g)) ++present;
      }
      if (present != 0 && present != total_members) return;
      for (int k = 0; k < K; ++k) {
        int here = 0;
        for (TaskId g : group)
          if (std::find(sequences[k].begin(), sequences[k].end(), g) !=
              sequences[k].end())
            ++here;
        if (here > 1) return;
      }
    }

    OracleEvaluator eval(graph, tasks, config.nav_speed, sequences, base);

    // Fleet capacity bound over the accumulated slot requirements.
    std::map<Action, int> required;
    for (int k = 0; k < K; ++k)
      for (const auto& [a, n] : eval.caps[k]) required[a] += n;
    for (const auto& [a, n] : required) {
      int capable = 0;
      for (const Agent& ag : fleet)
        if (ag.alive && ag.capabilities.count(a)) ++capable;
      if (n > capable) return;
    }

    double makespan = -kInf;
    for (int k = 0; k < K; ++k) {
      double slot_end = base[k].anchor_time;
      for (TaskId id : sequences[k]) slot_end = std::max(slot_end, eval.end_of(id));
      makespan = std::max(makespan, slot_end);
    }
    if (eval.bad) return;

    int unassigned = 0;
    for (TaskId t : round_eligible)
      if (!used.count(t)) ++unassigned;
    const double penalty =
        config.unassigned_penalty * static_cast<double>(unassigned);
    best = std::min(best, penalty + makespan);
  };

  // Fill slot k completely before moving on, so each assignment is visited
  // exactly once.
  std::function<void(int)> fill = [&](int k) {
    if (k == K) {
      score_leaf();
      return;
    }
    fill(k + 1);  // close slot k
    if (static_cast<int>(used.size()) >= config.horizon) return;
    if (config.per_slot_cap > 0 &&
        static_cast<int>(sequences[k].size() + base[k].sequence.size()) >=
            config.per_slot_cap)
      return;
    for (TaskId t : pool) {
      if (used.count(t)) continue;
      sequences[k].push_back(t);
      used.insert(t);
      fill(k);
      used.erase(t);
      sequences[k].pop_back();
    }
  };
  fill(0);
  return best;
}

double plan_round_optimum(const TaskGraph& graph, const TaskTable& tasks,
                          const std::vector<Agent>& fleet,
                          const std::vector<SubteamSlot>& executing_slots,
                          Vec2 fresh_anchor, double clock,
                          const PlannerConfig& config) {
  const int locked = static_cast<int>(executing_slots.size());
  const int k_min = std::max(1, locked);
  const int k_cap = config.k_max > 0 ? std::min(config.k_max, config.horizon)
                                     : config.horizon;
  const int k_max = std::max(k_cap, locked);
  double best = kInf;
  for (int K = k_min; K <= k_max; ++K)
    best = std::min(best, assignment_optimum(graph, tasks, K, fleet,
                                             executing_slots, fresh_anchor,
                                             clock, config));
  return best;
}

}  // namespace oracle

}  // namespace fleetplan
