#include "fleetplan/optim.hpp"

#include <algorithm>
#include <cmath>

namespace fleetplan {

namespace {

// Residual demand table for one covering search.
struct CoverState {
  std::vector<std::map<Action, int>> residual;  // per slot
  std::vector<int> slot_of_agent;
  double total = 0.0;

  bool covered() const {
    for (const auto& r : residual)
      for (const auto& [a, d] : r)
        if (d > 0) return false;
    return true;
  }
};

struct CoverSearch {
  const BottleneckProblem& p;
  double threshold;
  bool minimize_sum;
  long node_budget;

  long nodes = 0;
  bool found = false;
  double best_sum = kInf;
  std::vector<int> best_assignment;

  CoverSearch(const BottleneckProblem& p_, double theta, bool min_sum)
      : p(p_), threshold(theta), minimize_sum(min_sum),
        node_budget(min_sum ? 4'000'000 : 10'000'000) {}

  bool usable(int agent, int slot, const CoverState& s) const {
    if (s.slot_of_agent[agent] != -1) return false;
    if (!p.eligible[agent][slot]) return false;
    if (p.cost[agent][slot] > threshold) return false;
    for (const auto& [a, d] : s.residual[slot])
      if (d > 0 && p.capabilities[agent].count(a)) return true;
    return false;
  }

  // Most-constrained open demand column, or (-1, "") when fully covered.
  std::pair<int, Action> pick_column(const CoverState& s,
                                     const std::set<std::pair<int, int>>& forbidden) const {
    int best_slot = -1;
    Action best_action;
    long best_count = std::numeric_limits<long>::max();
    for (int k = 0; k < static_cast<int>(s.residual.size()); ++k) {
      for (const auto& [a, d] : s.residual[k]) {
        if (d <= 0) continue;
        long count = 0;
        for (int i = 0; i < p.n_agents; ++i)
          if (!forbidden.count({i, k}) && usable(i, k, s) &&
              p.capabilities[i].count(a))
            ++count;
        if (count < best_count) {
          best_count = count;
          best_slot = k;
          best_action = a;
        }
      }
    }
    return {best_slot, best_action};
  }

  // Admissible completion bound for sum minimization: the most expensive
  // single demand column, served by its cheapest candidates.
  double sum_bound(const CoverState& s,
                   const std::set<std::pair<int, int>>& forbidden) const {
    double bound = 0.0;
    for (int k = 0; k < static_cast<int>(s.residual.size()); ++k) {
      for (const auto& [a, d] : s.residual[k]) {
        if (d <= 0) continue;
        std::vector<double> costs;
        for (int i = 0; i < p.n_agents; ++i)
          if (!forbidden.count({i, k}) && usable(i, k, s) &&
              p.capabilities[i].count(a))
            costs.push_back(p.cost[i][k]);
        if (static_cast<int>(costs.size()) < d) return kInf;
        std::sort(costs.begin(), costs.end());
        double col = 0.0;
        for (int j = 0; j < d; ++j) col += costs[j];
        bound = std::max(bound, col);
      }
    }
    return bound;
  }

  void assign(CoverState& s, int agent, int slot) const {
    s.slot_of_agent[agent] = slot;
    s.total += p.cost[agent][slot];
    for (auto& [a, d] : s.residual[slot])
      if (d > 0 && p.capabilities[agent].count(a)) --d;
  }

  void dfs(CoverState& s, std::set<std::pair<int, int>>& forbidden) {
    if (++nodes > node_budget) return;
    if (found && !minimize_sum) return;
    auto [slot, action] = pick_column(s, forbidden);
    if (slot < 0) {
      if (!found || s.total < best_sum ||
          (s.total == best_sum && s.slot_of_agent < best_assignment)) {
        found = true;
        best_sum = s.total;
        best_assignment = s.slot_of_agent;
      }
      return;
    }
    if (minimize_sum && found && s.total + sum_bound(s, forbidden) >= best_sum)
      return;
    // Branch over which candidate serves this column; branch j forbids the
    // earlier candidates from this slot, so each cover is visited once.
    std::vector<int> candidates;
    for (int i = 0; i < p.n_agents; ++i)
      if (!forbidden.count({i, slot}) && usable(i, slot, s) &&
          p.capabilities[i].count(action))
        candidates.push_back(i);
    if (minimize_sum)
      std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
        return p.cost[a][slot] < p.cost[b][slot];
      });
    std::vector<std::pair<int, int>> added;
    for (int i : candidates) {
      CoverState next = s;
      assign(next, i, slot);
      dfs(next, forbidden);
      forbidden.insert({i, slot});
      added.emplace_back(i, slot);
      if (found && !minimize_sum) break;
    }
    for (const auto& fk : added) forbidden.erase(fk);
  }

  bool run(const std::vector<std::map<Action, int>>& demands) {
    CoverState root;
    root.residual = demands;
    root.slot_of_agent.assign(p.n_agents, -1);
    std::set<std::pair<int, int>> forbidden;
    dfs(root, forbidden);
    return found;
  }
};

std::vector<std::map<Action, int>> demand_table(const BottleneckProblem& p) {
  std::vector<std::map<Action, int>> demands;
  demands.reserve(p.slots.size());
  for (const auto& slot : p.slots) demands.push_back(slot.lower);
  return demands;
}

}  // namespace

BottleneckSolution solve_bottleneck(const BottleneckProblem& problem) {
  BottleneckSolution out;
  const auto demands = demand_table(problem);

  // Per-column supply check; doubles as the infeasibility certificate.
  for (int k = 0; k < static_cast<int>(demands.size()); ++k) {
    for (const auto& [a, d] : demands[k]) {
      int supply = 0;
      for (int i = 0; i < problem.n_agents; ++i)
        if (problem.eligible[i][k] && problem.capabilities[i].count(a) &&
            std::isfinite(problem.cost[i][k]))
          ++supply;
      if (supply < d) {
        out.blocking_slot = k;
        out.blocking_action = a;
        return out;
      }
    }
  }

  std::vector<double> thresholds;
  for (int i = 0; i < problem.n_agents; ++i)
    for (int k = 0; k < static_cast<int>(demands.size()); ++k) {
      if (!problem.eligible[i][k] || !std::isfinite(problem.cost[i][k])) continue;
      bool useful = false;
      for (const auto& [a, d] : demands[k])
        if (d > 0 && problem.capabilities[i].count(a)) useful = true;
      if (useful) thresholds.push_back(problem.cost[i][k]);
    }
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  if (thresholds.empty()) {
    bool any_demand = false;
    for (const auto& d : demands)
      for (const auto& [a, v] : d)
        if (v > 0) any_demand = true;
    if (!any_demand) {
      out.feasible = true;
      out.bottleneck = 0.0;
      out.total_cost = 0.0;
      out.slot_of_agent.assign(problem.n_agents, -1);
    }
    return out;
  }

  // Binary search for the smallest feasible threshold.
  std::size_t lo = 0, hi = thresholds.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    CoverSearch search(problem, thresholds[mid], false);
    if (search.run(demands))
      hi = mid;
    else
      lo = mid + 1;
  }
  if (lo == thresholds.size()) {
    // Disjointness makes every threshold infeasible; report the column with
    // the tightest supply at the largest threshold.
    CoverSearch search(problem, thresholds.back(), false);
    CoverState root;
    root.residual = demands;
    root.slot_of_agent.assign(problem.n_agents, -1);
    std::set<std::pair<int, int>> none;
    auto [k, a] = search.pick_column(root, none);
    out.blocking_slot = k;
    out.blocking_action = a;
    return out;
  }

  CoverSearch refine(problem, thresholds[lo], true);
  refine.run(demands);
  out.feasible = true;
  out.bottleneck = thresholds[lo];
  out.total_cost = refine.best_sum;
  out.slot_of_agent = refine.best_assignment;
  return out;
}

// ===========================================================================

BnbResult solve_bnb(const BnbProblem& problem) {
  BnbResult result;
  const int n = static_cast<int>(problem.option_counts.size());
  std::vector<int> choices;
  choices.reserve(n);

  std::function<void()> dfs = [&]() {
    result.stats.nodes++;
    if (!problem.prefix_feasible(choices)) return;
    if (static_cast<int>(choices.size()) == n) {
      const double cost = problem.leaf_cost(choices);
      if (cost < result.cost) {
        result.feasible = true;
        result.cost = cost;
        result.choices = choices;
      }
      return;
    }
    const double bound = problem.lower_bound(choices);
    if (result.feasible && bound >= result.cost) {
      result.stats.min_pruned_bound = std::min(result.stats.min_pruned_bound, bound);
      return;
    }
    const int slot = static_cast<int>(choices.size());
    for (int opt = 0; opt < problem.option_counts[slot]; ++opt) {
      choices.push_back(opt);
      dfs();
      choices.pop_back();
    }
  };
  dfs();
  return result;
}

// ===========================================================================

namespace oracle {

double bottleneck_optimum(const BottleneckProblem& problem) {
  if (problem.n_agents > 10 || problem.slots.size() > 4)
    throw OracleBoundsError("bottleneck oracle limited to 10 agents, 4 slots");
  const int K = static_cast<int>(problem.slots.size());
  const auto demands = demand_table(problem);

  double best = kInf;
  std::vector<int> membership(problem.n_agents, -1);
  std::function<void(int)> enumerate = [&](int agent) {
    if (agent == problem.n_agents) {
      double width = -kInf;
      for (int k = 0; k < K; ++k) {
        std::map<Action, int> counts;
        for (int i = 0; i < problem.n_agents; ++i)
          if (membership[i] == k)
            for (const Action& a : problem.capabilities[i]) counts[a]++;
        for (const auto& [a, d] : demands[k])
          if (counts[a] < d) return;
      }
      for (int i = 0; i < problem.n_agents; ++i)
        if (membership[i] >= 0) width = std::max(width, problem.cost[i][membership[i]]);
      best = std::min(best, width);
      return;
    }
    for (int k = -1; k < K; ++k) {
      if (k >= 0 && (!problem.eligible[agent][k] ||
                     !std::isfinite(problem.cost[agent][k])))
        continue;
      membership[agent] = k;
      enumerate(agent + 1);
    }
    membership[agent] = -1;
  };
  enumerate(0);
  return best;
}

namespace {

struct AgentTrack {
  Vec2 position;
  double free_time;
};

// Times for a fixed choice of crews and per-agent visit orders. Per-agent
// order is implied by the global subtask order restricted to its crews.
double config_makespan(const std::vector<RoutingAgent>& agents,
                       const std::vector<RoutingSubtask>& subtasks,
                       const DurationParams& duration,
                       const std::vector<int>& order,
                       const std::vector<std::vector<int>>& crews) {
  std::vector<AgentTrack> track(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i)
    track[i] = {agents[i].position, agents[i].free_time};
  double makespan = 0.0;
  for (int idx : order) {
    const RoutingSubtask& st = subtasks[idx];
    const std::vector<int>& crew = crews[idx];
    double start = -kInf;
    for (int i : crew) {
      const double arrival = track[i].free_time +
          distance(track[i].position, st.location) / agents[i].max_speed;
      start = std::max(start, arrival);
    }
    const double end =
        start + eta(st.required_agents, static_cast<int>(crew.size()), duration);
    for (int i : crew) track[i] = {st.location, end};
    makespan = std::max(makespan, end);
  }
  return makespan;
}

}  // namespace

double routing_optimum(const std::vector<RoutingAgent>& agents,
                       const std::vector<RoutingSubtask>& subtasks,
                       const DurationParams& duration) {
  const int J = static_cast<int>(subtasks.size());
  const int N = static_cast<int>(agents.size());
  if (J > 4 || N > 4)
    throw OracleBoundsError("routing oracle limited to 4 subtasks, 4 agents");
  if (J == 0) return 0.0;

  std::vector<int> order(J);
  for (int j = 0; j < J; ++j) order[j] = j;

  double best = kInf;
  std::vector<std::vector<int>> crews(J);
  // All capable crews per subtask.
  std::vector<std::vector<std::vector<int>>> options(J);
  for (int j = 0; j < J; ++j) {
    std::vector<int> capable;
    for (int i = 0; i < N; ++i)
      if (agents[i].capabilities.count(subtasks[j].action)) capable.push_back(i);
    const int c = static_cast<int>(capable.size());
    for (int mask = 1; mask < (1 << c); ++mask) {
      std::vector<int> crew;
      for (int b = 0; b < c; ++b)
        if (mask & (1 << b)) crew.push_back(capable[b]);
      if (static_cast<int>(crew.size()) >= subtasks[j].required_agents)
        options[j].push_back(crew);
    }
    if (options[j].empty()) return kInf;
  }

  std::function<void(int)> pick = [&](int j) {
    if (j == J) {
      std::vector<int> perm = order;
      std::sort(perm.begin(), perm.end());
      do {
        best = std::min(best, config_makespan(agents, subtasks, duration, perm, crews));
      } while (std::next_permutation(perm.begin(), perm.end()));
      return;
    }
    for (const auto& crew : options[j]) {
      crews[j] = crew;
      pick(j + 1);
    }
  };
  pick(0);
  return best;
}

}  // namespace oracle

}  // namespace fleetplan
