#include "fleetplan/localcoord.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "fleetplan/optim.hpp"

namespace fleetplan {

// ===========================================================================
// Routing
// ===========================================================================

namespace {

struct Track {
  Vec2 position;
  double free_time;
};

struct Dispatch {
  int subtask = -1;           // index into the subtask vector
  std::vector<int> crew;      // indices into the team vector
  double start = 0.0, end = 0.0;
};

double crew_start(const std::vector<Track>& track,
                  const std::vector<LocalAgentState>& team,
                  const std::vector<int>& crew, const Vec2& where) {
  double start = -1.0;
  for (int i : crew) {
    const double arrival =
        track[i].free_time + distance(track[i].position, where) / team[i].max_speed;
    start = std::max(start, arrival);
  }
  return start;
}

struct RoutingSearch {
  const std::vector<LocalAgentState>& team;
  const std::vector<Subtask>& subtasks;
  const DurationParams& duration;
  std::vector<std::vector<int>> capable;  // per subtask, ascending agent index

  double best = kDoubleInf;
  std::vector<Dispatch> best_schedule;

  static constexpr double kDoubleInf = std::numeric_limits<double>::infinity();

  RoutingSearch(const std::vector<LocalAgentState>& t,
                const std::vector<Subtask>& s, const DurationParams& d)
      : team(t), subtasks(s), duration(d) {
    for (const Subtask& st : subtasks) {
      std::vector<int> c;
      for (int i = 0; i < static_cast<int>(team.size()); ++i)
        if (team[i].capabilities.count(st.action)) c.push_back(i);
      if (static_cast<int>(c.size()) < st.required_agents)
        throw LocalInfeasibleError("subtask " + std::to_string(st.id) + " needs " +
                                   std::to_string(st.required_agents) + " agents of " +
                                   st.action + ", team has " +
                                   std::to_string(c.size()));
      capable.push_back(std::move(c));
    }
  }

  int crew_limit(int j) const {
    const int sat = std::max(subtasks[j].required_agents, duration.saturation);
    return std::min(static_cast<int>(capable[j].size()), sat);
  }

  // Optimistic completion for a remaining subtask: its n_j-th earliest
  // possible arrival from current agent states, plus the saturated duration.
  double remaining_bound(const std::vector<Track>& track,
                         const std::vector<bool>& done) const {
    double bound = 0.0;
    for (int j = 0; j < static_cast<int>(subtasks.size()); ++j) {
      if (done[j]) continue;
      std::vector<double> arrivals;
      for (int i : capable[j])
        arrivals.push_back(track[i].free_time +
                           distance(track[i].position, subtasks[j].location) /
                               team[i].max_speed);
      std::sort(arrivals.begin(), arrivals.end());
      const double start = arrivals[subtasks[j].required_agents - 1];
      const double quickest =
          eta(subtasks[j].required_agents, crew_limit(j), duration);
      bound = std::max(bound, start + quickest);
    }
    return bound;
  }

  void dfs(std::vector<Track>& track, std::vector<bool>& done, int remaining,
           double makespan, std::vector<Dispatch>& schedule) {
    if (remaining == 0) {
      if (makespan < best) {
        best = makespan;
        best_schedule = schedule;
      }
      return;
    }
    if (std::max(makespan, remaining_bound(track, done)) >= best) return;

    for (int j = 0; j < static_cast<int>(subtasks.size()); ++j) {
      if (done[j]) continue;
      const int lo = subtasks[j].required_agents;
      const int hi = crew_limit(j);
      for (int size = lo; size <= hi; ++size) {
        std::vector<int> pick(size);
        std::function<void(int, int)> combos = [&](int offset, int depth) {
          if (depth == size) {
            const double start = crew_start(track, team, pick, subtasks[j].location);
            const double end = start + eta(lo, size, duration);
            if (std::max(makespan, end) >= best) return;
            std::vector<Track> saved;
            for (int i : pick) saved.push_back(track[i]);
            for (int i : pick) track[i] = {subtasks[j].location, end};
            done[j] = true;
            schedule.push_back({j, pick, start, end});
            dfs(track, done, remaining - 1, std::max(makespan, end), schedule);
            schedule.pop_back();
            done[j] = false;
            for (int n = 0; n < size; ++n) track[pick[n]] = saved[n];
            return;
          }
          for (int c = offset; c < static_cast<int>(capable[j].size()); ++c) {
            pick[depth] = capable[j][c];
            combos(c + 1, depth + 1);
          }
        };
        combos(0, 0);
      }
    }
  }
};

RoutePlan greedy_routes(const std::vector<LocalAgentState>& team,
                        const std::vector<Subtask>& subtasks,
                        const DurationParams& duration,
                        const std::vector<std::vector<int>>& capable,
                        std::vector<int> order) {
  std::vector<Track> track(team.size());
  for (std::size_t i = 0; i < team.size(); ++i)
    track[i] = {team[i].position, team[i].free_time};

  std::vector<Dispatch> schedule;
  for (int j : order) {
    const Subtask& st = subtasks[j];
    const int lo = st.required_agents;
    const int sat = std::max(lo, duration.saturation);
    const int hi = std::min(static_cast<int>(capable[j].size()), sat);

    // Earliest-arrival members first, then try growing the crew.
    std::vector<int> sorted = capable[j];
    std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) {
      const double ta = track[a].free_time +
                        distance(track[a].position, st.location) / team[a].max_speed;
      const double tb = track[b].free_time +
                        distance(track[b].position, st.location) / team[b].max_speed;
      if (ta != tb) return ta < tb;
      return a < b;
    });
    double best_end = std::numeric_limits<double>::infinity();
    int best_size = lo;
    for (int size = lo; size <= hi; ++size) {
      std::vector<int> crew(sorted.begin(), sorted.begin() + size);
      const double start = crew_start(track, team, crew, st.location);
      const double end = start + eta(lo, size, duration);
      if (end < best_end) {
        best_end = end;
        best_size = size;
      }
    }
    std::vector<int> crew(sorted.begin(), sorted.begin() + best_size);
    const double start = crew_start(track, team, crew, st.location);
    const double end = start + eta(lo, best_size, duration);
    for (int i : crew) track[i] = {st.location, end};
    schedule.push_back({j, crew, start, end});
  }

  RoutePlan plan;
  double makespan = 0.0;
  for (const Dispatch& d : schedule) makespan = std::max(makespan, d.end);
  plan.makespan = subtasks.empty() ? 0.0 : makespan;
  for (const Dispatch& d : schedule) {
    const Subtask& st = subtasks[d.subtask];
    plan.dispatch_order.push_back(st.id);
    std::vector<AgentId> ids;
    for (int i : d.crew) ids.push_back(team[i].id);
    std::sort(ids.begin(), ids.end());
    plan.crews[st.id] = ids;
    plan.start_time[st.id] = d.start;
    plan.end_time[st.id] = d.end;
  }
  return plan;
}

RoutePlan plan_from_schedule(const std::vector<LocalAgentState>& team,
                             const std::vector<Subtask>& subtasks,
                             const std::vector<Dispatch>& schedule) {
  RoutePlan plan;
  for (const Dispatch& d : schedule) {
    const Subtask& st = subtasks[d.subtask];
    plan.dispatch_order.push_back(st.id);
    std::vector<AgentId> ids;
    for (int i : d.crew) ids.push_back(team[i].id);
    std::sort(ids.begin(), ids.end());
    plan.crews[st.id] = ids;
    plan.start_time[st.id] = d.start;
    plan.end_time[st.id] = d.end;
    plan.makespan = std::max(plan.makespan, d.end);
  }
  return plan;
}

void attach_action_plans(RoutePlan& plan, const std::vector<LocalAgentState>& team,
                         const std::vector<Subtask>& subtasks) {
  std::map<SubtaskId, const Subtask*> by_id;
  for (const Subtask& s : subtasks) by_id[s.id] = &s;
  for (const LocalAgentState& agent : team) {
    ActionPlan ap{agent.id, {}};
    for (SubtaskId sid : plan.dispatch_order) {
      const auto& crew = plan.crews.at(sid);
      if (std::find(crew.begin(), crew.end(), agent.id) == crew.end()) continue;
      const Subtask& st = *by_id.at(sid);
      ap.steps.push_back({plan.start_time.at(sid), st.location, st.action, sid});
    }
    if (!ap.steps.empty()) plan.plans.push_back(std::move(ap));
  }
}

}  // namespace

RoutePlan plan_subtask_routes(const std::vector<LocalAgentState>& team,
                              const std::vector<Subtask>& subtasks,
                              const DurationParams& duration,
                              const LocalConfig& config) {
  RoutePlan plan;
  if (subtasks.empty()) return plan;

  RoutingSearch search(team, subtasks, duration);

  const long slots = static_cast<long>(subtasks.size()) *
                     static_cast<long>(team.size());
  // Greedy incumbent (also the fallback above the exact threshold).
  std::vector<int> order(subtasks.size());
  for (std::size_t j = 0; j < subtasks.size(); ++j) order[j] = static_cast<int>(j);
  RoutePlan incumbent = greedy_routes(team, subtasks, duration, search.capable, order);

  if (slots <= config.exact_slots) {
    std::vector<Track> track(team.size());
    for (std::size_t i = 0; i < team.size(); ++i)
      track[i] = {team[i].position, team[i].free_time};
    std::vector<bool> done(subtasks.size(), false);
    std::vector<Dispatch> schedule;
    search.best = incumbent.makespan;
    search.dfs(track, done, static_cast<int>(subtasks.size()), 0.0, schedule);
    plan = search.best_schedule.empty()
               ? incumbent
               : plan_from_schedule(team, subtasks, search.best_schedule);
  } else {
    // Pairwise dispatch-order exchange until no improvement.
    plan = incumbent;
    bool improved = true;
    int passes = 0;
    while (improved && passes++ < 4) {
      improved = false;
      for (std::size_t a = 0; a + 1 < order.size(); ++a) {
        for (std::size_t b = a + 1; b < order.size(); ++b) {
          std::vector<int> swapped = order;
          std::swap(swapped[a], swapped[b]);
          RoutePlan candidate =
              greedy_routes(team, subtasks, duration, search.capable, swapped);
          if (candidate.makespan < plan.makespan) {
            plan = candidate;
            order = swapped;
            improved = true;
          }
        }
      }
    }
  }
  attach_action_plans(plan, team, subtasks);
  return plan;
}

RoutePlan plan_static_known(const std::vector<LocalAgentState>& team,
                            const CollabTask& task, const LocalConfig& config) {
  std::vector<Subtask> open;
  for (const Subtask& s : task.subtasks)
    if (s.state != SubtaskState::done) open.push_back(s);
  return plan_subtask_routes(team, open, task.duration, config);
}

// ===========================================================================
// Exploration
// ===========================================================================

OccupancyGrid::OccupancyGrid(const Rect& r, double cell) {
  region = r;
  cell_size = cell;
  nx = std::max(1, static_cast<int>(std::ceil(r.width() / cell)));
  ny = std::max(1, static_cast<int>(std::ceil(r.height() / cell)));
  visited.assign(static_cast<std::size_t>(nx) * ny, 0);
}

Vec2 OccupancyGrid::cell_center(int ix, int iy) const {
  return {region.x0 + (ix + 0.5) * cell_size, region.y0 + (iy + 0.5) * cell_size};
}

int OccupancyGrid::cell_of(const Vec2& p) const {
  int ix = static_cast<int>((p.x - region.x0) / cell_size);
  int iy = static_cast<int>((p.y - region.y0) / cell_size);
  ix = std::clamp(ix, 0, nx - 1);
  iy = std::clamp(iy, 0, ny - 1);
  return iy * nx + ix;
}

bool OccupancyGrid::fully_visited() const {
  return std::all_of(visited.begin(), visited.end(),
                     [](std::uint8_t v) { return v != 0; });
}

std::vector<SubtaskId> explore_step(OccupancyGrid& grid,
                                    const std::vector<Vec2>& member_positions,
                                    double sensor_radius, CollabTask& task) {
  for (int iy = 0; iy < grid.ny; ++iy)
    for (int ix = 0; ix < grid.nx; ++ix) {
      if (grid.cell_visited(ix, iy)) continue;
      const Vec2 c = grid.cell_center(ix, iy);
      for (const Vec2& p : member_positions)
        if (distance(c, p) <= sensor_radius) {
          grid.visited[iy * grid.nx + ix] = 1;
          break;
        }
    }
  std::vector<SubtaskId> detected;
  for (Subtask& s : task.subtasks) {
    if (s.state != SubtaskState::undetected) continue;
    if (grid.visited[grid.cell_of(s.location)]) {
      s.state = SubtaskState::detected;
      detected.push_back(s.id);
    }
  }
  return detected;
}

std::vector<Vec2> frontier_waypoints(const OccupancyGrid& grid) {
  auto frontier = [&](int ix, int iy) {
    if (grid.cell_visited(ix, iy)) return false;
    const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      const int jx = ix + dx[d], jy = iy + dy[d];
      if (jx >= 0 && jx < grid.nx && jy >= 0 && jy < grid.ny &&
          grid.cell_visited(jx, jy))
        return true;
    }
    return false;
  };

  std::vector<int> cluster(static_cast<std::size_t>(grid.nx) * grid.ny, -1);
  std::vector<Vec2> waypoints;
  int next_cluster = 0;
  for (int iy = 0; iy < grid.ny; ++iy)
    for (int ix = 0; ix < grid.nx; ++ix) {
      if (!frontier(ix, iy) || cluster[iy * grid.nx + ix] >= 0) continue;
      // Flood fill this frontier cluster.
      std::vector<std::pair<int, int>> stack{{ix, iy}}, cells;
      cluster[iy * grid.nx + ix] = next_cluster;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        cells.emplace_back(cx, cy);
        const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int jx = cx + dx[d], jy = cy + dy[d];
          if (jx < 0 || jx >= grid.nx || jy < 0 || jy >= grid.ny) continue;
          if (cluster[jy * grid.nx + jx] >= 0 || !frontier(jx, jy)) continue;
          cluster[jy * grid.nx + jx] = next_cluster;
          stack.emplace_back(jx, jy);
        }
      }
      Vec2 sum;
      for (const auto& [cx, cy] : cells) sum = sum + grid.cell_center(cx, cy);
      waypoints.push_back(sum * (1.0 / static_cast<double>(cells.size())));
      ++next_cluster;
    }
  return waypoints;
}

SubtaskPool build_pool(const OccupancyGrid& grid, const CollabTask& task) {
  SubtaskPool pool;
  pool.exploration_waypoints = frontier_waypoints(grid);
  for (const Subtask& s : task.subtasks)
    if (s.state == SubtaskState::detected) pool.collaborative.push_back(s.id);
  return pool;
}

// ===========================================================================
// SEC rounds
// ===========================================================================

SecRound plan_sec_round(const std::vector<LocalAgentState>& idle_members,
                        const CollabTask& task, const SubtaskPool& pool,
                        const OccupancyGrid& grid, const LocalConfig& config) {
  SecRound round;
  if (pool.collaborative.empty() && grid.fully_visited() &&
      task.all_subtasks_done()) {
    round.complete = true;
    return round;
  }

  // Collaborative subtasks first, in id order, while idle capacity lasts.
  std::map<SubtaskId, const Subtask*> by_id;
  for (const Subtask& s : task.subtasks) by_id[s.id] = &s;
  std::vector<Subtask> batch;
  int planned_agents = 0;
  for (SubtaskId sid : pool.collaborative) {
    if (static_cast<int>(batch.size()) >= config.batch_size) break;
    const Subtask& st = *by_id.at(sid);
    int capable = 0;
    for (const LocalAgentState& a : idle_members)
      if (a.capabilities.count(st.action)) ++capable;
    if (planned_agents + st.required_agents >
            static_cast<int>(idle_members.size()) ||
        capable < st.required_agents)
      continue;
    batch.push_back(st);
    planned_agents += st.required_agents;
  }
  if (!batch.empty())
    round.routes = plan_subtask_routes(idle_members, batch, task.duration, config);

  // Remaining idle members head for the nearest frontier waypoints.
  std::set<AgentId> busy;
  for (const auto& [sid, crew] : round.routes.crews)
    busy.insert(crew.begin(), crew.end());
  std::vector<bool> waypoint_used(pool.exploration_waypoints.size(), false);
  for (const LocalAgentState& a : idle_members) {
    if (busy.count(a.id)) continue;
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < pool.exploration_waypoints.size(); ++w) {
      if (waypoint_used[w]) continue;
      const double d = distance(a.position, pool.exploration_waypoints[w]);
      if (d < best_dist) {
        best_dist = d;
        best = static_cast<int>(w);
      }
    }
    if (best >= 0) {
      waypoint_used[best] = true;
      round.explorers.emplace_back(a.id, pool.exploration_waypoints[best]);
    }
  }
  return round;
}

// ===========================================================================
// Dynamic coalition formation
// ===========================================================================

std::pair<int, double> scheme_cost(const CoalitionScheme& scheme,
                                   const std::vector<LocalAgentState>& team,
                                   const std::vector<Subtask>& targets,
                                   const DurationParams& duration,
                                   const LocalConfig& config) {
  std::map<AgentId, const LocalAgentState*> by_id;
  for (const LocalAgentState& a : team) by_id[a.id] = &a;

  int invalid = 0;
  double bottleneck = 0.0;
  for (const Subtask& t : targets) {
    const auto it = scheme.coalitions.find(t.id);
    const std::vector<AgentId>* members =
        it == scheme.coalitions.end() ? nullptr : &it->second;
    const int size = members ? static_cast<int>(members->size()) : 0;
    bool ok = size >= t.required_agents && size <= config.coalition_cap;
    if (ok)
      for (AgentId id : *members)
        if (!by_id.at(id)->capabilities.count(t.action)) ok = false;
    if (!ok) {
      ++invalid;
      continue;
    }
    double intercept = 0.0;
    for (AgentId id : *members) {
      const LocalAgentState& a = *by_id.at(id);
      intercept = std::max(intercept,
                           distance(a.position, t.location) / a.max_speed);
    }
    bottleneck = std::max(
        bottleneck, intercept + eta(t.required_agents, size, duration));
  }
  return {invalid, bottleneck};
}

namespace {

bool better(const std::pair<int, double>& a, const std::pair<int, double>& b) {
  if (a.first != b.first) return a.first < b.first;
  return a.second < b.second;
}

CoalitionScheme sanitize(const CoalitionScheme& scheme,
                         const std::vector<LocalAgentState>& team,
                         const std::vector<Subtask>& targets) {
  std::map<AgentId, const LocalAgentState*> by_id;
  for (const LocalAgentState& a : team) by_id[a.id] = &a;
  std::set<SubtaskId> target_ids;
  for (const Subtask& t : targets) target_ids.insert(t.id);

  CoalitionScheme clean;
  std::set<AgentId> placed;
  for (const auto& [sid, members] : scheme.coalitions) {
    if (!target_ids.count(sid)) continue;
    const Subtask& t = *std::find_if(targets.begin(), targets.end(),
                                     [&](const Subtask& s) { return s.id == sid; });
    std::vector<AgentId> kept;
    for (AgentId id : members) {
      if (!by_id.count(id) || placed.count(id)) continue;
      if (!by_id.at(id)->capabilities.count(t.action)) continue;
      kept.push_back(id);
      placed.insert(id);
    }
    std::sort(kept.begin(), kept.end());
    if (!kept.empty()) clean.coalitions[sid] = kept;
  }
  return clean;
}

// Applies "agent -> target (or none)" moves; returns the resulting scheme.
CoalitionScheme apply_moves(const CoalitionScheme& scheme,
                            const std::vector<std::pair<AgentId, SubtaskId>>& moves) {
  CoalitionScheme next = scheme;
  for (const auto& [agent, target] : moves) {
    for (auto& [sid, members] : next.coalitions)
      members.erase(std::remove(members.begin(), members.end(), agent),
                    members.end());
    if (target >= 0) {
      auto& members = next.coalitions[target];
      members.push_back(agent);
      std::sort(members.begin(), members.end());
    }
  }
  for (auto it = next.coalitions.begin(); it != next.coalitions.end();)
    it = it->second.empty() ? next.coalitions.erase(it) : std::next(it);
  return next;
}

}  // namespace

CoalitionScheme dcf_round(const std::vector<LocalAgentState>& team,
                          const std::vector<Subtask>& targets,
                          CoalitionScheme scheme, const DurationParams& duration,
                          const LocalConfig& config) {
  for (const Subtask& t : targets) {
    int capable = 0;
    for (const LocalAgentState& a : team)
      if (a.capabilities.count(t.action)) ++capable;
    if (t.required_agents > std::min(capable, config.coalition_cap))
      throw LocalInfeasibleError("target " + std::to_string(t.id) +
                                 " can never be covered by this subteam");
  }

  CoalitionScheme current = sanitize(scheme, team, targets);
  auto cost = scheme_cost(current, team, targets, duration, config);

  std::vector<SubtaskId> choice_targets;  // -1 means "join no coalition"
  choice_targets.push_back(-1);
  for (const Subtask& t : targets) choice_targets.push_back(t.id);

  bool improved = true;
  int guard = 0;
  while (improved && guard++ < 100000) {
    improved = false;
    // Singleton moves, then joint moves of pairs, agents in id order.
    for (std::size_t i = 0; i < team.size() && !improved; ++i) {
      for (SubtaskId ti : choice_targets) {
        const CoalitionScheme next = apply_moves(current, {{team[i].id, ti}});
        if (next == current) continue;
        const auto c = scheme_cost(next, team, targets, duration, config);
        if (better(c, cost)) {
          current = next;
          cost = c;
          improved = true;
          break;
        }
      }
    }
    if (improved || config.k_stab < 2) continue;
    for (std::size_t i = 0; i < team.size() && !improved; ++i)
      for (std::size_t j = i + 1; j < team.size() && !improved; ++j)
        for (SubtaskId ti : choice_targets) {
          for (SubtaskId tj : choice_targets) {
            const CoalitionScheme next =
                apply_moves(current, {{team[i].id, ti}, {team[j].id, tj}});
            if (next == current) continue;
            const auto c = scheme_cost(next, team, targets, duration, config);
            if (better(c, cost)) {
              current = next;
              cost = c;
              improved = true;
              break;
            }
          }
          if (improved) break;
        }
  }
  return current;
}

std::optional<CoalitionScheme> on_subtask_complete(
    const std::vector<LocalAgentState>& team, std::vector<Subtask>& targets,
    CoalitionScheme scheme, SubtaskId completed, const DurationParams& duration,
    const LocalConfig& config) {
  targets.erase(std::remove_if(targets.begin(), targets.end(),
                               [&](const Subtask& t) { return t.id == completed; }),
                targets.end());
  scheme.coalitions.erase(completed);
  if (targets.empty()) return std::nullopt;
  return dcf_round(team, targets, std::move(scheme), duration, config);
}

// ===========================================================================
// Oracles
// ===========================================================================

namespace oracle {

namespace {

void check_bounds(const std::vector<LocalAgentState>& team,
                  const std::vector<Subtask>& targets) {
  if (team.size() > 6 || targets.size() > 4)
    throw OracleBoundsError("coalition oracle limited to 6 agents, 4 targets");
}

}  // namespace

bool kss_stable(const CoalitionScheme& scheme,
                const std::vector<LocalAgentState>& team,
                const std::vector<Subtask>& targets,
                const DurationParams& duration, const LocalConfig& config) {
  check_bounds(team, targets);
  const auto cost = scheme_cost(scheme, team, targets, duration, config);

  std::vector<SubtaskId> choices;
  choices.push_back(-1);
  for (const Subtask& t : targets) choices.push_back(t.id);

  const int n = static_cast<int>(team.size());
  std::vector<int> group;
  std::function<bool(int)> try_groups = [&](int start) -> bool {
    if (!group.empty()) {
      // Every joint reassignment of this group.
      std::vector<std::size_t> pick(group.size(), 0);
      while (true) {
        std::vector<std::pair<AgentId, SubtaskId>> moves;
        for (std::size_t g = 0; g < group.size(); ++g)
          moves.emplace_back(team[group[g]].id, choices[pick[g]]);
        const CoalitionScheme next = apply_moves(scheme, moves);
        if (!(next == scheme) &&
            better(scheme_cost(next, team, targets, duration, config), cost))
          return true;
        std::size_t g = 0;
        while (g < pick.size() && ++pick[g] == choices.size()) pick[g++] = 0;
        if (g == pick.size()) break;
      }
    }
    if (static_cast<int>(group.size()) >= config.k_stab) return false;
    for (int i = start; i < n; ++i) {
      group.push_back(i);
      if (try_groups(i + 1)) return true;
      group.pop_back();
    }
    return false;
  };
  return !try_groups(0);
}

std::pair<int, double> best_scheme_cost(const std::vector<LocalAgentState>& team,
                                        const std::vector<Subtask>& targets,
                                        const DurationParams& duration,
                                        const LocalConfig& config) {
  check_bounds(team, targets);
  std::pair<int, double> best{std::numeric_limits<int>::max(), kInf};
  std::vector<int> membership(team.size(), -1);
  std::function<void(std::size_t)> enumerate = [&](std::size_t i) {
    if (i == team.size()) {
      CoalitionScheme scheme;
      for (std::size_t a = 0; a < team.size(); ++a)
        if (membership[a] >= 0) {
          auto& m = scheme.coalitions[targets[membership[a]].id];
          m.push_back(team[a].id);
          std::sort(m.begin(), m.end());
        }
      const auto c = scheme_cost(scheme, team, targets, duration, config);
      if (better(c, best)) best = c;
      return;
    }
    for (int t = -1; t < static_cast<int>(targets.size()); ++t) {
      membership[i] = t;
      enumerate(i + 1);
    }
    membership[i] = -1;
  };
  enumerate(0);
  return best;
}

}  // namespace oracle

}  // namespace fleetplan
