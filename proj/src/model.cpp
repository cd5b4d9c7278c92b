#include "fleetplan/model.hpp"

#include <algorithm>
#include <queue>

namespace fleetplan {

bool CollabTask::all_subtasks_done() const {
  return std::all_of(subtasks.begin(), subtasks.end(),
                     [](const Subtask& s) { return s.state == SubtaskState::done; });
}

std::map<Action, int> CollabTask::peak_requirements() const {
  std::map<Action, int> peak;
  for (const Subtask& s : subtasks) {
    int& cur = peak[s.action];
    cur = std::max(cur, s.required_agents);
  }
  return peak;
}

int CollabTask::max_required_agents() const {
  int m = 0;
  for (const Subtask& s : subtasks) m = std::max(m, s.required_agents);
  return m;
}

bool TaskGraph::contains(TaskId id) const {
  return std::binary_search(nodes.begin(), nodes.end(), id);
}

std::vector<TaskId> TaskGraph::predecessors(TaskId id) const {
  std::vector<TaskId> pre;
  for (const auto& [a, b] : precedence_edges)
    if (b == id) pre.push_back(a);
  return pre;
}

const std::vector<TaskId>* TaskGraph::group_of(TaskId id) const {
  for (const auto& group : concurrence_groups)
    if (std::binary_search(group.begin(), group.end(), id)) return &group;
  return nullptr;
}

double eta(int required_agents, int team_size, const DurationParams& params) {
  if (team_size < required_agents)
    throw InfeasibleTeamError("team of " + std::to_string(team_size) +
                              " cannot serve a subtask requiring " +
                              std::to_string(required_agents));
  const int effective = std::min(team_size, params.saturation);
  return params.base_duration * required_agents / static_cast<double>(effective);
}

namespace {

// Kahn's algorithm; returns false if the edge set has a cycle.
bool is_acyclic(const std::vector<TaskId>& nodes,
                const std::vector<std::pair<TaskId, TaskId>>& edges) {
  std::map<TaskId, int> indegree;
  std::map<TaskId, std::vector<TaskId>> out;
  for (TaskId n : nodes) indegree[n] = 0;
  for (const auto& [a, b] : edges) {
    out[a].push_back(b);
    indegree[b]++;
  }
  std::queue<TaskId> ready;
  for (const auto& [n, deg] : indegree)
    if (deg == 0) ready.push(n);
  std::size_t seen = 0;
  while (!ready.empty()) {
    TaskId n = ready.front();
    ready.pop();
    ++seen;
    for (TaskId m : out[n])
      if (--indegree[m] == 0) ready.push(m);
  }
  return seen == nodes.size();
}

}  // namespace

TaskGraph build_task_graph(const std::vector<Mission>& missions,
                           const std::set<TaskId>& completed) {
  TaskGraph graph;
  for (const Mission& m : missions) {
    std::set<TaskId> own(m.tasks.begin(), m.tasks.end());
    for (const auto& rel : {m.precedence, m.concurrence})
      for (const auto& [a, b] : rel)
        if (!own.count(a) || !own.count(b))
          throw MalformedMissionError("relation pair (" + std::to_string(a) + "," +
                                      std::to_string(b) + ") spans missions");
    for (TaskId t : m.tasks)
      if (!completed.count(t)) graph.nodes.push_back(t);
    for (const auto& [a, b] : m.precedence)
      if (!completed.count(a) && !completed.count(b))
        graph.precedence_edges.emplace_back(a, b);
  }
  std::sort(graph.nodes.begin(), graph.nodes.end());
  if (!is_acyclic(graph.nodes, graph.precedence_edges))
    throw MalformedMissionError("precedence relations contain a cycle");

  // Merge concurrence pairs into disjoint groups (union-find over task ids).
  std::map<TaskId, TaskId> parent;
  auto find = [&](TaskId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Mission& m : missions)
    for (const auto& [a, b] : m.concurrence) {
      if (completed.count(a) || completed.count(b)) continue;
      if (!parent.count(a)) parent[a] = a;
      if (!parent.count(b)) parent[b] = b;
      parent[find(a)] = find(b);
    }
  std::map<TaskId, std::vector<TaskId>> groups;
  for (const auto& [t, _] : parent) groups[find(t)].push_back(t);
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end());
    graph.concurrence_groups.push_back(members);
  }
  std::sort(graph.concurrence_groups.begin(), graph.concurrence_groups.end());
  return graph;
}

std::set<TaskId> eligible_tasks(const TaskGraph& graph,
                                const std::set<TaskId>& executing) {
  std::set<TaskId> single;
  for (TaskId n : graph.nodes) {
    if (executing.count(n)) continue;
    bool ready = true;
    for (TaskId p : graph.predecessors(n))
      if (graph.contains(p) && !executing.count(p)) {
        ready = false;
        break;
      }
    if (ready) single.insert(n);
  }
  // A concurrence group may only be started jointly.
  std::set<TaskId> result;
  for (TaskId n : single) {
    const auto* group = graph.group_of(n);
    if (!group) {
      result.insert(n);
      continue;
    }
    bool whole = true;
    for (TaskId g : *group)
      if (graph.contains(g) && !executing.count(g) && !single.count(g)) whole = false;
    if (whole) result.insert(n);
  }
  return result;
}

namespace {

// Deterministic placement hash (splitmix64).
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit(std::uint64_t h) {
  return static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53);
}

CollabTask make_template_task(const TemplateTask& spec, TaskKind kind, TaskId id,
                              SubtaskId& next_subtask, std::uint64_t seed) {
  CollabTask task;
  task.id = id;
  task.region = spec.region;
  task.duration = spec.duration;
  task.kind = kind;
  const double margin = 0.05;
  for (int j = 0; j < spec.subtask_count; ++j) {
    Subtask s;
    s.id = next_subtask++;
    s.required_agents = spec.required_agents;
    s.action = spec.actions[j % spec.actions.size()];
    const std::uint64_t hx = mix(seed ^ mix(static_cast<std::uint64_t>(id) * 1000 + j));
    const std::uint64_t hy = mix(hx);
    s.location.x = spec.region.x0 + (margin + (1 - 2 * margin) * unit(hx)) * spec.region.width();
    s.location.y = spec.region.y0 + (margin + (1 - 2 * margin) * unit(hy)) * spec.region.height();
    if (kind == TaskKind::static_unknown &&
        unit(mix(hy)) < spec.unknown_fraction)
      s.state = SubtaskState::undetected;
    if (kind == TaskKind::dynamic_known && spec.target_speed > 0) {
      s.mobile = true;
      const double ang = 2 * 3.14159265358979323846 * unit(mix(hx ^ 0x5bd1));
      s.velocity = {spec.target_speed * std::cos(ang), spec.target_speed * std::sin(ang)};
    }
    task.subtasks.push_back(s);
  }
  return task;
}

}  // namespace

MissionSpec expand_template_mission(const TemplateParams& params) {
  if (params.delivery.empty() && params.surveillance.empty() && params.capture.empty())
    throw MalformedMissionError("template mission has no tasks");

  MissionSpec spec;
  spec.mission.id = params.mission_id;
  spec.mission.release_time = params.release_time;

  TaskId next_task = params.first_task_id;
  SubtaskId next_subtask = params.first_subtask_id;
  std::vector<TaskId> dels, survs, caps;
  auto emit = [&](const std::vector<TemplateTask>& specs, TaskKind kind,
                  std::vector<TaskId>& ids) {
    for (const TemplateTask& t : specs) {
      CollabTask task = make_template_task(t, kind, next_task++, next_subtask,
                                           params.layout_seed);
      ids.push_back(task.id);
      spec.mission.tasks.push_back(task.id);
      spec.tasks.push_back(std::move(task));
    }
  };
  emit(params.delivery, TaskKind::static_known, dels);
  emit(params.surveillance, TaskKind::static_unknown, survs);
  emit(params.capture, TaskKind::dynamic_known, caps);

  for (TaskId d : dels)
    for (TaskId s : survs) spec.mission.precedence.emplace_back(d, s);
  for (TaskId s : survs)
    for (TaskId c : caps) spec.mission.precedence.emplace_back(s, c);

  auto layer = [&](int index) {
    if (index < static_cast<int>(dels.size())) return 0;
    if (index < static_cast<int>(dels.size() + survs.size())) return 1;
    return 2;
  };
  for (const auto& [a, b] : params.concurrence_pairs) {
    const int total = static_cast<int>(spec.mission.tasks.size());
    if (a < 0 || b < 0 || a >= total || b >= total || a == b)
      throw MalformedMissionError("concurrence pair index out of range");
    if (layer(a) != layer(b))
      throw MalformedMissionError(
          "concurrence pair spans ordered template stages");
    spec.mission.concurrence.emplace_back(spec.mission.tasks[a],
                                          spec.mission.tasks[b]);
  }
  return spec;
}

}  // namespace fleetplan
