#include "fleetplan/scenario.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "fleetplan/sim.hpp"
#include "json.hpp"

namespace fleetplan {

using nlohmann::json;
namespace fs = std::filesystem;

Method method_from_string(const std::string& name) {
  if (name == "ours") return Method::ours;
  if (name == "inf_h") return Method::inf_h;
  if (name == "greedy") return Method::greedy;
  throw ValidationError("unknown method '" + name + "'");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::ours: return "ours";
    case Method::inf_h: return "inf_h";
    case Method::greedy: return "greedy";
  }
  return "ours";
}

// ---------------------------------------------------------------------------
// JSON <-> domain
// ---------------------------------------------------------------------------

namespace {

Rect rect_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4)
    throw ValidationError(what + " must be [x0,y0,x1,y1]");
  Rect r{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
         j[3].get<double>()};
  if (r.x1 < r.x0 || r.y1 < r.y0)
    throw ValidationError(what + " has negative extent");
  return r;
}

json rect_to(const Rect& r) { return json::array({r.x0, r.y0, r.x1, r.y1}); }

Vec2 vec_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2)
    throw ValidationError(what + " must be [x,y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json vec_to(const Vec2& v) { return json::array({v.x, v.y}); }

Subtask subtask_from(const json& j) {
  Subtask s;
  s.id = j.value("id", -1);
  s.required_agents = j.at("n").get<int>();
  s.action = j.at("action").get<std::string>();
  s.location = vec_from(j.at("location"), "subtask location");
  s.mobile = j.value("mobile", false);
  const double speed = j.value("speed", 0.0);
  if (s.mobile && speed > 0.0) s.velocity = {speed, 0.0};
  if (j.contains("velocity")) s.velocity = vec_from(j["velocity"], "velocity");
  s.state = j.value("initially_detected", true) ? SubtaskState::detected
                                                : SubtaskState::undetected;
  return s;
}

json subtask_to(const Subtask& s) {
  json j;
  j["id"] = s.id;
  j["n"] = s.required_agents;
  j["action"] = s.action;
  j["location"] = vec_to(s.location);
  j["mobile"] = s.mobile;
  j["speed"] = s.velocity.norm();
  j["velocity"] = vec_to(s.velocity);
  j["initially_detected"] = s.state != SubtaskState::undetected;
  return j;
}

TaskKind kind_from(const std::string& name) {
  if (name == "static_known") return TaskKind::static_known;
  if (name == "static_unknown") return TaskKind::static_unknown;
  if (name == "dynamic_known") return TaskKind::dynamic_known;
  throw ValidationError("unknown task kind '" + name + "'");
}

std::string kind_to(TaskKind kind) {
  switch (kind) {
    case TaskKind::static_known: return "static_known";
    case TaskKind::static_unknown: return "static_unknown";
    case TaskKind::dynamic_known: return "dynamic_known";
  }
  return "static_known";
}

CollabTask task_from(const json& j) {
  CollabTask t;
  t.id = j.at("id").get<int>();
  t.kind = kind_from(j.value("kind", "static_known"));
  t.region = rect_from(j.at("region"), "task region");
  if (j.contains("duration_params")) {
    t.duration.base_duration = j["duration_params"].value("d0", 10.0);
    t.duration.saturation = j["duration_params"].value("n_sat", 4);
  }
  int next_sub = t.id * 1000;
  for (const json& js : j.value("subtasks", json::array())) {
    Subtask s = subtask_from(js);
    if (s.id < 0) s.id = next_sub;
    next_sub = s.id + 1;
    t.subtasks.push_back(s);
  }
  if (t.subtasks.empty())
    throw ValidationError("task " + std::to_string(t.id) + " has no subtasks");
  return t;
}

json task_to(const CollabTask& t) {
  json j;
  j["id"] = t.id;
  j["kind"] = kind_to(t.kind);
  j["region"] = rect_to(t.region);
  j["duration_params"] = {{"d0", t.duration.base_duration},
                          {"n_sat", t.duration.saturation}};
  json subs = json::array();
  for (const Subtask& s : t.subtasks) subs.push_back(subtask_to(s));
  j["subtasks"] = subs;
  return j;
}

std::vector<std::pair<TaskId, TaskId>> pairs_from(const json& j,
                                                  const std::string& what) {
  std::vector<std::pair<TaskId, TaskId>> out;
  for (const json& p : j) {
    if (!p.is_array() || p.size() != 2)
      throw ValidationError(what + " entries must be [a,b]");
    out.emplace_back(p[0].get<int>(), p[1].get<int>());
  }
  return out;
}

json pairs_to(const std::vector<std::pair<TaskId, TaskId>>& pairs) {
  json j = json::array();
  for (const auto& [a, b] : pairs) j.push_back(json::array({a, b}));
  return j;
}

MissionSpec mission_from(const json& j) {
  MissionSpec spec;
  spec.mission.id = j.at("id").get<int>();
  spec.mission.release_time = j.value("release_time", 0.0);
  for (const json& jt : j.at("tasks")) {
    CollabTask t = task_from(jt);
    spec.mission.tasks.push_back(t.id);
    spec.tasks.push_back(std::move(t));
  }
  spec.mission.precedence = pairs_from(j.value("precedence", json::array()),
                                       "precedence");
  spec.mission.concurrence = pairs_from(j.value("concurrence", json::array()),
                                        "concurrence");
  return spec;
}

json mission_to(const MissionSpec& spec) {
  json j;
  j["id"] = spec.mission.id;
  j["release_time"] = spec.mission.release_time;
  json tasks = json::array();
  for (const CollabTask& t : spec.tasks) tasks.push_back(task_to(t));
  j["tasks"] = tasks;
  j["precedence"] = pairs_to(spec.mission.precedence);
  j["concurrence"] = pairs_to(spec.mission.concurrence);
  return j;
}

TemplateTask template_task_from(const json& j) {
  TemplateTask t;
  t.region = rect_from(j.at("region"), "template region");
  t.subtask_count = j.value("subtasks", 1);
  t.required_agents = j.value("n", 1);
  for (const json& a : j.at("actions")) t.actions.push_back(a.get<std::string>());
  if (t.actions.empty()) throw ValidationError("template task without actions");
  t.duration.base_duration = j.value("d0", 10.0);
  t.duration.saturation = j.value("n_sat", 4);
  t.unknown_fraction = j.value("unknown_fraction", 0.0);
  t.target_speed = j.value("target_speed", 0.0);
  return t;
}

json template_task_to(const TemplateTask& t) {
  json j;
  j["region"] = rect_to(t.region);
  j["subtasks"] = t.subtask_count;
  j["n"] = t.required_agents;
  j["actions"] = t.actions;
  j["d0"] = t.duration.base_duration;
  j["n_sat"] = t.duration.saturation;
  j["unknown_fraction"] = t.unknown_fraction;
  j["target_speed"] = t.target_speed;
  return j;
}

TemplateParams template_from(const json& j) {
  TemplateParams p;
  p.mission_id = j.at("mission_id").get<int>();
  p.release_time = j.value("release_time", -1.0);
  p.first_task_id = j.at("first_task_id").get<int>();
  p.first_subtask_id = j.value("first_subtask_id", p.first_task_id * 1000);
  p.layout_seed = j.value("layout_seed", 0);
  for (const json& t : j.value("delivery", json::array()))
    p.delivery.push_back(template_task_from(t));
  for (const json& t : j.value("surveillance", json::array()))
    p.surveillance.push_back(template_task_from(t));
  for (const json& t : j.value("capture", json::array()))
    p.capture.push_back(template_task_from(t));
  for (const json& c : j.value("concurrence", json::array())) {
    if (!c.is_array() || c.size() != 2)
      throw ValidationError("template concurrence entries must be [i,j]");
    p.concurrence_pairs.emplace_back(c[0].get<int>(), c[1].get<int>());
  }
  return p;
}

json template_to(const TemplateParams& p) {
  json j;
  j["mission_id"] = p.mission_id;
  j["release_time"] = p.release_time;
  j["first_task_id"] = p.first_task_id;
  j["first_subtask_id"] = p.first_subtask_id;
  j["layout_seed"] = p.layout_seed;
  json del = json::array(), surv = json::array(), cap = json::array();
  for (const TemplateTask& t : p.delivery) del.push_back(template_task_to(t));
  for (const TemplateTask& t : p.surveillance) surv.push_back(template_task_to(t));
  for (const TemplateTask& t : p.capture) cap.push_back(template_task_to(t));
  j["delivery"] = del;
  j["surveillance"] = surv;
  j["capture"] = cap;
  json conc = json::array();
  for (const auto& [a, b] : p.concurrence_pairs)
    conc.push_back(json::array({a, b}));
  j["concurrence"] = conc;
  return j;
}

}  // namespace

MissionSpec parse_mission_spec(const std::string& json_text) {
  return mission_from(json::parse(json_text));
}

TemplateParams parse_template_params(const std::string& json_text) {
  return template_from(json::parse(json_text));
}

std::string serialize_mission_spec(const MissionSpec& spec) {
  return mission_to(spec).dump(2);
}

Scenario parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario JSON parse error: ") + e.what());
  }

  Scenario s;
  s.workspace = rect_from(j.at("workspace"), "workspace");
  for (const json& jt : j.at("fleet")) {
    FleetType type;
    type.name = jt.at("name").get<std::string>();
    type.count = jt.at("count").get<int>();
    for (const json& c : jt.at("capabilities"))
      type.capabilities.insert(c.get<std::string>());
    type.base = vec_from(jt.at("base"), "fleet base");
    type.max_speed = jt.value("max_speed", 1.5);
    s.fleet.push_back(type);
  }
  for (const json& jm : j.value("missions", json::array()))
    s.missions.push_back(mission_from(jm));
  for (const json& jt : j.value("mission_templates", json::array()))
    s.templates.push_back(template_from(jt));
  s.release_mu = j.value("release_mu", 30.0);
  s.release_sigma = j.value("release_sigma", 10.0);

  if (j.contains("planner")) {
    const json& p = j["planner"];
    s.planner.horizon = p.value("horizon", 6);
    s.planner.unassigned_penalty = p.value("unassigned_penalty", 100.0);
    s.planner.redundancy = p.value("redundancy", 0.0);
    s.planner.prune_symmetric = p.value("prune_symmetric", true);
    s.planner.prune_dominated = p.value("prune_dominated", true);
    s.planner.per_slot_cap = p.value("per_slot_cap", 0);
    s.planner.k_max = p.value("k_max", 0);
    s.planner.node_budget = p.value("node_budget", 5000000L);
    s.planner.nav_speed = p.value("nav_speed", 1.5);
  }
  if (j.contains("localcoord")) {
    const json& p = j["localcoord"];
    s.local.batch_size = p.value("batch_size", 4);
    s.local.sensor_radius = p.value("sensor_radius", 3.0);
    s.local.cell_size = p.value("cell_size", 1.0);
    s.local.k_stab = p.value("k_stab", 2);
    s.local.coalition_cap = p.value("coalition_cap", 4);
    s.local.capture_radius = p.value("capture_radius", 1.0);
    s.local.exact_slots = p.value("exact_slots", 16);
  }
  if (j.contains("sim")) {
    const json& p = j["sim"];
    s.sim.dt = p.value("dt", 0.1);
    s.sim.alpha = p.value("alpha", 0.0);
    s.sim.seed = p.value("seed", std::uint64_t{1});
    s.sim.tick_budget = p.value("tick_budget", 60000L);
    s.sim.trace_stride = p.value("trace_stride", 10);
  }
  validate_scenario(s);
  return s;
}

std::string serialize_scenario(const Scenario& s) {
  json j;
  j["workspace"] = rect_to(s.workspace);
  json fleet = json::array();
  for (const FleetType& t : s.fleet) {
    json jt;
    jt["name"] = t.name;
    jt["count"] = t.count;
    jt["capabilities"] = t.capabilities;
    jt["base"] = vec_to(t.base);
    jt["max_speed"] = t.max_speed;
    fleet.push_back(jt);
  }
  j["fleet"] = fleet;
  json missions = json::array();
  for (const MissionSpec& m : s.missions) missions.push_back(mission_to(m));
  j["missions"] = missions;
  json templates = json::array();
  for (const TemplateParams& t : s.templates) templates.push_back(template_to(t));
  j["mission_templates"] = templates;
  j["release_mu"] = s.release_mu;
  j["release_sigma"] = s.release_sigma;
  j["planner"] = {{"horizon", s.planner.horizon},
                  {"unassigned_penalty", s.planner.unassigned_penalty},
                  {"redundancy", s.planner.redundancy},
                  {"prune_symmetric", s.planner.prune_symmetric},
                  {"prune_dominated", s.planner.prune_dominated},
                  {"per_slot_cap", s.planner.per_slot_cap},
                  {"k_max", s.planner.k_max},
                  {"node_budget", s.planner.node_budget},
                  {"nav_speed", s.planner.nav_speed}};
  j["localcoord"] = {{"batch_size", s.local.batch_size},
                     {"sensor_radius", s.local.sensor_radius},
                     {"cell_size", s.local.cell_size},
                     {"k_stab", s.local.k_stab},
                     {"coalition_cap", s.local.coalition_cap},
                     {"capture_radius", s.local.capture_radius},
                     {"exact_slots", s.local.exact_slots}};
  j["sim"] = {{"dt", s.sim.dt},
              {"alpha", s.sim.alpha},
              {"seed", s.sim.seed},
              {"tick_budget", s.sim.tick_budget},
              {"trace_stride", s.sim.trace_stride}};
  return j.dump(2);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

void validate_scenario(const Scenario& s) {
  if (s.fleet.empty()) throw ValidationError("fleet is empty");
  if (s.planner.horizon < 1) throw ValidationError("planner horizon must be >= 1");
  if (s.sim.dt <= 0) throw ValidationError("sim dt must be positive");
  if (s.sim.alpha < 0 || s.sim.alpha > 1)
    throw ValidationError("alpha must be in [0,1]");

  std::set<Action> fleet_actions;
  for (const FleetType& t : s.fleet) {
    if (t.count < 0) throw ValidationError("fleet count must be >= 0");
    if (t.max_speed <= 0) throw ValidationError("agent max_speed must be > 0");
    if (t.capabilities.empty())
      throw ValidationError("fleet type '" + t.name + "' has no capabilities");
    fleet_actions.insert(t.capabilities.begin(), t.capabilities.end());
  }

  std::vector<MissionSpec> specs = s.missions;
  for (const TemplateParams& p : s.templates)
    specs.push_back(expand_template_mission(p));

  std::set<TaskId> task_ids;
  std::set<SubtaskId> subtask_ids;
  std::set<MissionId> mission_ids;
  for (const MissionSpec& spec : specs) {
    if (!mission_ids.insert(spec.mission.id).second)
      throw ValidationError("duplicate mission id " +
                            std::to_string(spec.mission.id));
    for (const CollabTask& t : spec.tasks) {
      if (!task_ids.insert(t.id).second)
        throw ValidationError("duplicate task id " + std::to_string(t.id));
      if (!t.region.inside(s.workspace))
        throw ValidationError("task " + std::to_string(t.id) +
                              " region outside the workspace");
      for (const Subtask& st : t.subtasks) {
        if (!subtask_ids.insert(st.id).second)
          throw ValidationError("duplicate subtask id " + std::to_string(st.id));
        if (!t.region.contains(st.location))
          throw ValidationError("subtask " + std::to_string(st.id) +
                                " outside its task region");
        if (st.required_agents < 1)
          throw ValidationError("subtask requirement must be >= 1");
        if (!fleet_actions.count(st.action))
          throw ValidationError("no fleet type provides action '" + st.action +
                                "'");
      }
    }
    // Relations must stay within the mission and be acyclic; also reject a
    // concurrence pair connected by a precedence path (it could never start
    // simultaneously).
    std::vector<Mission> one{spec.mission};
    const TaskGraph g = build_task_graph(one, {});
    for (const auto& [a, b] : spec.mission.concurrence) {
      std::set<TaskId> reach{a};
      std::vector<TaskId> queue{a};
      while (!queue.empty()) {
        const TaskId cur = queue.back();
        queue.pop_back();
        for (const auto& [x, y] : g.precedence_edges)
          if (x == cur && reach.insert(y).second) queue.push_back(y);
      }
      std::set<TaskId> reach_b{b};
      std::vector<TaskId> queue_b{b};
      while (!queue_b.empty()) {
        const TaskId cur = queue_b.back();
        queue_b.pop_back();
        for (const auto& [x, y] : g.precedence_edges)
          if (x == cur && reach_b.insert(y).second) queue_b.push_back(y);
      }
      if (reach.count(b) || reach_b.count(a))
        throw ValidationError("concurrence pair (" + std::to_string(a) + "," +
                              std::to_string(b) + ") is ordered by precedence");
    }
  }
}

std::string scenario_hash(const Scenario& scenario) {
  const std::string text = serialize_scenario(scenario);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

// ---------------------------------------------------------------------------
// Run harness
// ---------------------------------------------------------------------------

RunReport run_one(const Scenario& scenario, Method method, std::uint64_t seed,
                  const std::string& out_dir) {
  const auto wall_start = std::chrono::steady_clock::now();
  const SimResult result = run_scenario(scenario, method, seed);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start)
          .count();

  RunReport report;
  report.scenario_hash = scenario_hash(scenario);
  report.method = method;
  report.seed = seed;
  report.metrics_json = result.metrics_json;
  report.wall_seconds = wall;
  report.success = result.metrics.success;

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    {
      std::ofstream f(fs::path(out_dir) / "metrics.json");
      f << result.metrics_json << "\n";
    }
    {
      std::ofstream f(fs::path(out_dir) / "trace.jsonl");
      for (const std::string& line : result.trace_lines) f << line << "\n";
    }
    {
      json j;
      j["scenario_hash"] = report.scenario_hash;
      j["method"] = to_string(method);
      j["seed"] = seed;
      j["metrics"] = json::parse(result.metrics_json);
      j["wall"] = {{"run_seconds", wall}};
      std::ofstream f(fs::path(out_dir) / "report.json");
      f << j.dump(2) << "\n";
    }
  }
  return report;
}

SweepResult sweep(const Scenario& scenario, const std::vector<Method>& methods,
                  const std::vector<std::uint64_t>& seeds,
                  const std::string& out_dir) {
  SweepResult result;
  struct Cell {
    Method method;
    std::uint64_t seed;
    RunReport report;
    bool failed_to_run = false;
  };
  std::vector<Cell> cells;
  for (Method m : methods)
    for (std::uint64_t s : seeds) cells.push_back({m, s, {}, false});

  int workers = 1;
  if (const char* env = std::getenv("FLEETPLAN_JOBS")) workers = std::atoi(env);
  workers = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));

  auto run_cell = [&](Cell& cell) {
    std::string dir;
    if (!out_dir.empty())
      dir = (fs::path(out_dir) /
             (to_string(cell.method) + "_seed" + std::to_string(cell.seed)))
                .string();
    try {
      cell.report = run_one(scenario, cell.method, cell.seed, dir);
    } catch (const std::exception&) {
      cell.failed_to_run = true;
    }
  };

  if (workers == 1) {
    for (Cell& cell : cells) run_cell(cell);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mutex;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&]() {
        while (true) {
          std::size_t mine;
          {
            std::lock_guard<std::mutex> lock(mutex);
            if (next >= cells.size()) return;
            mine = next++;
          }
          run_cell(cells[mine]);
        }
      });
    for (std::thread& t : pool) t.join();
  }

  // Aggregate one row per method, Table-style columns.
  std::ostringstream csv;
  csv << "method,seeds,n_agents,n_tasks,n_subtasks,alpha,resp_time_mean_s,"
         "resp_time_max_s,plan_time_avg_s,plan_time_max_s,plan_wall_avg_s,"
         "agents_T,agents_W,agents_X,success_rate\n";
  for (Method m : methods) {
    int n = 0, ok = 0;
    double resp_sum = 0, resp_max = 0, pt_avg = 0, pt_max = 0, wall_sum = 0;
    double at = 0, aw = 0, ax = 0;
    long n_agents = 0, n_tasks = 0, n_subtasks = 0;
    double alpha = 0;
    for (const Cell& cell : cells) {
      if (cell.method != m) continue;
      ++n;
      if (cell.failed_to_run) continue;
      const json metrics = json::parse(cell.report.metrics_json);
      if (metrics["success"].get<bool>()) ++ok;
      resp_sum += metrics["resp_time_s"].get<double>();
      resp_max = std::max(resp_max, metrics["resp_time_s"].get<double>());
      pt_avg += metrics["plan_time_avg_s"].get<double>();
      pt_max = std::max(pt_max, metrics["plan_time_max_s"].get<double>());
      wall_sum += cell.report.wall_seconds;
      at += metrics["agents_T"].get<double>();
      aw += metrics["agents_W"].get<double>();
      ax += metrics["agents_X"].get<double>();
      n_agents = metrics["n_agents"].get<long>();
      n_tasks = metrics["n_tasks"].get<long>();
      n_subtasks = metrics["n_subtasks"].get<long>();
      alpha = metrics["alpha"].get<double>();
    }
    const double denom = n > 0 ? n : 1;
    csv << to_string(m) << "," << n << "," << n_agents << "," << n_tasks << ","
        << n_subtasks << "," << alpha << "," << resp_sum / denom << ","
        << resp_max << "," << pt_avg / denom << "," << pt_max << ","
        << wall_sum / denom << "," << at / denom << "," << aw / denom << ","
        << ax / denom << "," << static_cast<double>(ok) / denom << "\n";
  }
  result.csv = csv.str();
  for (Cell& cell : cells) result.runs.push_back(std::move(cell.report));

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream f(fs::path(out_dir) / "aggregate.csv");
    f << result.csv;
  }
  return result;
}

}  // namespace fleetplan
