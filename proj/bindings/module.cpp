#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fleetplan/assign.hpp"
#include "fleetplan/formation.hpp"
#include "fleetplan/localcoord.hpp"
#include "fleetplan/model.hpp"
#include "fleetplan/optim.hpp"
#include "fleetplan/scenario.hpp"
#include "fleetplan/sim.hpp"

namespace py = pybind11;
using namespace fleetplan;

PYBIND11_MODULE(_core, m) {
  m.doc() = "hierarchical multi-agent task planning and simulation";

  py::register_exception<InfeasibleTeamError>(m, "InfeasibleTeamError");
  py::register_exception<MalformedMissionError>(m, "MalformedMissionError");
  py::register_exception<PrecedenceViolationError>(m, "PrecedenceViolationError");
  py::register_exception<FormationInfeasibleError>(m, "FormationInfeasibleError");
  py::register_exception<LocalInfeasibleError>(m, "LocalInfeasibleError");
  py::register_exception<ValidationError>(m, "ValidationError");

  py::class_<Vec2>(m, "Vec2")
      .def(py::init<double, double>(), py::arg("x") = 0.0, py::arg("y") = 0.0)
      .def_readwrite("x", &Vec2::x)
      .def_readwrite("y", &Vec2::y)
      .def("__repr__", [](const Vec2& v) {
        return "Vec2(" + std::to_string(v.x) + ", " + std::to_string(v.y) + ")";
      });

  py::class_<Rect>(m, "Rect")
      .def(py::init<double, double, double, double>(), py::arg("x0") = 0.0,
           py::arg("y0") = 0.0, py::arg("x1") = 0.0, py::arg("y1") = 0.0)
      .def_readwrite("x0", &Rect::x0)
      .def_readwrite("y0", &Rect::y0)
      .def_readwrite("x1", &Rect::x1)
      .def_readwrite("y1", &Rect::y1)
      .def("centroid", &Rect::centroid)
      .def("contains", &Rect::contains);

  py::class_<DurationParams>(m, "DurationParams")
      .def(py::init<double, int>(), py::arg("base_duration") = 10.0,
           py::arg("saturation") = 4)
      .def_readwrite("base_duration", &DurationParams::base_duration)
      .def_readwrite("saturation", &DurationParams::saturation);

  m.def(
      "eta",
      [](int required, int team_size, double d0, int n_sat) {
        return eta(required, team_size, DurationParams{d0, n_sat});
      },
      py::arg("required_agents"), py::arg("team_size"), py::arg("d0"),
      py::arg("n_sat"),
      "Duration of a subtask when team_size agents serve it");

  // Missions arrive as poset JSON documents; the task graph and eligibility
  // queries are exposed directly.
  py::class_<TaskGraph>(m, "TaskGraph")
      .def_readonly("nodes", &TaskGraph::nodes)
      .def_readonly("precedence_edges", &TaskGraph::precedence_edges)
      .def_readonly("concurrence_groups", &TaskGraph::concurrence_groups)
      .def("predecessors", &TaskGraph::predecessors);

  py::class_<MissionSpec>(m, "MissionSpec")
      .def_property_readonly(
          "id", [](const MissionSpec& s) { return s.mission.id; })
      .def_property_readonly(
          "task_ids", [](const MissionSpec& s) { return s.mission.tasks; })
      .def_property_readonly(
          "precedence",
          [](const MissionSpec& s) { return s.mission.precedence; })
      .def_property_readonly(
          "concurrence",
          [](const MissionSpec& s) { return s.mission.concurrence; })
      .def("to_json", &serialize_mission_spec);

  m.def("parse_mission", &parse_mission_spec, py::arg("json_text"),
        "Parse a mission poset document");
  m.def(
      "build_task_graph",
      [](const std::vector<MissionSpec>& specs,
         const std::set<TaskId>& completed) {
        std::vector<Mission> missions;
        for (const MissionSpec& s : specs) missions.push_back(s.mission);
        return build_task_graph(missions, completed);
      },
      py::arg("missions"), py::arg("completed") = std::set<TaskId>{});
  m.def("eligible_tasks", &eligible_tasks, py::arg("graph"),
        py::arg("executing") = std::set<TaskId>{});

  m.def(
      "expand_template_mission",
      [](const std::string& params_json) {
        return expand_template_mission(parse_template_params(params_json));
      },
      py::arg("params_json"),
      "Expand a delivery/surveillance/capture template into a mission");

  // Bottleneck assignment.
  py::class_<BottleneckSolution>(m, "BottleneckSolution")
      .def_readonly("feasible", &BottleneckSolution::feasible)
      .def_readonly("bottleneck", &BottleneckSolution::bottleneck)
      .def_readonly("total_cost", &BottleneckSolution::total_cost)
      .def_readonly("slot_of_agent", &BottleneckSolution::slot_of_agent)
      .def_readonly("blocking_slot", &BottleneckSolution::blocking_slot)
      .def_readonly("blocking_action", &BottleneckSolution::blocking_action);

  m.def(
      "solve_bottleneck",
      [](const std::vector<std::set<Action>>& capabilities,
         const std::vector<std::map<Action, int>>& demands,
         const std::vector<std::vector<double>>& cost) {
        BottleneckProblem p;
        p.n_agents = static_cast<int>(capabilities.size());
        p.capabilities = capabilities;
        for (const auto& d : demands) p.slots.push_back({d});
        p.cost = cost;
        p.eligible.assign(p.n_agents,
                          std::vector<std::uint8_t>(p.slots.size(), 1));
        return solve_bottleneck(p);
      },
      py::arg("capabilities"), py::arg("demands"), py::arg("cost"),
      "Constrained min-max assignment of agents to slots");

  // Scenario-level entry points.
  py::class_<Scenario>(m, "Scenario")
      .def_static("from_json", &parse_scenario)
      .def_static("from_file", &load_scenario)
      .def("to_json", &serialize_scenario)
      .def("hash", &scenario_hash);

  m.def(
      "run_scenario",
      [](const Scenario& scenario, const std::string& method,
         std::uint64_t seed) {
        const SimResult r =
            run_scenario(scenario, method_from_string(method), seed);
        py::dict out;
        out["metrics_json"] = r.metrics_json;
        out["success"] = r.metrics.success;
        out["resp_time_s"] = r.metrics.average_response();
        out["trace"] = r.trace_lines;
        return out;
      },
      py::arg("scenario"), py::arg("method") = "ours", py::arg("seed") = 1,
      "Run a scenario and return metrics plus the event trace");

  m.def(
      "plan_round_json",
      [](const Scenario& scenario, const std::string& method,
         std::uint64_t seed) {
        World w = make_world(scenario, method_from_string(method), seed);
        // One boundary step: releases t=0 missions and plans them.
        tick(w);
        py::list subteams;
        for (const Subteam& s : w.subteams) {
          if (s.dissolved) continue;
          py::dict d;
          d["members"] = s.members;
          d["sequence"] = s.sequence;
          subteams.append(d);
        }
        return subteams;
      },
      py::arg("scenario"), py::arg("method") = "ours", py::arg("seed") = 1,
      "First planning round: subteams with members and task sequences");
}
