"""Smoke tests for the Python bindings."""

import json
import os

import pytest

import fleetplan as fp


def scenario_path(name):
    root = os.environ.get("FLEETPLAN_SCENARIOS")
    if root is None:
        root = os.path.join(os.path.dirname(__file__), "..", "..", "data", "scenarios")
    return os.path.join(root, name)


def test_eta_saturates():
    assert fp.eta(2, 2, 10.0, 4) == pytest.approx(10.0)
    assert fp.eta(2, 4, 10.0, 4) == pytest.approx(5.0)
    assert fp.eta(2, 8, 10.0, 4) == pytest.approx(5.0)
    with pytest.raises(fp.InfeasibleTeamError):
        fp.eta(3, 2, 10.0, 4)


def test_mission_graph_roundtrip():
    mission = fp.parse_mission(json.dumps({
        "id": 1,
        "release_time": 0.0,
        "tasks": [
            {"id": 1, "kind": "static_known", "region": [0, 0, 4, 4],
             "duration_params": {"d0": 5.0, "n_sat": 2},
             "subtasks": [{"id": 100, "n": 1, "action": "a", "location": [2, 2]}]},
            {"id": 2, "kind": "static_known", "region": [6, 0, 10, 4],
             "duration_params": {"d0": 5.0, "n_sat": 2},
             "subtasks": [{"id": 200, "n": 2, "action": "a", "location": [8, 2]}]},
        ],
        "precedence": [[1, 2]],
        "concurrence": [],
    }))
    graph = fp.build_task_graph([mission])
    assert graph.nodes == [1, 2]
    assert graph.predecessors(2) == [1]
    assert fp.eligible_tasks(graph) == {1}
    assert fp.eligible_tasks(graph, {1}) == {2}


def test_template_expansion_orders_stages():
    spec = fp.expand_template_mission(json.dumps({
        "mission_id": 9,
        "first_task_id": 0,
        "delivery": [{"region": [0, 0, 5, 5], "subtasks": 2, "n": 1,
                      "actions": ["deliver"], "d0": 5.0, "n_sat": 2}],
        "surveillance": [{"region": [6, 0, 11, 5], "subtasks": 2, "n": 1,
                          "actions": ["perceive"], "d0": 4.0, "n_sat": 2}],
        "capture": [],
    }))
    assert spec.task_ids == [0, 1]
    assert spec.precedence == [(0, 1)]


def test_bottleneck_diagonal():
    sol = fp.solve_bottleneck(
        capabilities=[{"a"}, {"a"}],
        demands=[{"a": 1}, {"a": 1}],
        cost=[[1.0, 9.0], [9.0, 1.0]],
    )
    assert sol.feasible
    assert sol.bottleneck == pytest.approx(1.0)
    assert sol.slot_of_agent == [0, 1]


def test_scenario_run_is_deterministic():
    scenario = fp.Scenario.from_file(scenario_path("scaled.json"))
    first = fp.run_scenario(scenario, method="ours", seed=1)
    second = fp.run_scenario(scenario, method="ours", seed=1)
    assert first["success"]
    assert first["metrics_json"] == second["metrics_json"]
    metrics = json.loads(first["metrics_json"])
    assert metrics["tasks_done"] == 8


def test_first_round_plans_subteams():
    scenario = fp.Scenario.from_file(scenario_path("scaled.json"))
    subteams = fp.plan_round_json(scenario, method="ours", seed=1)
    assert len(subteams) >= 2
    members = [m for team in subteams for m in team["members"]]
    assert len(members) == len(set(members))
