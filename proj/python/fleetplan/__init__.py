"""Hierarchical multi-agent task planning and simulation."""

from fleetplan._core import (  # noqa: F401
    BottleneckSolution,
    DurationParams,
    FormationInfeasibleError,
    InfeasibleTeamError,
    LocalInfeasibleError,
    MalformedMissionError,
    MissionSpec,
    PrecedenceViolationError,
    Rect,
    Scenario,
    TaskGraph,
    ValidationError,
    Vec2,
    build_task_graph,
    eligible_tasks,
    eta,
    expand_template_mission,
    parse_mission,
    plan_round_json,
    run_scenario,
    solve_bottleneck,
)

__all__ = [
    "BottleneckSolution",
    "DurationParams",
    "FormationInfeasibleError",
    "InfeasibleTeamError",
    "LocalInfeasibleError",
    "MalformedMissionError",
    "MissionSpec",
    "PrecedenceViolationError",
    "Rect",
    "Scenario",
    "TaskGraph",
    "ValidationError",
    "Vec2",
    "build_task_graph",
    "eligible_tasks",
    "eta",
    "expand_template_mission",
    "parse_mission",
    "plan_round_json",
    "run_scenario",
    "solve_bottleneck",
]
