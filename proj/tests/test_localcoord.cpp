#include <random>

#include "doctest.h"
#include "fleetplan/localcoord.hpp"
#include "generators.hpp"

using namespace fleetplan;

namespace {

LocalAgentState member(AgentId id, Vec2 pos, std::set<Action> caps = {"a"},
                       double speed = 1.5) {
  return {id, pos, 0.0, speed, std::move(caps)};
}

Subtask point_subtask(SubtaskId id, Vec2 at, int n, const Action& act = "a") {
  Subtask s;
  s.id = id;
  s.required_agents = n;
  s.action = act;
  s.location = at;
  return s;
}

}  // namespace

TEST_CASE("synchronized arrival sets the service start") {
  // Two agents nine meters out; service needs both, then takes six seconds.
  std::vector<LocalAgentState> team{member(0, {0, 0}), member(1, {18, 0})};
  std::vector<Subtask> subtasks{point_subtask(1, {9, 0}, 2)};
  const RoutePlan plan =
      plan_subtask_routes(team, subtasks, DurationParams{6.0, 2}, LocalConfig{});
  CHECK(plan.start_time.at(1) == doctest::Approx(6.0));
  CHECK(plan.end_time.at(1) == doctest::Approx(12.0));
  CHECK(plan.makespan == doctest::Approx(12.0));
}

TEST_CASE("symmetric split of independent subtasks") {
  std::vector<LocalAgentState> team{member(0, {0, 0}), member(1, {10, 0})};
  std::vector<Subtask> subtasks{point_subtask(1, {0, 3}, 1),
                                point_subtask(2, {10, 3}, 1)};
  const RoutePlan plan =
      plan_subtask_routes(team, subtasks, DurationParams{4.0, 1}, LocalConfig{});
  CHECK(plan.crews.at(1) == std::vector<AgentId>{0});
  CHECK(plan.crews.at(2) == std::vector<AgentId>{1});
  CHECK(plan.makespan == doctest::Approx(3.0 / 1.5 + 4.0));
}

TEST_CASE("routing matches the exhaustive optimum") {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 15; ++trial) {
    const testgen::RoutingInstance inst = testgen::gen_routing(rng);
    const RoutePlan plan =
        plan_subtask_routes(inst.team, inst.subtasks, inst.duration, LocalConfig{});
    std::vector<oracle::RoutingAgent> oracle_team;
    for (const auto& a : inst.team)
      oracle_team.push_back({a.id, a.position, a.free_time, a.max_speed,
                             a.capabilities});
    std::vector<oracle::RoutingSubtask> oracle_subs;
    for (const auto& s : inst.subtasks)
      oracle_subs.push_back({s.id, s.required_agents, s.action, s.location});
    const double expected =
        oracle::routing_optimum(oracle_team, oracle_subs, inst.duration);
    CHECK(plan.makespan == expected);
  }
}

TEST_CASE("routing raises when a requirement exceeds the capable count") {
  std::vector<LocalAgentState> team{member(0, {0, 0}, {"a"}),
                                    member(1, {1, 0}, {"b"})};
  std::vector<Subtask> subtasks{point_subtask(1, {2, 0}, 2, "a")};
  CHECK_THROWS_AS(
      plan_subtask_routes(team, subtasks, DurationParams{2.0, 2}, LocalConfig{}),
      LocalInfeasibleError);
}

TEST_CASE("exploration marks cells, detects, and builds frontiers") {
  CollabTask task;
  task.id = 1;
  task.region = {0, 0, 10, 10};
  task.kind = TaskKind::static_unknown;
  task.subtasks = {point_subtask(1, {2, 2}, 1), point_subtask(2, {9, 9}, 1)};
  task.subtasks[0].state = SubtaskState::undetected;
  task.subtasks[1].state = SubtaskState::undetected;

  SUBCASE("full coverage detects everything at once") {
    OccupancyGrid grid(task.region, 1.0);
    const auto found = explore_step(grid, {{5, 5}}, 10.0, task);
    CHECK(found.size() == 2);
    CHECK(grid.fully_visited());
    CHECK(frontier_waypoints(grid).empty());
  }

  SUBCASE("half coverage leaves the far half undetected") {
    OccupancyGrid grid(task.region, 1.0);
    const auto found = explore_step(grid, {{2, 2}}, 3.0, task);
    CHECK(found == std::vector<SubtaskId>{1});
    CHECK(task.subtasks[1].state == SubtaskState::undetected);
    CHECK(!grid.fully_visited());
    CHECK(!frontier_waypoints(grid).empty());
  }

  SUBCASE("frontier is the boundary arc of the visited disk") {
    OccupancyGrid grid(task.region, 1.0);
    CollabTask empty_task;
    empty_task.region = task.region;
    explore_step(grid, {{0.5, 0.5}}, 2.0, empty_task);
    // Recompute the frontier definition independently.
    std::set<std::pair<int, int>> expected;
    for (int iy = 0; iy < grid.ny; ++iy)
      for (int ix = 0; ix < grid.nx; ++ix) {
        if (grid.cell_visited(ix, iy)) continue;
        const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int jx = ix + dx[d], jy = iy + dy[d];
          if (jx >= 0 && jx < grid.nx && jy >= 0 && jy < grid.ny &&
              grid.cell_visited(jx, jy))
            expected.insert({ix, iy});
        }
      }
    CHECK(!expected.empty());
    // Every waypoint must sit on the centroid of some frontier cluster, and
    // the clusters partition exactly the expected cells.
    const auto waypoints = frontier_waypoints(grid);
    CHECK(!waypoints.empty());
    for (const Vec2& wp : waypoints) {
      bool near_frontier = false;
      for (const auto& [ix, iy] : expected)
        if (distance(wp, grid.cell_center(ix, iy)) <= 3.0) near_frontier = true;
      CHECK(near_frontier);
    }
  }
}

TEST_CASE("sec rounds prefer collaborative subtasks over waypoints") {
  CollabTask task;
  task.id = 1;
  task.region = {0, 0, 10, 10};
  task.kind = TaskKind::static_unknown;
  task.duration = {4.0, 2};

  SUBCASE("exploration-only round sends agents to nearest waypoints") {
    OccupancyGrid grid(task.region, 1.0);
    task.subtasks = {point_subtask(1, {9, 9}, 1)};
    task.subtasks[0].state = SubtaskState::undetected;
    explore_step(grid, {{1, 1}}, 2.0, task);
    const SubtaskPool pool = build_pool(grid, task);
    CHECK(pool.collaborative.empty());
    CHECK(pool.exploration_waypoints.size() >= 1);

    std::vector<LocalAgentState> idle{member(0, {1, 1}), member(1, {2, 1})};
    const SecRound round = plan_sec_round(idle, task, pool, grid, LocalConfig{});
    CHECK(!round.complete);
    CHECK(round.routes.crews.empty());
    CHECK(round.explorers.size() == std::min<std::size_t>(
                                        2, pool.exploration_waypoints.size()));
  }

  SUBCASE("detected subtask takes two agents, third explores") {
    OccupancyGrid grid(task.region, 1.0);
    task.subtasks = {point_subtask(1, {2, 2}, 2)};
    task.subtasks[0].state = SubtaskState::detected;
    explore_step(grid, {{1, 1}}, 2.0, task);
    const SubtaskPool pool = build_pool(grid, task);
    REQUIRE(pool.collaborative == std::vector<SubtaskId>{1});

    std::vector<LocalAgentState> idle{member(0, {1, 1}), member(1, {2, 1}),
                                      member(2, {3, 1})};
    const SecRound round = plan_sec_round(idle, task, pool, grid, LocalConfig{});
    REQUIRE(round.routes.crews.count(1));
    CHECK(round.routes.crews.at(1).size() == 2);
    CHECK(round.explorers.size() == 1);
  }

  SUBCASE("explored region with everything done reports completion") {
    OccupancyGrid grid(task.region, 1.0);
    task.subtasks = {point_subtask(1, {2, 2}, 1)};
    task.subtasks[0].state = SubtaskState::done;
    explore_step(grid, {{5, 5}}, 20.0, task);
    const SubtaskPool pool = build_pool(grid, task);
    const SecRound round = plan_sec_round({}, task, pool, grid, LocalConfig{});
    CHECK(round.complete);
  }
}

TEST_CASE("dcf converges to the uncrossed pairing") {
  // Crossed assignment costs 9 in intercept bottleneck; uncrossed costs 4.
  std::vector<LocalAgentState> team{member(0, {0, 0}, {"capture"}, 1.0),
                                    member(1, {10, 0}, {"capture"}, 1.0)};
  std::vector<Subtask> targets{point_subtask(1, {3, 0}, 1, "capture"),
                               point_subtask(2, {13, 0}, 1, "capture")};
  const DurationParams duration{1.0, 1};
  LocalConfig cfg;

  CoalitionScheme crossed;
  crossed.coalitions[1] = {1};
  crossed.coalitions[2] = {0};
  const auto crossed_cost = scheme_cost(crossed, team, targets, duration, cfg);
  CHECK(crossed_cost.second == doctest::Approx(14.0));

  const CoalitionScheme converged =
      dcf_round(team, targets, crossed, duration, cfg);
  CHECK(converged.coalitions.at(1) == std::vector<AgentId>{0});
  CHECK(converged.coalitions.at(2) == std::vector<AgentId>{1});
  const auto best = oracle::best_scheme_cost(team, targets, duration, cfg);
  CHECK(scheme_cost(converged, team, targets, duration, cfg).second ==
        doctest::Approx(best.second));
}

TEST_CASE("single-move stability holds at k_stab=1") {
  std::mt19937 rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    testgen::DcfInstance inst = testgen::gen_dcf(rng);
    inst.config.k_stab = 1;
    const CoalitionScheme scheme = dcf_round(inst.team, inst.targets, {},
                                             inst.duration, inst.config);
    CHECK(oracle::kss_stable(scheme, inst.team, inst.targets, inst.duration,
                             inst.config));
  }
}

TEST_CASE("empty target list yields an empty scheme") {
  const CoalitionScheme scheme =
      dcf_round({member(0, {0, 0}, {"capture"})}, {}, {}, {2.0, 2}, {});
  CHECK(scheme.coalitions.empty());
}

TEST_CASE("dcf raises when a target can never be covered") {
  std::vector<LocalAgentState> team{member(0, {0, 0}, {"capture"})};
  std::vector<Subtask> targets{point_subtask(1, {1, 0}, 2, "capture")};
  CHECK_THROWS_AS(dcf_round(team, targets, {}, {2.0, 2}, {}),
                  LocalInfeasibleError);
}

TEST_CASE("on_subtask_complete frees the coalition and reconverges") {
  std::vector<LocalAgentState> team{member(0, {0, 0}, {"capture"}),
                                    member(1, {5, 0}, {"capture"}),
                                    member(2, {10, 0}, {"capture"})};
  std::vector<Subtask> targets{point_subtask(1, {1, 0}, 1, "capture"),
                               point_subtask(2, {6, 0}, 1, "capture"),
                               point_subtask(3, {11, 0}, 1, "capture")};
  const DurationParams duration{2.0, 2};
  LocalConfig cfg;
  CoalitionScheme scheme = dcf_round(team, targets, {}, duration, cfg);
  REQUIRE(scheme.coalitions.size() == 3);

  auto next = on_subtask_complete(team, targets, scheme, 2, duration, cfg);
  REQUIRE(next.has_value());
  CHECK(targets.size() == 2);
  CHECK(!next->coalitions.count(2));

  next = on_subtask_complete(team, targets, *next, 1, duration, cfg);
  REQUIRE(next.has_value());
  next = on_subtask_complete(team, targets, *next, 3, duration, cfg);
  CHECK(!next.has_value());  // task complete
}
