// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "fleetplan/assign.hpp"
#include "fleetplan/localcoord.hpp"
#include "fleetplan/optim.hpp"
#include "fleetplan/scenario.hpp"
#include "fleetplan/sim.hpp"
#include "generators.hpp"
#include "json.hpp"

using namespace fleetplan;
using nlohmann::json;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", id,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// --------------------------------------------------------------------------

void criterion_1_assignment_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(20260809);
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const testgen::AssignInstance inst = testgen::gen_assign_instance(rng);
    const Assignment a = plan_round(inst.graph, inst.tasks, inst.fleet,
                                    inst.executing, inst.anchor, inst.clock,
                                    inst.config);
    const double score =
        evaluate_assignment(a, inst.graph, inst.tasks, inst.config);
    const double expected = oracle::plan_round_optimum(
        inst.graph, inst.tasks, inst.fleet, inst.executing, inst.anchor,
        inst.clock, inst.config);
    if (score != expected) ++mismatches;
  }
  const double elapsed = seconds_since(t0);
  report(1, "assignment search equals brute force on 50 instances",
         mismatches == 0 && elapsed < 60.0,
         std::to_string(mismatches) + " mismatches, " +
             std::to_string(elapsed) + " s");
}

void criterion_2_formation_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(4242);
  int mismatches = 0, done = 0;
  while (done < 50) {
    const BottleneckProblem p = testgen::gen_bottleneck(rng);
    if (p.n_agents > 8 || p.slots.size() > 3) continue;
    ++done;
    const auto sol = solve_bottleneck(p);
    const double expected = oracle::bottleneck_optimum(p);
    if (std::isinf(expected)) {
      if (sol.feasible) ++mismatches;
    } else if (!sol.feasible || sol.bottleneck != expected) {
      ++mismatches;
    }
  }
  const double elapsed = seconds_since(t0);
  report(2, "subteam formation equals exhaustive bottleneck on 50 instances",
         mismatches == 0 && elapsed < 30.0,
         std::to_string(mismatches) + " mismatches, " +
             std::to_string(elapsed) + " s");
}

void criterion_3_routing_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(11037);
  int mismatches = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const testgen::RoutingInstance inst = testgen::gen_routing(rng);
    const RoutePlan plan = plan_subtask_routes(inst.team, inst.subtasks,
                                               inst.duration, LocalConfig{});
    std::vector<oracle::RoutingAgent> team;
    for (const auto& a : inst.team)
      team.push_back({a.id, a.position, a.free_time, a.max_speed,
                      a.capabilities});
    std::vector<oracle::RoutingSubtask> subs;
    for (const auto& s : inst.subtasks)
      subs.push_back({s.id, s.required_agents, s.action, s.location});
    const double expected = oracle::routing_optimum(team, subs, inst.duration);
    if (plan.makespan != expected) ++mismatches;
  }
  const double elapsed = seconds_since(t0);
  report(3, "static/known routing equals enumeration on 30 instances",
         mismatches == 0 && elapsed < 60.0,
         std::to_string(mismatches) + " mismatches, " +
             std::to_string(elapsed) + " s");
}

void criterion_4_kss_stability() {
  std::mt19937 rng(7177);
  int violations = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const testgen::DcfInstance inst = testgen::gen_dcf(rng);
    const CoalitionScheme scheme =
        dcf_round(inst.team, inst.targets, {}, inst.duration, inst.config);
    if (!oracle::kss_stable(scheme, inst.team, inst.targets, inst.duration,
                            inst.config))
      ++violations;
  }
  report(4, "converged coalition schemes admit no deviation of size <= 2",
         violations == 0, std::to_string(violations) + " violations");
}

struct ScaledRun {
  json metrics;
  std::vector<std::string> trace;
};

std::vector<ScaledRun> run_scaled(const Scenario& scenario, Method method,
                                  int seeds, double alpha = -1.0) {
  std::vector<ScaledRun> runs;
  for (int seed = 1; seed <= seeds; ++seed) {
    Scenario s = scenario;
    if (alpha >= 0) s.sim.alpha = alpha;
    const SimResult r = run_scenario(s, method, seed);
    runs.push_back({json::parse(r.metrics_json), r.trace_lines});
  }
  return runs;
}

void criterion_5_and_10(const Scenario& scaled) {
  const std::vector<ScaledRun> runs = run_scaled(scaled, Method::ours, 20);
  int violation_total = 0;
  int unsuccessful = 0;
  int metric_mismatches = 0;
  for (const ScaledRun& run : runs) {
    if (!run.metrics["success"].get<bool>()) ++unsuccessful;
    for (const auto& [name, count] : run.metrics["violations"].items())
      violation_total += count.get<int>();

    // Criterion 10: recompute the average response from the trace events.
    double sum = 0.0;
    int missions = 0;
    for (const std::string& line : run.trace) {
      const json ev = json::parse(line);
      if (ev["ev"] == "mission_done") {
        sum += ev["finish_time"].get<double>() - ev["release_time"].get<double>();
        ++missions;
      }
    }
    const double recomputed = missions > 0 ? sum / missions : 0.0;
    if (recomputed != run.metrics["resp_time_s"].get<double>())
      ++metric_mismatches;
  }
  report(5, "20-seed scaled sweep holds every invariant",
         violation_total == 0 && unsuccessful == 0,
         std::to_string(violation_total) + " violations, " +
             std::to_string(unsuccessful) + " failed runs");
  report(10, "reported response equals the trace-recomputed objective",
         metric_mismatches == 0,
         std::to_string(metric_mismatches) + " mismatching runs");
}

void criterion_6_baseline_ordering(const Scenario& scaled) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<ScaledRun> ours = run_scaled(scaled, Method::ours, 20);
  const std::vector<ScaledRun> greedy = run_scaled(scaled, Method::greedy, 20);
  int resp_wins = 0, travel_wins = 0;
  for (int i = 0; i < 20; ++i) {
    if (ours[i].metrics["resp_time_s"].get<double>() <=
        greedy[i].metrics["resp_time_s"].get<double>())
      ++resp_wins;
    if (greedy[i].metrics["agents_T"].get<double>() >
        ours[i].metrics["agents_T"].get<double>())
      ++travel_wins;
  }
  const double elapsed = seconds_since(t0);
  report(6, "receding horizon beats greedy on response and travel",
         resp_wins >= 14 && travel_wins >= 14 && elapsed < 600.0,
         "response <= greedy in " + std::to_string(resp_wins) +
             "/20 seeds, greedy travels more in " + std::to_string(travel_wins) +
             "/20 seeds, " + std::to_string(elapsed) + " s");
}

void criterion_7_inf_h_blowup(const Scenario& wide) {
  const SimResult ours = run_scenario(wide, Method::ours, 1);
  const SimResult infh = run_scenario(wide, Method::inf_h, 1);
  const json a = json::parse(ours.metrics_json);
  const json b = json::parse(infh.metrics_json);
  const long nodes_ours = a["planner_nodes"].get<long>();
  const long nodes_infh = b["planner_nodes"].get<long>();
  const bool budget_hit = b["planner_budget_hit"].get<bool>();
  report(7, "unbounded horizon blows up the search",
         nodes_infh >= 10 * nodes_ours || budget_hit,
         "ours " + std::to_string(nodes_ours) + " nodes, inf_h " +
             std::to_string(nodes_infh) + " nodes, budget_hit=" +
             (budget_hit ? "true" : "false"));
}

void criterion_8_failure_recovery(const Scenario& scaled) {
  Scenario s = scaled;
  s.planner.redundancy = 0.5;
  auto rate = [&](double alpha) {
    const std::vector<ScaledRun> runs = run_scaled(s, Method::ours, 20, alpha);
    int ok = 0;
    for (const ScaledRun& r : runs)
      if (r.metrics["success"].get<bool>()) ++ok;
    return ok / 20.0;
  };
  const double r0 = rate(0.0);
  const double r05 = rate(0.05);
  const double r10 = rate(0.10);
  report(8, "redundancy keeps success under failures",
         r0 == 1.0 && r05 >= r10,
         "success 100%/" + std::to_string(r05 * 100) + "%/" +
             std::to_string(r10 * 100) + "% at alpha 0/0.05/0.1");
}

void criterion_9_determinism(const Scenario& scaled) {
  int diverged = 0;
  const SimResult base_ours = run_scenario(scaled, Method::ours, 1);
  for (int rep = 1; rep < 10; ++rep)
    if (run_scenario(scaled, Method::ours, 1).metrics_json !=
        base_ours.metrics_json)
      ++diverged;
  const SimResult base_greedy = run_scenario(scaled, Method::greedy, 3);
  for (int rep = 1; rep < 10; ++rep)
    if (run_scenario(scaled, Method::greedy, 3).metrics_json !=
        base_greedy.metrics_json)
      ++diverged;
  report(9, "reruns produce byte-identical metrics, 10/10",
         diverged == 0, std::to_string(diverged) + " divergent reruns");
}

}  // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "data/scenarios";
  Scenario scaled, wide;
  try {
    scaled = load_scenario(dir + "/scaled.json");
    wide = load_scenario(dir + "/wide12.json");
  } catch (const std::exception& e) {
    std::cerr << "cannot load scenarios from " << dir << ": " << e.what()
              << "\n";
    return 2;
  }

  criterion_1_assignment_oracle();
  criterion_2_formation_oracle();
  criterion_3_routing_oracle();
  criterion_4_kss_stability();
  criterion_5_and_10(scaled);
  criterion_6_baseline_ordering(scaled);
  criterion_7_inf_h_blowup(wide);
  criterion_8_failure_recovery(scaled);
  criterion_9_determinism(scaled);

  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
