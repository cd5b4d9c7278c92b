#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fleetplan/scenario.hpp"

namespace {

// Scalar overrides; flag names mirror the scenario JSON paths.
struct Overrides {
  double alpha = -1.0;
  double dt = -1.0;
  int horizon = -1;
  double redundancy = -1.0;
  long node_budget = -1;
  long tick_budget = -1;

  void apply(fleetplan::Scenario& scenario) const {
    if (alpha >= 0) scenario.sim.alpha = alpha;
    if (dt > 0) scenario.sim.dt = dt;
    if (horizon > 0) scenario.planner.horizon = horizon;
    if (redundancy >= 0) scenario.planner.redundancy = redundancy;
    if (node_budget > 0) scenario.planner.node_budget = node_budget;
    if (tick_budget > 0) scenario.sim.tick_budget = tick_budget;
  }
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--sim.alpha", o.alpha, "failure probability per task start");
  cmd->add_option("--sim.dt", o.dt, "simulation step, seconds");
  cmd->add_option("--sim.tick_budget", o.tick_budget, "tick budget");
  cmd->add_option("--planner.horizon", o.horizon, "assignment horizon H");
  cmd->add_option("--planner.redundancy", o.redundancy, "roster redundancy");
  cmd->add_option("--planner.node_budget", o.node_budget, "search node budget");
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const std::uint64_t lo = std::stoull(text.substr(0, dots));
    const std::uint64_t hi = std::stoull(text.substr(dots + 2));
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto comma = text.find(',', pos);
    const std::string piece =
        text.substr(pos, comma == std::string::npos ? std::string::npos
                                                    : comma - pos);
    if (!piece.empty()) seeds.push_back(std::stoull(piece));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical multi-agent task planner and simulator"};
  app.require_subcommand(1);

  std::string scenario_path, method_name = "ours", out_dir;
  std::uint64_t seed = 1;
  Overrides overrides;

  CLI::App* run = app.add_subcommand("run", "run one scenario");
  run->add_option("--scenario", scenario_path, "scenario JSON path")->required();
  run->add_option("--method", method_name, "ours|inf_h|greedy");
  run->add_option("--seed", seed, "RNG seed");
  run->add_option("--out", out_dir, "output directory");
  add_override_flags(run, overrides);

  std::string methods_text = "ours", seeds_text = "1";
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a method x seed grid");
  sweep_cmd->add_option("--scenario", scenario_path, "scenario JSON path")
      ->required();
  sweep_cmd->add_option("--methods", methods_text, "comma list: ours,inf_h,greedy");
  sweep_cmd->add_option("--seeds", seeds_text, "list 1,2,3 or range 1..20");
  sweep_cmd->add_option("--out", out_dir, "output directory");
  add_override_flags(sweep_cmd, overrides);

  CLI11_PARSE(app, argc, argv);

  try {
    fleetplan::Scenario scenario = fleetplan::load_scenario(scenario_path);
    overrides.apply(scenario);

    if (run->parsed()) {
      const fleetplan::RunReport report = fleetplan::run_one(
          scenario, fleetplan::method_from_string(method_name), seed, out_dir);
      std::cout << report.metrics_json << "\n";
      return report.success ? 0 : 1;
    }

    std::vector<fleetplan::Method> methods;
    std::size_t pos = 0;
    while (pos < methods_text.size()) {
      const auto comma = methods_text.find(',', pos);
      const std::string piece = methods_text.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      if (!piece.empty()) methods.push_back(fleetplan::method_from_string(piece));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    const std::vector<std::uint64_t> seeds = parse_seeds(seeds_text);
    if (methods.empty() || seeds.empty()) {
      std::cerr << "error: empty method or seed list\n";
      return 2;
    }
    const fleetplan::SweepResult result =
        fleetplan::sweep(scenario, methods, seeds, out_dir);
    std::cout << result.csv;
    for (const fleetplan::RunReport& r : result.runs)
      if (!r.success) return 1;
    return 0;
  } catch (const fleetplan::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
