// Command-line front end: run scenarios, validate configs, compare the
// baseline and C-CBF controllers, and Monte Carlo check the subset property.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "ccbf/sampling.hpp"
#include "ccbf/sim.hpp"

namespace fs = std::filesystem;

namespace {

bool verbose() {
  const char* v = std::getenv("CCBF_LOG");
  return v != nullptr && std::string(v) != "" && std::string(v) != "0";
}

int run_one(const std::string& scenario, const std::string& out_dir,
            const std::vector<std::string>& overrides) {
  ccbf::ScenarioConfig cfg;
  try {
    cfg = ccbf::load_scenario(scenario, overrides);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  if (verbose()) std::cerr << "running " << scenario << "\n";
  const ccbf::RunResult result = ccbf::run(cfg);
  fs::create_directories(out_dir);
  ccbf::write_trajectory_csv(out_dir + "/trajectory.csv", result.logs, cfg);
  ccbf::write_steps_jsonl(out_dir + "/steps.jsonl", result.logs);
  ccbf::write_summary_json(out_dir + "/summary.json", result.summary, cfg);
  if (!result.summary.completed) {
    std::cerr << "run terminated: " << result.summary.termination_reason
              << "\n";
    return 2;
  }
  if (!result.summary.safety_verdict) {
    std::cerr << "safety verdict false: " << result.summary.violation << "\n";
    return 3;
  }
  return 0;
}

nlohmann::json run_record(const std::string& scenario,
                          const std::string& controller,
                          const std::vector<std::string>& overrides) {
  nlohmann::json rec;
  rec["controller"] = controller;
  try {
    auto ov = overrides;
    ov.push_back("sim.controller=\"" + controller + "\"");
    const ccbf::ScenarioConfig cfg = ccbf::load_scenario(scenario, ov);
    const ccbf::RunResult result = ccbf::run(cfg);
    rec["completed"] = result.summary.completed;
    rec["safety_verdict"] = result.summary.safety_verdict;
    rec["min_h"] = result.summary.min_h;
    rec["min_h_table"] = result.summary.min_h_table;
    rec["min_pairwise_distance"] = result.summary.min_pairwise_distance;
    rec["qp_failures"] = result.summary.qp_failures;
    rec["infeasibility_step"] = result.summary.terminated_step;
    rec["termination_reason"] = result.summary.termination_reason;
    rec["goal_arrival"] = result.summary.goal_arrival;
  } catch (const std::exception& e) {
    rec["error"] = e.what();
  }
  return rec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consolidated-CBF multi-agent safety simulator"};
  app.require_subcommand(1);

  std::string scenario, out_dir = "out";
  std::vector<std::string> overrides;
  int samples = 10000;
  unsigned long seed = 1;

  auto add_common = [&](CLI::App* cmd, bool with_out) {
    cmd->add_option("scenario", scenario, "Scenario file (TOML)")
        ->required()
        ->check(CLI::ExistingFile);
    if (with_out) cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--set", overrides,
                    "Config override key=value (repeatable)");
  };

  CLI::App* cmd_run = app.add_subcommand("run", "Run a scenario and write "
                                                "trajectory.csv, steps.jsonl, "
                                                "summary.json");
  add_common(cmd_run, true);

  CLI::App* cmd_validate =
      app.add_subcommand("validate", "Load and validate a scenario config");
  add_common(cmd_validate, false);

  CLI::App* cmd_compare = app.add_subcommand(
      "compare", "Run baseline_qp and ccbf_decentralized side by side");
  add_common(cmd_compare, true);

  CLI::App* cmd_sample = app.add_subcommand(
      "sample-safety", "Monte Carlo check that H >= 0 implies every h_s > 0");
  add_common(cmd_sample, false);
  cmd_sample->add_option("--samples", samples, "Number of sampled states");
  cmd_sample->add_option("--seed", seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  if (cmd_run->parsed()) return run_one(scenario, out_dir, overrides);

  if (cmd_validate->parsed()) {
    try {
      ccbf::load_scenario(scenario, overrides);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 1;
    }
    std::cout << "ok\n";
    return 0;
  }

  if (cmd_compare->parsed()) {
    nlohmann::json cmp;
    cmp["scenario"] = scenario;
    cmp["runs"].push_back(run_record(scenario, "baseline_qp", overrides));
    cmp["runs"].push_back(
        run_record(scenario, "ccbf_decentralized", overrides));
    fs::create_directories(out_dir);
    std::ofstream out(out_dir + "/comparison.json");
    out << cmp.dump(2) << "\n";
    std::cout << cmp.dump(2) << "\n";
    return 0;
  }

  if (cmd_sample->parsed()) {
    ccbf::ScenarioConfig cfg;
    try {
      cfg = ccbf::load_scenario(scenario, overrides);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 1;
    }
    const auto report = ccbf::sample_safety(cfg, samples, seed);
    nlohmann::json j;
    j["samples"] = report.samples;
    j["inside_c"] = report.inside_c;
    j["violations"] = report.violations;
    std::cout << j.dump(2) << "\n";
    return report.violations == 0 ? 0 : 2;
  }
  return 0;
}
