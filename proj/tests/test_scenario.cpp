#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ccbf/scenario.hpp"

using ccbf::AgentRole;
using ccbf::ConfigError;
using ccbf::ControllerKind;
using ccbf::ScenarioConfig;
using ccbf::load_scenario;
using ccbf::validate_initial_conditions;

namespace {

const std::string kScenarioDir = CCBF_SCENARIO_DIR;

// Writes `body` to a throwaway file and returns its path.
std::string temp_scenario(const std::string& name, const std::string& body) {
  const std::string path = "/tmp/ccbf_test_" + name + ".toml";
  std::ofstream(path) << body;
  return path;
}

const std::string kMinimal = R"(
[sim]
dt = 0.01
t_end = 5.0

[corridor]
b_l = 5.0
b_r = -5.0
interior = [0.0, 0.0]

[[agents]]
role = "controlled"
x = 0.0
y = 0.0
goal = [2.0, 0.0]
)";

}  // namespace

TEST_CASE("warehouse scenario loads with the documented shape") {
  const ScenarioConfig cfg = load_scenario(kScenarioDir + "/warehouse.toml");
  CHECK(cfg.agents.size() == 9);
  CHECK(cfg.controlled_ids() == std::vector<int>{0, 1, 2});
  CHECK(cfg.controller == ControllerKind::CcbfDecentralized);
  CHECK(cfg.dt == doctest::Approx(0.01));
  // speed + corridor + 8 collision constituents per controlled agent.
  CHECK(ccbf::constraint_names(0, cfg).size() == 10);
  CHECK_NOTHROW(validate_initial_conditions(cfg));
}

TEST_CASE("shipped scenarios all validate") {
  for (const char* name : {"warehouse.toml", "empty_field.toml", "pinch.toml"}) {
    const ScenarioConfig cfg = load_scenario(kScenarioDir + "/" + name);
    CHECK_NOTHROW(validate_initial_conditions(cfg));
  }
}

TEST_CASE("agent starting on a wall is rejected with the constraint name") {
  std::string body = kMinimal;
  const std::string path = temp_scenario(
      "on_wall", std::string(body).replace(body.find("y = 0.0"), 7, "y = 5.0"));
  try {
    load_scenario(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("corridor") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("nonpositive dt is rejected") {
  std::string body = kMinimal;
  body.replace(body.find("dt = 0.01"), 9, "dt = 0.0");
  const std::string path = temp_scenario("zero_dt", body);
  CHECK_THROWS_AS(load_scenario(path), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("overrides apply and echo into the resolved config") {
  const std::string path = kScenarioDir + "/warehouse.toml";
  const ScenarioConfig cfg =
      load_scenario(path, {"control.a_max = 3.5", "sim.seed = 7"});
  CHECK(cfg.bounds.a_max == doctest::Approx(3.5));
  CHECK(cfg.seed == 7);
  CHECK(cfg.echo.at("control.a_max") == "3.5");
  CHECK(cfg.echo.at("sim.seed") == "7");
}

TEST_CASE("string overrides work without TOML quoting") {
  const ScenarioConfig cfg = load_scenario(
      kScenarioDir + "/warehouse.toml", {"sim.controller=baseline_qp"});
  CHECK(cfg.controller == ControllerKind::BaselineQp);
}

TEST_CASE("unknown override keys are rejected") {
  CHECK_THROWS_AS(
      load_scenario(kScenarioDir + "/warehouse.toml", {"sim.dtt = 0.1"}),
      ConfigError);
  CHECK_THROWS_AS(
      load_scenario(kScenarioDir + "/warehouse.toml", {"no equals sign"}),
      ConfigError);
}

TEST_CASE("unknown root keys are rejected with a line number") {
  std::string body = kMinimal;
  body += "\n[cbf]\nspeed_cap = 2.0\n";
  const std::string path = temp_scenario("bad_key", body);
  try {
    load_scenario(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("cbf.speed_cap") != std::string::npos);
    CHECK(msg.find("line") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("TOML syntax errors carry the source line") {
  const std::string path =
      temp_scenario("syntax", "[sim]\ndt = 0.01\nt_end =\n");
  try {
    load_scenario(path);
    FAIL("expected ParseError");
  } catch (const ccbf::toml::ParseError& e) {
    CHECK(e.line == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("corridor requires an interior reference point") {
  std::string body = kMinimal;
  body.replace(body.find("interior = [0.0, 0.0]\n"), 22, "");
  const std::string path = temp_scenario("no_interior", body);
  CHECK_THROWS_AS(load_scenario(path), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("unknown controller name is rejected") {
  std::string body = kMinimal;
  body += "\n[sim]\ncontroller = \"mpc\"\n";
  const std::string path = temp_scenario("bad_controller", body);
  CHECK_THROWS_AS(load_scenario(path), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("agent roles and scripted fields parse") {
  const ScenarioConfig cfg = load_scenario(kScenarioDir + "/warehouse.toml");
  CHECK(cfg.agents[3].role == AgentRole::NonResponsiveMoving);
  CHECK(cfg.agents[3].cruise_speed == doctest::Approx(1.0));
  CHECK(cfg.agents[7].stop_point.has_value());
  CHECK(cfg.agents[7].hold == doctest::Approx(2.0));
}
