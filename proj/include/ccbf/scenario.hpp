#ifndef CCBF_SCENARIO_HPP
#define CCBF_SCENARIO_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ccbf/adaptation.hpp"
#include "ccbf/constraints.hpp"
#include "ccbf/control.hpp"
#include "ccbf/toml.hpp"

namespace ccbf {

enum class AgentRole { Controlled, NonResponsiveMoving, NonResponsiveStatic };
enum class ControllerKind { CcbfDecentralized, CcbfCentralized, BaselineQp };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AgentSpec {
  AgentState initial;
  AgentRole role = AgentRole::Controlled;
  Eigen::Vector2d goal{0.0, 0.0};
  VehicleParams params;
  // Scripted profile for non-responsive movers.
  double cruise_speed = 1.0;
  double start_time = 0.0;
  std::optional<Eigen::Vector2d> stop_point;
  double stop_radius = 0.3;
  double hold = 2.0;
};

struct SampleBox {
  Eigen::Vector2d x{-5.0, 5.0}, y{-3.0, 3.0};
  Eigen::Vector2d psi{-M_PI, M_PI}, beta{-1.4, 1.4}, v{-0.5, 1.5};
};

struct ScenarioConfig {
  double dt = 0.01;
  double t_end = 40.0;
  ControllerKind controller = ControllerKind::CcbfDecentralized;
  unsigned long seed = 1;
  std::vector<AgentSpec> agents;
  ConstraintSetSpec cset;
  Eigen::Vector2d corridor_interior{0.0, 0.0};
  AdaptationParams adapt;
  ControlBounds bounds;
  double r = 1.0;
  double gamma_h = 1.0;
  double goal_tolerance = 0.25;
  double adapt_k_min_scalar = 0.01;  // broadcast to k_min per constraint count
  double adapt_mu0_scalar = 0.0;     // broadcast to the nominal kdot
  SampleBox sample_box;
  // Resolved scalar settings, echoed into summary.json for auditability.
  std::map<std::string, std::string> echo;

  std::vector<int> controlled_ids() const {
    std::vector<int> ids;
    for (int i = 0; i < static_cast<int>(agents.size()); ++i) {
      if (agents[i].role == AgentRole::Controlled) ids.push_back(i);
    }
    return ids;
  }
  std::vector<AgentState> initial_states() const {
    std::vector<AgentState> s;
    for (const auto& a : agents) s.push_back(a.initial);
    return s;
  }
  std::vector<VehicleParams> vehicle_params() const {
    std::vector<VehicleParams> p;
    for (const auto& a : agents) p.push_back(a.params);
    return p;
  }
};

/// Human-readable names for the fixed constituent ordering of one agent.
inline std::vector<std::string> constraint_names(int agent_id,
                                                 const ScenarioConfig& cfg) {
  std::vector<std::string> names{"speed"};
  if (cfg.cset.corridor) names.push_back("corridor");
  for (int j = 0; j < static_cast<int>(cfg.agents.size()); ++j) {
    if (j != agent_id) names.push_back("collision_vs_" + std::to_string(j));
  }
  return names;
}

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "sim.dt", "sim.t_end", "sim.controller", "sim.seed",
      "sim.goal_tolerance",
      "corridor.m_l", "corridor.b_l", "corridor.m_r", "corridor.b_r",
      "corridor.interior",
      "cbf.s_m", "cbf.lookahead", "cbf.eps_ff", "cbf.radius",
      "adaptation.eps", "adaptation.k_min", "adaptation.alpha_k",
      "adaptation.alpha_p", "adaptation.cubic_alpha", "adaptation.mu0",
      "control.a_max", "control.omega_max", "control.bounded", "control.r",
      "control.gamma_h",
      "sample_box.x", "sample_box.y", "sample_box.psi", "sample_box.beta",
      "sample_box.v"};
  return keys;
}

inline double num_or(const toml::Table& t, const std::string& key,
                     double fallback) {
  auto it = t.find(key);
  return it == t.end() ? fallback : it->second.as_num();
}

inline Eigen::Vector2d vec2(const toml::Value& v, const std::string& key) {
  const auto a = v.as_num_array();
  if (a.size() != 2) {
    throw ConfigError(key + ": expected a 2-element array (line " +
                      std::to_string(v.line) + ")");
  }
  return {a[0], a[1]};
}

inline AgentSpec parse_agent(const toml::Table& t, int index) {
  AgentSpec a;
  const std::string where = "agents[" + std::to_string(index) + "]";
  auto role_it = t.find("role");
  const std::string role =
      role_it == t.end() ? "controlled" : role_it->second.as_str();
  if (role == "controlled") {
    a.role = AgentRole::Controlled;
  } else if (role == "non_responsive_moving") {
    a.role = AgentRole::NonResponsiveMoving;
  } else if (role == "non_responsive_static") {
    a.role = AgentRole::NonResponsiveStatic;
  } else {
    throw ConfigError(where + ": unknown role '" + role + "'");
  }
  a.initial.x = num_or(t, "x", 0.0);
  a.initial.y = num_or(t, "y", 0.0);
  a.initial.psi = num_or(t, "psi", 0.0);
  a.initial.beta = num_or(t, "beta", 0.0);
  a.initial.v = num_or(t, "v", 0.0);
  if (auto it = t.find("goal"); it != t.end()) {
    a.goal = vec2(it->second, where + ".goal");
  } else {
    a.goal = {a.initial.x, a.initial.y};
  }
  a.params.l_r = num_or(t, "l_r", 0.5);
  a.params.l_f = num_or(t, "l_f", 0.5);
  a.cruise_speed = num_or(t, "speed", 1.0);
  a.start_time = num_or(t, "start_time", 0.0);
  if (auto it = t.find("stop_point"); it != t.end()) {
    a.stop_point = vec2(it->second, where + ".stop_point");
  }
  a.stop_radius = num_or(t, "stop_radius", 0.3);
  a.hold = num_or(t, "hold", 2.0);
  if (a.params.l_r <= 0.0) throw ConfigError(where + ": l_r must be > 0");
  if (a.params.l_f < 0.0) throw ConfigError(where + ": l_f must be >= 0");
  if (std::abs(a.initial.beta) >= M_PI / 2.0) {
    throw ConfigError(where + ": |beta| must be < pi/2");
  }
  return a;
}

}  // namespace detail

/// Applies `--set key=value` overrides onto the parsed document. Unknown
/// keys are rejected.
inline void apply_overrides(toml::Document& doc,
                            const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override '" + ov + "' is not of the form key=value");
    }
    const std::string key = toml::detail::strip(ov.substr(0, eq));
    if (!detail::known_keys().count(key)) {
      throw ConfigError("unknown override key '" + key + "'");
    }
    const std::string raw = toml::detail::strip(ov.substr(eq + 1));
    try {
      doc.root[key] = toml::detail::parse_value(raw, 0);
    } catch (const toml::ParseError&) {
      // Shell-level overrides arrive without TOML quoting; take the raw
      // token as a string.
      toml::Value v;
      v.kind = toml::Value::Kind::Str;
      v.str = raw;
      doc.root[key] = v;
    }
  }
}

inline ScenarioConfig build_config(const toml::Document& doc);

inline ScenarioConfig load_scenario(const std::string& path,
                                    const std::vector<std::string>& overrides =
                                        {}) {
  toml::Document doc = toml::parse_file(path);
  apply_overrides(doc, overrides);
  return build_config(doc);
}

/// Theorem 1 preconditions, enforced at load: every controlled agent starts
/// strictly inside each constituent set, H(x0, ones) > 0, and h_p(0) >= 0 so
/// the adaptation can keep L_G H nonvanishing.
inline void validate_initial_conditions(const ScenarioConfig& cfg) {
  const auto states = cfg.initial_states();
  const auto params = cfg.vehicle_params();
  const int num_agents = static_cast<int>(cfg.agents.size());
  for (int i : cfg.controlled_ids()) {
    const auto evals = build_constraint_set(i, states, params, cfg.cset);
    const auto names = constraint_names(i, cfg);
    for (size_t s = 0; s < evals.size(); ++s) {
      if (!(evals[s].h > 0.0)) {
        std::ostringstream os;
        os << "agent " << i << " starts outside constituent safe set '"
           << names[s] << "' (h = " << evals[s].h << ")";
        throw ConfigError(os.str());
      }
    }
    const Vector k0 = Vector::Ones(static_cast<Eigen::Index>(evals.size()));
    const auto ctx =
        consolidate(evals, k0, Matrix(), cfg.dt, cfg.adapt.eps, num_agents);
    if (!(ctx.H > 0.0)) {
      std::ostringstream os;
      os << "agent " << i << ": H(x0, 1) = " << ctx.H << " is not positive";
      throw ConfigError(os.str());
    }
    if (ctx.h_p < 0.0) {
      std::ostringstream os;
      os << "agent " << i << ": h_p(0) = " << ctx.h_p
         << " < 0; L_G H may vanish (decrease adaptation.eps)";
      throw ConfigError(os.str());
    }
  }
}

inline ScenarioConfig build_config(const toml::Document& doc) {
  for (const auto& [key, value] : doc.root) {
    if (!detail::known_keys().count(key)) {
      throw ConfigError("unknown key '" + key + "' (line " +
                        std::to_string(value.line) + ")");
    }
  }
  for (const auto& [name, tables] : doc.table_arrays) {
    if (name != "agents") {
      throw ConfigError("unknown table array '[[" + name + "]]'");
    }
    (void)tables;
  }

  ScenarioConfig cfg;
  const toml::Table& r = doc.root;
  auto num = [&](const std::string& key, double fallback) {
    auto it = r.find(key);
    const double v = it == r.end() ? fallback : it->second.as_num();
    std::ostringstream os;
    os << v;
    cfg.echo[key] = os.str();
    return v;
  };

  cfg.dt = num("sim.dt", 0.01);
  cfg.t_end = num("sim.t_end", 40.0);
  cfg.seed = static_cast<unsigned long>(num("sim.seed", 1.0));
  cfg.goal_tolerance = num("sim.goal_tolerance", 0.25);
  if (auto it = r.find("sim.controller"); it != r.end()) {
    const std::string c = it->second.as_str();
    if (c == "ccbf_decentralized") {
      cfg.controller = ControllerKind::CcbfDecentralized;
    } else if (c == "ccbf_centralized") {
      cfg.controller = ControllerKind::CcbfCentralized;
    } else if (c == "baseline_qp") {
      cfg.controller = ControllerKind::BaselineQp;
    } else {
      throw ConfigError("sim.controller: unknown controller '" + c + "'");
    }
    cfg.echo["sim.controller"] = c;
  } else {
    cfg.echo["sim.controller"] = "ccbf_decentralized";
  }
  if (cfg.dt <= 0.0) throw ConfigError("sim.dt must be > 0");
  if (cfg.t_end <= cfg.dt) throw ConfigError("sim.t_end must exceed sim.dt");

  cfg.cset.s_m = num("cbf.s_m", 1.0);
  cfg.cset.ff.lookahead = num("cbf.lookahead", 3.0);
  cfg.cset.ff.eps_ff = num("cbf.eps_ff", 0.5);
  cfg.cset.ff.radius = num("cbf.radius", 0.25);
  if (cfg.cset.s_m <= 0.0) throw ConfigError("cbf.s_m must be > 0");
  if (cfg.cset.ff.lookahead <= 0.0) throw ConfigError("cbf.lookahead must be > 0");
  if (cfg.cset.ff.eps_ff <= 0.0) throw ConfigError("cbf.eps_ff must be > 0");
  if (cfg.cset.ff.radius <= 0.0) throw ConfigError("cbf.radius must be > 0");

  if (r.count("corridor.m_l") || r.count("corridor.b_l") ||
      r.count("corridor.m_r") || r.count("corridor.b_r")) {
    CorridorGeometry geom;
    geom.m_l = num("corridor.m_l", 0.0);
    geom.b_l = num("corridor.b_l", 1.0);
    geom.m_r = num("corridor.m_r", 0.0);
    geom.b_r = num("corridor.b_r", -1.0);
    auto it = r.find("corridor.interior");
    if (it == r.end()) {
      throw ConfigError("corridor.interior reference point is required");
    }
    cfg.corridor_interior = detail::vec2(it->second, "corridor.interior");
    if (geom.m_l == geom.m_r && geom.b_l == geom.b_r) {
      throw ConfigError("corridor walls must be distinct lines");
    }
    // Sign orientation: the product form is sign-ambiguous per wall, so the
    // configured interior point decides it.
    const double res_l = geom.m_l * cfg.corridor_interior(0) + geom.b_l -
                         cfg.corridor_interior(1);
    const double res_r = geom.m_r * cfg.corridor_interior(0) + geom.b_r -
                         cfg.corridor_interior(1);
    const double prod = res_l * res_r;
    if (std::abs(prod) < 1e-12) {
      throw ConfigError("corridor.interior lies on a wall (h_c = 0)");
    }
    geom.sign = prod > 0.0 ? 1.0 : -1.0;
    cfg.cset.corridor = geom;
  }

  cfg.adapt.eps = num("adaptation.eps", 0.01);
  const double k_min = num("adaptation.k_min", 0.01);
  cfg.adapt.alpha_k_gain = num("adaptation.alpha_k", 1.0);
  cfg.adapt.alpha_p_gain = num("adaptation.alpha_p", 1.0);
  if (auto it = r.find("adaptation.cubic_alpha"); it != r.end()) {
    cfg.adapt.cubic_alpha = it->second.as_bool();
  }
  if (cfg.adapt.eps <= 0.0) throw ConfigError("adaptation.eps must be > 0");
  if (k_min <= 0.0) throw ConfigError("adaptation.k_min must be > 0");

  cfg.bounds.a_max = num("control.a_max", 1.0);
  cfg.bounds.omega_max = num("control.omega_max", 2.0);
  cfg.bounds.bounded = true;
  if (auto it = r.find("control.bounded"); it != r.end()) {
    cfg.bounds.bounded = it->second.as_bool();
  }
  if (cfg.bounds.bounded &&
      (cfg.bounds.a_max <= 0.0 || cfg.bounds.omega_max <= 0.0)) {
    throw ConfigError("control bounds must be positive");
  }
  cfg.r = num("control.r", 1.0);
  cfg.gamma_h = num("control.gamma_h", 1.0);
  if (cfg.r <= 0.0) throw ConfigError("control.r must be > 0");
  if (cfg.gamma_h <= 0.0) throw ConfigError("control.gamma_h must be > 0");

  auto box_range = [&](const std::string& key, Eigen::Vector2d fallback) {
    auto it = r.find(key);
    if (it == r.end()) return fallback;
    return detail::vec2(it->second, key);
  };
  cfg.sample_box.x = box_range("sample_box.x", cfg.sample_box.x);
  cfg.sample_box.y = box_range("sample_box.y", cfg.sample_box.y);
  cfg.sample_box.psi = box_range("sample_box.psi", cfg.sample_box.psi);
  cfg.sample_box.beta = box_range("sample_box.beta", cfg.sample_box.beta);
  cfg.sample_box.v = box_range("sample_box.v", cfg.sample_box.v);

  auto agents_it = doc.table_arrays.find("agents");
  if (agents_it == doc.table_arrays.end() || agents_it->second.empty()) {
    throw ConfigError("scenario declares no [[agents]]");
  }
  for (size_t i = 0; i < agents_it->second.size(); ++i) {
    cfg.agents.push_back(
        detail::parse_agent(agents_it->second[i], static_cast<int>(i)));
  }
  if (cfg.controlled_ids().empty()) {
    throw ConfigError("scenario has no controlled agent");
  }

  // P, mu0 and k_min stay empty here; they are sized per constraint count
  // when the engine builds each agent's gain vector.
  cfg.adapt_k_min_scalar = k_min;
  cfg.adapt_mu0_scalar = num("adaptation.mu0", 0.0);

  validate_initial_conditions(cfg);
  return cfg;
}

}  // namespace ccbf

#endif  // CCBF_SCENARIO_HPP
