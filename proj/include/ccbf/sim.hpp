#ifndef CCBF_SIM_HPP
#define CCBF_SIM_HPP

#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccbf/adaptation.hpp"
#include "ccbf/control.hpp"
#include "ccbf/scenario.hpp"

namespace ccbf {

struct StepLog {
  struct AgentRec {
    AgentState state;
    ControlInput applied;
    ControlInput nominal;
  };
  struct ControlledRec {
    int agent = 0;
    std::vector<double> h;
    double H = 0.0;
    Vector k;
    Vector k_dot;
    double h_p = 0.0;
    double lgh_norm = 0.0;
    double margin_d = 0.0;
    QpStatus control_status = QpStatus::Optimal;
    int control_iterations = 0;
  };
  double t = 0.0;
  std::vector<AgentRec> agents;
  std::vector<ControlledRec> controlled;
};

struct SummaryMetrics {
  bool completed = false;
  int terminated_step = -1;
  std::string termination_reason;
  double min_h = std::numeric_limits<double>::infinity();
  std::string min_h_constraint;
  double min_pairwise_distance = std::numeric_limits<double>::infinity();
  double min_H = std::numeric_limits<double>::infinity();
  double min_hp = std::numeric_limits<double>::infinity();
  double min_lgh_norm = std::numeric_limits<double>::infinity();
  std::vector<double> goal_arrival;  // per controlled agent, -1 = never
  int qp_failures = 0;
  bool safety_verdict = false;
  std::string violation;  // names step and constraint when verdict is false
  // Per controlled agent, per constituent minimum over time.
  std::vector<std::vector<double>> min_h_table;
};

struct RunResult {
  std::vector<StepLog> logs;
  SummaryMetrics summary;
};

namespace detail {

// Scripted stop-go phase tracking for non-responsive movers.
struct ScriptState {
  bool holding = false;
  bool resumed = false;
  double hold_until = 0.0;
};

inline ControlInput scripted_input(const AgentSpec& spec, const AgentState& s,
                                   double t, ScriptState& script,
                                   const ControlBounds& bounds) {
  NominalLaw law = make_nominal_law(spec.goal, spec.cruise_speed);
  ControlInput u = nominal_input(s, law, bounds);
  double v_des = -1.0;  // < 0 means "leave the nominal speed loop alone"
  if (t < spec.start_time) v_des = 0.0;
  if (spec.stop_point && !script.resumed) {
    const double dist = (Eigen::Vector2d(s.x, s.y) - *spec.stop_point).norm();
    if (!script.holding && dist < spec.stop_radius) {
      script.holding = true;
      script.hold_until = t + spec.hold;
    }
    if (script.holding) {
      if (t < script.hold_until) {
        v_des = 0.0;
      } else {
        script.resumed = true;
      }
    }
  }
  if (v_des >= 0.0) {
    u.a = law.k_v * (v_des - s.v);
    u = bounds.clip(u);
  }
  return u;
}

inline ControlInput nominal_for(const AgentSpec& spec, const AgentState& s,
                                double t, ScriptState& script,
                                const ScenarioConfig& cfg) {
  switch (spec.role) {
    case AgentRole::Controlled: {
      // Cruise below the speed-CBF cap so h_v keeps slack at steady state.
      const double v_max = std::min(spec.cruise_speed, cfg.cset.s_m);
      const NominalLaw law = make_nominal_law(spec.goal, v_max);
      return nominal_input(s, law, cfg.bounds);
    }
    case AgentRole::NonResponsiveMoving:
      return scripted_input(spec, s, t, script, cfg.bounds);
    case AgentRole::NonResponsiveStatic:
      return {};
  }
  return {};
}

inline AdaptationParams sized_adaptation(const ScenarioConfig& cfg,
                                         Eigen::Index c) {
  AdaptationParams p = cfg.adapt;
  p.k_min = Vector::Constant(c, cfg.adapt_k_min_scalar);
  p.mu0 = Vector::Constant(c, cfg.adapt_mu0_scalar);
  return p;
}

}  // namespace detail

struct RunResult;
inline SummaryMetrics summarize(const std::vector<StepLog>& logs,
                                const ScenarioConfig& cfg);
inline void summarize_into(RunResult& result, const ScenarioConfig& cfg);

/// Per-step pipeline for every controlled agent, from one immutable world
/// snapshot: constraints -> consolidate -> adapt -> control -> integrate.
/// Deterministic: identical configs produce identical logs.
inline RunResult run(const ScenarioConfig& cfg) {
  validate_initial_conditions(cfg);
  const int num_agents = static_cast<int>(cfg.agents.size());
  const auto controlled = cfg.controlled_ids();
  const auto params = cfg.vehicle_params();
  const int steps = static_cast<int>(cfg.t_end / cfg.dt);

  std::vector<AgentState> states = cfg.initial_states();
  std::vector<detail::ScriptState> scripts(num_agents);
  Vector u_prev = Vector::Zero(2 * num_agents);

  // Per controlled agent: gains and previous projector (seeded lazily with
  // Q(0) so Qdot(0) = 0).
  std::map<int, Vector> gains;
  std::map<int, Matrix> prev_proj;
  // Centralized mode consolidates one joint constraint list over the
  // communicative (= controlled) set with a single gain vector.
  Vector joint_gains;
  Matrix joint_prev_proj;

  RunResult result;
  result.summary.goal_arrival.assign(controlled.size(), -1.0);
  result.summary.min_h_table.resize(controlled.size());

  for (int step_idx = 0; step_idx <= steps; ++step_idx) {
    const double t = step_idx * cfg.dt;
    StepLog log;
    log.t = t;
    log.agents.resize(num_agents);
    std::vector<ControlInput> applied(num_agents);

    for (int i = 0; i < num_agents; ++i) {
      log.agents[i].state = states[i];
      log.agents[i].nominal =
          detail::nominal_for(cfg.agents[i], states[i], t, scripts[i], cfg);
      if (cfg.agents[i].role != AgentRole::Controlled) {
        applied[i] = log.agents[i].nominal;
        log.agents[i].applied = applied[i];
      }
    }

    bool terminated = false;
    std::string reason;

    auto note_failure = [&](int agent, const std::string& what) {
      ++result.summary.qp_failures;
      terminated = true;
      std::ostringstream os;
      os << what << " for agent " << agent << " at step " << step_idx
         << " (t = " << t << ")";
      reason = os.str();
    };

    if (cfg.controller == ControllerKind::CcbfCentralized) {
      // Joint constraint list: concatenation of every controlled agent's
      // ordered set; gain indices stay stable because the per-agent order is.
      std::vector<ConstraintEval> joint;
      std::vector<double> joint_h;
      for (int i : controlled) {
        const auto evals = build_constraint_set(i, states, params, cfg.cset);
        joint.insert(joint.end(), evals.begin(), evals.end());
      }
      const Eigen::Index c = static_cast<Eigen::Index>(joint.size());
      if (joint_gains.size() == 0) joint_gains = Vector::Ones(c);
      auto ctx = consolidate(joint, joint_gains, joint_prev_proj, cfg.dt,
                             cfg.adapt.eps, num_agents);
      const auto aparams = detail::sized_adaptation(cfg, c);
      Vector k_dot;
      try {
        k_dot = adapt_gains(ctx, joint_gains, u_prev, aparams);
      } catch (const AdaptationInfeasible& e) {
        note_failure(controlled.front(), std::string("adaptation: ") + e.what());
      }
      if (!terminated) {
        Vector u_nom(2 * controlled.size());
        for (size_t j = 0; j < controlled.size(); ++j) {
          u_nom.segment(2 * j, 2) = log.agents[controlled[j]].nominal.vec();
        }
        const auto res = centralized_ccbf(ctx, controlled, u_nom, cfg.bounds,
                                          -ctx.q.dot(k_dot), cfg.gamma_h);
        if (res.status != QpStatus::Optimal) {
          note_failure(controlled.front(), "centralized C-CBF QP infeasible");
        } else {
          for (size_t j = 0; j < controlled.size(); ++j) {
            applied[controlled[j]] = {res.u(2 * j), res.u(2 * j + 1)};
          }
          for (size_t j = 0; j < controlled.size(); ++j) {
            StepLog::ControlledRec rec;
            rec.agent = controlled[j];
            for (const auto& e : joint) rec.h.push_back(e.h);
            rec.H = ctx.H;
            rec.k = joint_gains;
            rec.k_dot = k_dot;
            rec.h_p = ctx.h_p;
            rec.lgh_norm = ctx.lgh.norm();
            rec.control_status = res.status;
            rec.control_iterations = res.iterations;
            log.controlled.push_back(std::move(rec));
          }
          joint_gains =
              integrate_gains(joint_gains, k_dot, cfg.dt, aparams.k_min);
          joint_prev_proj = ctx.q_proj;
        }
      }
    } else {
      for (int i : controlled) {
        const auto evals = build_constraint_set(i, states, params, cfg.cset);
        const Eigen::Index c = static_cast<Eigen::Index>(evals.size());
        StepLog::ControlledRec rec;
        rec.agent = i;
        for (const auto& e : evals) rec.h.push_back(e.h);

        if (cfg.controller == ControllerKind::BaselineQp) {
          const Vector alphas = Vector::Constant(c, cfg.gamma_h);
          const auto res = baseline_decentralized(
              i, evals, log.agents[i].nominal, cfg.bounds, alphas);
          rec.control_status = res.status;
          rec.control_iterations = res.iterations;
          rec.k = Vector();
          rec.k_dot = Vector();
          log.controlled.push_back(rec);
          if (res.status != QpStatus::Optimal) {
            note_failure(i, "baseline CBF-QP infeasible");
            break;
          }
          applied[i] = res.u;
          continue;
        }

        if (!gains.count(i)) gains[i] = Vector::Ones(c);
        auto ctx = consolidate(evals, gains[i],
                               prev_proj.count(i) ? prev_proj[i] : Matrix(),
                               cfg.dt, cfg.adapt.eps, num_agents);
        const auto aparams = detail::sized_adaptation(cfg, c);
        Vector k_dot;
        try {
          k_dot = adapt_gains(ctx, gains[i], u_prev, aparams);
        } catch (const AdaptationInfeasible& e) {
          rec.H = ctx.H;
          rec.k = gains[i];
          rec.h_p = ctx.h_p;
          rec.lgh_norm = ctx.lgh.norm();
          log.controlled.push_back(rec);
          note_failure(i, std::string("adaptation: ") + e.what());
          break;
        }
        const auto res =
            decentralized_ccbf(i, ctx, log.agents[i].nominal, cfg.bounds,
                               -ctx.q.dot(k_dot), cfg.gamma_h, cfg.r);
        rec.H = ctx.H;
        rec.k = gains[i];
        rec.k_dot = k_dot;
        rec.h_p = ctx.h_p;
        rec.lgh_norm = ctx.lgh.norm();
        rec.margin_d = res.margin_d;
        rec.control_status = res.status;
        rec.control_iterations = res.iterations;
        log.controlled.push_back(rec);
        if (res.status != QpStatus::Optimal) {
          note_failure(i, "decentralized C-CBF QP infeasible");
          break;
        }
        applied[i] = res.u;
        gains[i] = integrate_gains(gains[i], k_dot, cfg.dt, aparams.k_min);
        prev_proj[i] = ctx.q_proj;
      }
    }

    for (int i : controlled) log.agents[i].applied = applied[i];
    result.logs.push_back(std::move(log));
    if (terminated) {
      result.summary.terminated_step = step_idx;
      result.summary.termination_reason = reason;
      break;
    }

    for (int i = 0; i < num_agents; ++i) {
      u_prev.segment(2 * i, 2) = applied[i].vec();
      states[i] = step(states[i], applied[i], cfg.dt, params[i]);
    }
  }

  result.summary.completed = result.summary.terminated_step < 0;
  summarize_into(result, cfg);
  return result;
}

inline void summarize_into(RunResult& result, const ScenarioConfig& cfg) {
  SummaryMetrics base = result.summary;  // keep termination bookkeeping
  SummaryMetrics s = summarize(result.logs, cfg);
  s.completed = base.completed;
  s.terminated_step = base.terminated_step;
  s.termination_reason = base.termination_reason;
  s.qp_failures = base.qp_failures;
  if (!s.completed) s.safety_verdict = false;
  result.summary = s;
}

/// Minima, arrival times and the safety verdict:
///   (forall t, s: h_s >= -1e-6) and (forall t: pairwise distance >= 2R - tol).
inline SummaryMetrics summarize(const std::vector<StepLog>& logs,
                                const ScenarioConfig& cfg) {
  SummaryMetrics m;
  if (logs.empty()) throw std::invalid_argument("summarize: empty log");
  const auto controlled = cfg.controlled_ids();
  const int num_agents = static_cast<int>(cfg.agents.size());
  const double two_r = 2.0 * cfg.cset.ff.radius;
  const double h_tol = 1e-6;
  m.goal_arrival.assign(controlled.size(), -1.0);
  m.min_h_table.assign(controlled.size(), {});
  m.completed = true;
  m.safety_verdict = true;

  for (size_t step = 0; step < logs.size(); ++step) {
    const StepLog& log = logs[step];
    for (size_t ci = 0; ci < log.controlled.size() && ci < controlled.size();
         ++ci) {
      const auto& rec = log.controlled[ci];
      auto& mins = m.min_h_table[ci];
      if (mins.size() < rec.h.size()) mins.resize(rec.h.size(),
                                                  std::numeric_limits<double>::infinity());
      for (size_t s = 0; s < rec.h.size(); ++s) {
        mins[s] = std::min(mins[s], rec.h[s]);
        if (rec.h[s] < m.min_h) {
          m.min_h = rec.h[s];
          m.min_h_constraint = "agent " + std::to_string(rec.agent) +
                               " constraint " + std::to_string(s);
        }
        if (rec.h[s] < -h_tol && m.violation.empty()) {
          m.safety_verdict = false;
          m.violation = "h < 0 at step " + std::to_string(step) +
                        " (agent " + std::to_string(rec.agent) +
                        ", constraint " + std::to_string(s) + ")";
        }
      }
      m.min_H = std::min(m.min_H, rec.H);
      m.min_hp = std::min(m.min_hp, rec.h_p);
      if (rec.lgh_norm > 0.0 || rec.k.size() > 0) {
        m.min_lgh_norm = std::min(m.min_lgh_norm, rec.lgh_norm);
      }
    }
    for (int i = 0; i < num_agents; ++i) {
      for (int j = i + 1; j < num_agents; ++j) {
        const double d =
            std::hypot(log.agents[i].state.x - log.agents[j].state.x,
                       log.agents[i].state.y - log.agents[j].state.y);
        if (d < m.min_pairwise_distance) m.min_pairwise_distance = d;
        if (d < two_r - h_tol && m.violation.empty()) {
          m.safety_verdict = false;
          m.violation = "pairwise distance " + std::to_string(d) +
                        " < 2R at step " + std::to_string(step);
        }
      }
    }
    for (size_t ci = 0; ci < controlled.size(); ++ci) {
      const int i = controlled[ci];
      if (m.goal_arrival[ci] < 0.0) {
        const double d = std::hypot(log.agents[i].state.x - cfg.agents[i].goal(0),
                                    log.agents[i].state.y - cfg.agents[i].goal(1));
        if (d <= cfg.goal_tolerance) m.goal_arrival[ci] = log.t;
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Output writers. Column order of the wide CSV is fixed:
//   t,
//   per agent i:  agent{i}_x, agent{i}_y, agent{i}_psi, agent{i}_beta,
//                 agent{i}_v, agent{i}_a, agent{i}_omega,
//   per controlled agent i: h{s}_{i} (s = 1..c), H_{i}, k{s}_{i} (s = 1..c),
//                 hp_{i}
// ---------------------------------------------------------------------------

inline std::string format_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline void write_trajectory_csv(const std::string& path,
                                 const std::vector<StepLog>& logs,
                                 const ScenarioConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const int num_agents = static_cast<int>(cfg.agents.size());
  const auto controlled = cfg.controlled_ids();

  out << "t";
  for (int i = 0; i < num_agents; ++i) {
    for (const char* f : {"x", "y", "psi", "beta", "v", "a", "omega"}) {
      out << ",agent" << i << "_" << f;
    }
  }
  // Constituent counts are fixed per scenario; derive from the first record.
  std::map<int, size_t> c_of;
  if (!logs.empty()) {
    for (const auto& rec : logs.front().controlled) {
      if (!c_of.count(rec.agent)) c_of[rec.agent] = rec.h.size();
    }
  }
  for (int i : controlled) {
    const size_t c = c_of.count(i) ? c_of[i] : 0;
    for (size_t s = 1; s <= c; ++s) out << ",h" << s << "_" << i;
    out << ",H_" << i;
    for (size_t s = 1; s <= c; ++s) out << ",k" << s << "_" << i;
    out << ",hp_" << i;
  }
  out << "\n";

  for (const auto& log : logs) {
    out << format_num(log.t);
    for (int i = 0; i < num_agents; ++i) {
      const auto& a = log.agents[i];
      out << "," << format_num(a.state.x) << "," << format_num(a.state.y)
          << "," << format_num(a.state.psi) << "," << format_num(a.state.beta)
          << "," << format_num(a.state.v) << "," << format_num(a.applied.a)
          << "," << format_num(a.applied.omega);
    }
    for (int i : controlled) {
      const StepLog::ControlledRec* rec = nullptr;
      for (const auto& r : log.controlled) {
        if (r.agent == i) rec = &r;
      }
      const size_t c = c_of.count(i) ? c_of[i] : 0;
      for (size_t s = 0; s < c; ++s) {
        out << "," << (rec && s < rec->h.size() ? format_num(rec->h[s]) : "");
      }
      out << "," << (rec ? format_num(rec->H) : "");
      for (size_t s = 0; s < c; ++s) {
        out << ","
            << (rec && static_cast<Eigen::Index>(s) < rec->k.size()
                    ? format_num(rec->k(static_cast<Eigen::Index>(s)))
                    : "");
      }
      out << "," << (rec ? format_num(rec->h_p) : "");
    }
    out << "\n";
  }
}

inline const char* status_name(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::MaxIterations: return "max_iterations";
  }
  return "unknown";
}

inline void write_steps_jsonl(const std::string& path,
                              const std::vector<StepLog>& logs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& log : logs) {
    nlohmann::json j;
    j["t"] = log.t;
    for (const auto& a : log.agents) {
      j["agents"].push_back({{"x", a.state.x},
                             {"y", a.state.y},
                             {"psi", a.state.psi},
                             {"beta", a.state.beta},
                             {"v", a.state.v},
                             {"a", a.applied.a},
                             {"omega", a.applied.omega},
                             {"a_nom", a.nominal.a},
                             {"omega_nom", a.nominal.omega}});
    }
    j["agents"] = j.value("agents", nlohmann::json::array());
    for (const auto& rec : log.controlled) {
      nlohmann::json c;
      c["agent"] = rec.agent;
      c["h"] = rec.h;
      c["H"] = rec.H;
      c["k"] = std::vector<double>(rec.k.data(), rec.k.data() + rec.k.size());
      c["k_dot"] = std::vector<double>(rec.k_dot.data(),
                                       rec.k_dot.data() + rec.k_dot.size());
      c["h_p"] = rec.h_p;
      c["lgh_norm"] = rec.lgh_norm;
      c["d"] = rec.margin_d;
      c["qp_status"] = status_name(rec.control_status);
      c["qp_iterations"] = rec.control_iterations;
      j["controlled"].push_back(c);
    }
    j["controlled"] = j.value("controlled", nlohmann::json::array());
    out << j.dump() << "\n";
  }
}

inline nlohmann::json summary_json(const SummaryMetrics& m,
                                   const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["completed"] = m.completed;
  j["terminated_step"] = m.terminated_step;
  j["termination_reason"] = m.termination_reason;
  j["safety_verdict"] = m.safety_verdict;
  j["violation"] = m.violation;
  j["min_h"] = m.min_h;
  j["min_h_constraint"] = m.min_h_constraint;
  j["min_pairwise_distance"] = m.min_pairwise_distance;
  j["min_H"] = m.min_H;
  j["min_hp"] = m.min_hp;
  j["min_lgh_norm"] = m.min_lgh_norm;
  j["goal_arrival"] = m.goal_arrival;
  j["qp_failures"] = m.qp_failures;
  j["min_h_table"] = m.min_h_table;
  j["config"] = cfg.echo;
  return j;
}

inline void write_summary_json(const std::string& path,
                               const SummaryMetrics& m,
                               const ScenarioConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << summary_json(m, cfg).dump(2) << "\n";
}

}  // namespace ccbf

#endif  // CCBF_SIM_HPP
