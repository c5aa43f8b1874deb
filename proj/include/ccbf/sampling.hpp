#ifndef CCBF_SAMPLING_HPP
#define CCBF_SAMPLING_HPP

#include <functional>
#include <random>

#include "ccbf/consolidation.hpp"
#include "ccbf/scenario.hpp"

namespace ccbf {

struct SafetySampleReport {
  int samples = 0;
  int inside_c = 0;     // states with H >= 0
  int violations = 0;   // states with H >= 0 and some h_s <= 0; must be 0
};

/// Monte Carlo check of the subset property C(k) <= S: uniform joint states
/// over the scenario sample box must never have H >= 0 with a nonpositive
/// constituent. `gains` produces k per controlled agent's constituent count;
/// defaults to all-ones.
inline SafetySampleReport sample_safety(
    const ScenarioConfig& cfg, int n, unsigned long seed,
    const std::function<Vector(Eigen::Index)>& gains = {}) {
  if (n < 1) throw std::invalid_argument("sample_safety: n must be >= 1");
  std::mt19937_64 rng(seed);
  auto uni = [&](const Eigen::Vector2d& range) {
    return std::uniform_real_distribution<double>(range(0), range(1))(rng);
  };
  const auto params = cfg.vehicle_params();
  const auto controlled = cfg.controlled_ids();
  const int num_agents = static_cast<int>(cfg.agents.size());

  SafetySampleReport report;
  report.samples = n;
  for (int it = 0; it < n; ++it) {
    std::vector<AgentState> states(num_agents);
    for (auto& s : states) {
      s.x = uni(cfg.sample_box.x);
      s.y = uni(cfg.sample_box.y);
      s.psi = uni(cfg.sample_box.psi);
      s.beta = uni(cfg.sample_box.beta);
      s.v = uni(cfg.sample_box.v);
    }
    for (int i : controlled) {
      const auto evals = build_constraint_set(i, states, params, cfg.cset);
      const Eigen::Index c = static_cast<Eigen::Index>(evals.size());
      const Vector k = gains ? gains(c) : Vector::Ones(c);
      double sum_phi = 0.0;
      bool any_nonpositive = false;
      for (Eigen::Index s = 0; s < c; ++s) {
        sum_phi += phi(evals[s].h, k(s)).value;
        if (evals[s].h <= 0.0) any_nonpositive = true;
      }
      const double big_h = 1.0 - sum_phi;
      if (big_h >= 0.0) {
        ++report.inside_c;
        if (any_nonpositive) ++report.violations;
      }
    }
  }
  return report;
}

}  // namespace ccbf

#endif  // CCBF_SAMPLING_HPP
