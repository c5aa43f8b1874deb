#include <doctest.h>

#include <cmath>
#include <random>

#include "ccbf/constraints.hpp"

using ccbf::AgentState;
using ccbf::ConstraintEval;
using ccbf::CorridorGeometry;
using ccbf::FfCbfParams;
using ccbf::VehicleParams;

namespace {

std::mt19937_64 rng(19);

AgentState random_state(double pos_range = 3.0) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  return {pos_range * d(rng), pos_range * d(rng), M_PI * d(rng), 0.6 * d(rng),
          0.1 + 0.9 * std::abs(d(rng))};
}

// Central finite difference of h through one agent's state.
template <typename HFn>
Eigen::Matrix<double, 5, 1> fd_grad(const HFn& h_of, const AgentState& s,
                                    double step = 1e-6) {
  Eigen::Matrix<double, 5, 1> g;
  for (int i = 0; i < 5; ++i) {
    auto zp = s.vec(), zm = s.vec();
    zp(i) += step;
    zm(i) -= step;
    g(i) = (h_of(AgentState::from_vec(zp)) - h_of(AgentState::from_vec(zm))) /
           (2.0 * step);
  }
  return g;
}

void check_consistency(const ConstraintEval& e,
                       const std::vector<AgentState>& states,
                       const VehicleParams& vp) {
  double lf = 0.0;
  for (const auto& t : e.terms) {
    lf += t.grad.dot(ccbf::drift(states[t.agent], vp));
    const Eigen::RowVector2d lg =
        t.grad.transpose() * ccbf::control_matrix(states[t.agent]);
    CHECK((lg - t.lg).norm() <= 1e-10);
  }
  CHECK(std::abs(lf - e.lf) <= 1e-10 * std::max(1.0, std::abs(e.lf)));
}

}  // namespace

TEST_CASE("speed limit") {
  AgentState s{};
  SUBCASE("at rest, s_M = 1") {
    s.v = 0.0;
    CHECK(ccbf::speed_cbf(0, s, 1.0).h == 1.0);
  }
  SUBCASE("boundary") {
    s.v = 1.0;
    CHECK(ccbf::speed_cbf(0, s, 1.0).h == 0.0);
  }
  SUBCASE("violated") {
    s.v = 2.0;
    const auto e = ccbf::speed_cbf(0, s, 1.0);
    CHECK(e.h == -1.0);
    CHECK(e.terms[0].lg(0) == -1.0);
    CHECK(e.terms[0].lg(1) == 0.0);
    CHECK(e.lf == 0.0);
  }
}

TEST_CASE("corridor residual product") {
  // Horizontal corridor y in (-1.5, 1.5); interior orientation sign = -1
  // because (b_l - y)(b_r - y) < 0 between the walls.
  CorridorGeometry geom{0.0, 1.5, 0.0, -1.5, -1.0};
  VehicleParams vp;
  SUBCASE("on the wall at rest") {
    AgentState s{0.0, 1.5, 0.0, 0.0, 0.0};
    CHECK(ccbf::corridor_cbf(0, s, geom, vp).h == doctest::Approx(0.0));
  }
  SUBCASE("static residual product") {
    // residual_l = 1.5 - y = 2, residual_r = -1.5 - y = 3 at y = -0.5 with
    // sign +1 and walls placed to make both residuals positive.
    CorridorGeometry g2{0.0, 2.0, 0.0, 3.0, 1.0};
    AgentState s{0.0, 0.0, 0.0, 0.0, 0.0};
    CHECK(ccbf::corridor_cbf(0, s, g2, vp).h == doctest::Approx(6.0));
  }
  SUBCASE("interior positive with motion") {
    AgentState s{0.0, 0.3, 0.2, 0.0, 0.5};
    CHECK(ccbf::corridor_cbf(0, s, geom, vp).h > 0.0);
  }
  SUBCASE("gradient oracle") {
    CorridorGeometry slanted{0.1, 1.5, -0.05, -1.4, -1.0};
    for (int t = 0; t < 50; ++t) {
      const AgentState s = random_state();
      const auto e = ccbf::corridor_cbf(0, s, slanted, vp);
      auto h_of = [&](const AgentState& z) {
        return ccbf::corridor_cbf(0, z, slanted, vp).h;
      };
      const auto g = fd_grad(h_of, s);
      CHECK((g - e.terms[0].grad).norm() <=
            1e-4 * std::max(1.0, e.terms[0].grad.norm()));
      check_consistency(e, {s}, vp);
    }
  }
}

TEST_CASE("future-focused collision constraint") {
  VehicleParams vp;
  SUBCASE("touching at rest is the boundary") {
    FfCbfParams p{3.0, 0.5, 0.5};
    AgentState a{0, 0, 0, 0, 0}, b{1.0, 0, 0, 0, 0};  // ||dp|| = 2R = 1
    const auto e = ccbf::ff_collision_cbf(0, a, 1, b, p, vp, vp);
    CHECK(e.h == doctest::Approx(0.0));
  }
  SUBCASE("static far apart") {
    FfCbfParams p{3.0, 1.0, 0.5};
    AgentState a{10, 0, 0, 0, 0}, b{0, 0, 0, 0, 0};
    const auto e = ccbf::ff_collision_cbf(0, a, 1, b, p, vp, vp);
    CHECK(e.h == doctest::Approx(198.0));
  }
  SUBCASE("head-on: tau matches grid search") {
    FfCbfParams p{10.0, 0.5, 0.25};
    // dp = (4, 0), dv = (-1, 0): agent a ahead and closing at 1 m/s.
    AgentState a{4, 0, M_PI, 0, 0.0}, b{0, 0, 0, 0, 1.0};
    const Eigen::Vector2d dp(4, 0);
    const Eigen::Vector2d dv =
        ccbf::planar_velocity(a) - ccbf::planar_velocity(b);
    const double tau = ccbf::minimum_distance_time(dp, dv, p.lookahead);
    CHECK(tau == doctest::Approx(4.0));
    double best_t = 0.0, best_d = (dp + 0.0 * dv).squaredNorm();
    for (double t = 0.0; t <= p.lookahead; t += 1e-4) {
      const double d2 = (dp + t * dv).squaredNorm();
      if (d2 < best_d) {
        best_d = d2;
        best_t = t;
      }
    }
    CHECK(std::abs(tau - best_t) <= 1e-4);
    const auto e = ccbf::ff_collision_cbf(0, a, 1, b, p, vp, vp);
    const double two_r = 2.0 * p.radius;
    CHECK(e.h == doctest::Approx(0.0 + p.eps_ff * 16.0 -
                                 (1.0 + p.eps_ff) * two_r * two_r));
  }
  SUBCASE("symmetry in the agent pair") {
    FfCbfParams p{3.0, 0.5, 0.25};
    for (int t = 0; t < 30; ++t) {
      const AgentState a = random_state(), b = random_state();
      const auto ij = ccbf::ff_collision_cbf(0, a, 1, b, p, vp, vp);
      const auto ji = ccbf::ff_collision_cbf(1, b, 0, a, p, vp, vp);
      CHECK(ij.h == doctest::Approx(ji.h).epsilon(1e-12));
    }
  }
  SUBCASE("tau stays in [0, T]") {
    FfCbfParams p{3.0, 0.5, 0.25};
    for (int t = 0; t < 200; ++t) {
      const AgentState a = random_state(), b = random_state();
      const Eigen::Vector2d dp(a.x - b.x, a.y - b.y);
      const Eigen::Vector2d dv =
          ccbf::planar_velocity(a) - ccbf::planar_velocity(b);
      const double tau = ccbf::minimum_distance_time(dp, dv, p.lookahead);
      CHECK(tau >= 0.0);
      CHECK(tau <= p.lookahead);
    }
  }
  SUBCASE("gradient oracle for both agents") {
    FfCbfParams p{3.0, 0.5, 0.25};
    int checked = 0;
    for (int t = 0; t < 100 && checked < 40; ++t) {
      const AgentState a = random_state(), b = random_state();
      const Eigen::Vector2d dp(a.x - b.x, a.y - b.y);
      const Eigen::Vector2d dv =
          ccbf::planar_velocity(a) - ccbf::planar_velocity(b);
      // Skip clamp-boundary states where h is only piecewise-C1.
      const double tau = ccbf::minimum_distance_time(dp, dv, p.lookahead);
      if (tau < 1e-3 || tau > p.lookahead - 1e-3) continue;
      ++checked;
      const auto e = ccbf::ff_collision_cbf(0, a, 1, b, p, vp, vp);
      auto h_of_a = [&](const AgentState& z) {
        return ccbf::ff_collision_cbf(0, z, 1, b, p, vp, vp).h;
      };
      auto h_of_b = [&](const AgentState& z) {
        return ccbf::ff_collision_cbf(0, a, 1, z, p, vp, vp).h;
      };
      const auto ga = fd_grad(h_of_a, a);
      const auto gb = fd_grad(h_of_b, b);
      CHECK((ga - e.terms[0].grad).norm() <=
            1e-4 * std::max(1.0, e.terms[0].grad.norm()));
      CHECK((gb - e.terms[1].grad).norm() <=
            1e-4 * std::max(1.0, e.terms[1].grad.norm()));
      check_consistency(e, {a, b}, vp);
    }
    CHECK(checked >= 20);
  }
}

TEST_CASE("constraint set assembly") {
  VehicleParams vp;
  ccbf::ConstraintSetSpec spec;
  spec.corridor = CorridorGeometry{0.0, 1.5, 0.0, -1.5, -1.0};
  SUBCASE("warehouse count: 9 agents, corridor on -> c = 10") {
    std::vector<AgentState> states(9);
    for (int i = 0; i < 9; ++i) states[i] = {double(i), 0.1 * i, 0, 0, 0};
    const auto evals =
        ccbf::build_constraint_set(0, states, std::vector<VehicleParams>(9, vp),
                                   spec);
    CHECK(evals.size() == 10);
    // Order: speed, corridor, then collisions by ascending other-agent id.
    CHECK(evals[0].terms[0].lg(0) == -1.0);
    CHECK(evals[2].terms[1].agent == 1);
    CHECK(evals[9].terms[1].agent == 8);
  }
  SUBCASE("single agent with corridor -> c = 2") {
    std::vector<AgentState> states{{0, 0, 0, 0, 0}};
    CHECK(ccbf::build_constraint_set(0, states, {vp}, spec).size() == 2);
  }
  SUBCASE("two agents, no corridor -> c = 2") {
    ccbf::ConstraintSetSpec s2;
    std::vector<AgentState> states{{0, 0, 0, 0, 0}, {3, 0, 0, 0, 0}};
    CHECK(ccbf::build_constraint_set(0, states, {vp, vp}, s2).size() == 2);
  }
}
