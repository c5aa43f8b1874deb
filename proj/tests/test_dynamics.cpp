#include <doctest.h>

#include <cmath>
#include <random>

#include "ccbf/dynamics.hpp"

using ccbf::AgentState;
using ccbf::ControlInput;
using ccbf::VehicleParams;

TEST_CASE("drift field") {
  VehicleParams vp;
  SUBCASE("zero speed") {
    AgentState s{0, 0, 0.7, 0.3, 0.0};
    CHECK(ccbf::drift(s, vp).norm() == 0.0);
  }
  SUBCASE("straight line") {
    AgentState s{0, 0, 0.0, 0.0, 1.0};
    const auto f = ccbf::drift(s, vp);
    CHECK(f(0) == doctest::Approx(1.0));
    CHECK(f.tail<4>().norm() == doctest::Approx(0.0));
  }
  SUBCASE("45 degree slip") {
    VehicleParams unit;
    unit.l_r = 1.0;
    AgentState s{0, 0, 0.0, M_PI / 4.0, 1.0};
    const auto f = ccbf::drift(s, unit);
    CHECK(f(0) == doctest::Approx(1.0));
    CHECK(f(1) == doctest::Approx(1.0));
    CHECK(f(2) == doctest::Approx(1.0));
    CHECK(f(3) == 0.0);
    CHECK(f(4) == 0.0);
  }
}

TEST_CASE("control matrix routes a to vdot and omega to betadot") {
  AgentState s{1, 2, 0.3, 0.1, 0.5};
  const auto g = ccbf::control_matrix(s);
  const Eigen::Matrix<double, 5, 1> ca = g * Eigen::Vector2d(1, 0);
  const Eigen::Matrix<double, 5, 1> cw = g * Eigen::Vector2d(0, 1);
  CHECK(ca(4) == 1.0);
  CHECK(ca.head<4>().norm() == 0.0);
  CHECK(cw(3) == 1.0);
  CHECK(cw.head<3>().norm() == 0.0);
  CHECK(cw(4) == 0.0);
}

TEST_CASE("step basics") {
  VehicleParams vp;
  SUBCASE("equilibrium") {
    AgentState s{};
    const auto n = ccbf::step(s, ControlInput{}, 0.1, vp);
    CHECK(n.vec().norm() == 0.0);
  }
  SUBCASE("constant velocity is exact") {
    AgentState s{0, 0, 0, 0, 1.0};
    const auto n = ccbf::step(s, ControlInput{}, 0.1, vp);
    CHECK(n.x == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(n.y == doctest::Approx(0.0));
    CHECK(n.v == doctest::Approx(1.0));
  }
  SUBCASE("beta clamp") {
    AgentState s{0, 0, 0, 0, 0.0};
    const auto n = ccbf::step(s, ControlInput{0.0, 100.0}, 0.1, vp);
    CHECK(n.beta == doctest::Approx(ccbf::kBetaLimit));
  }
}

TEST_CASE("constant slip angle traces a circle of radius l_r / tan(beta)") {
  VehicleParams vp;
  vp.l_r = 0.5;
  const double beta = 0.4;
  const double radius = vp.l_r / std::tan(beta);
  AgentState s{0, 0, 0, beta, 0.5};
  // One revolution: path length 2*pi*r_path where the c.g. path radius for
  // this model differs from l_r/tan(beta) only via the heading-rate relation
  // psidot = v tan(beta) / l_r; track the turning center instead.
  const double psidot = s.v * std::tan(beta) / vp.l_r;
  const double t_rev = 2.0 * M_PI / psidot;
  const double dt = 1e-3;
  // Turning center from the initial state: it stays fixed, so the distance
  // to it must stay constant. Velocity direction at t=0:
  const Eigen::Vector2d v0 = ccbf::planar_velocity(s);
  const double r_path = v0.norm() / psidot;
  const Eigen::Vector2d center =
      Eigen::Vector2d(s.x, s.y) +
      r_path * Eigen::Vector2d(-v0(1), v0(0)).normalized();
  double max_err = 0.0;
  const int steps = static_cast<int>(t_rev / dt);
  for (int i = 0; i < steps; ++i) {
    s = ccbf::step(s, ControlInput{}, dt, vp);
    const double d = (Eigen::Vector2d(s.x, s.y) - center).norm();
    max_err = std::max(max_err, std::abs(d - r_path));
  }
  CHECK(max_err <= 1e-4);
  // And heading-rate relation ties r_path to l_r/tan(beta) scaled by |v0|/v.
  CHECK(r_path == doctest::Approx(radius * v0.norm() / s.v));
}

TEST_CASE("RK4 order: log-log slope of global error vs dt is 4") {
  VehicleParams vp;
  const AgentState s0{0.3, -0.2, 0.5, 0.2, 0.8};
  const ControlInput u{0.4, -0.3};
  const double horizon = 1.0;
  auto integrate = [&](double dt) {
    AgentState s = s0;
    const int n = static_cast<int>(std::lround(horizon / dt));
    for (int i = 0; i < n; ++i) s = ccbf::step(s, u, dt, vp);
    return s.vec();
  };
  auto err_at = [&](double dt) {
    return (integrate(dt) - integrate(dt / 10.0)).norm();
  };
  const double e1 = err_at(1e-1);
  const double e2 = err_at(1e-2);
  const double e3 = err_at(1e-3);
  const double slope12 = std::log10(e1 / e2);
  CHECK(slope12 >= 3.7);
  CHECK(slope12 <= 4.3);
  // By dt = 1e-3 roundoff dominates, so the second decade only gets an
  // absolute bound instead of a slope.
  CHECK(e3 <= 1e-11);
}

TEST_CASE("control-affine: d(step)/du at dt->0 matches g(z)") {
  VehicleParams vp;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    AgentState s{d(rng), d(rng), d(rng), 0.5 * d(rng), 0.5 + 0.5 * d(rng)};
    const double dt = 1e-6, du = 1e-4;
    const auto g = ccbf::control_matrix(s);
    for (int col = 0; col < 2; ++col) {
      ControlInput up{}, um{};
      (col == 0 ? up.a : up.omega) = du;
      (col == 0 ? um.a : um.omega) = -du;
      const auto zp = ccbf::step(s, up, dt, vp).vec();
      const auto zm = ccbf::step(s, um, dt, vp).vec();
      const Eigen::Matrix<double, 5, 1> fd = (zp - zm) / (2.0 * du * dt);
      CHECK((fd - g.col(col)).norm() <= 1e-5 * std::max(1.0, g.col(col).norm()));
    }
  }
}
