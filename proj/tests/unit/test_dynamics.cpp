#include <doctest.h>

#include <cmath>

#include "weavesim/dynamics.hpp"
#include "weavesim/rng.hpp"

using namespace weavesim;

namespace {
VehicleParams default_params() {
  VehicleParams p;
  p.axle_length_m = 2.8;
  p.front_axle_to_cog_m = 1.4;
  p.rear_axle_to_cog_m = 1.4;
  return p;
}

// Nonlinear right-hand side of the bicycle model, for finite differencing.
Eigen::Vector4d f_nonlinear(const Eigen::Vector4d& x, const Eigen::Vector2d& u,
                            const VehicleParams& p) {
  const double wb = p.front_axle_to_cog_m + p.rear_axle_to_cog_m;
  Eigen::Vector4d dx;
  dx(0) = x(3);
  dx(1) = x(3) * x(2) + (p.rear_axle_to_cog_m / wb) * x(3) * u(1);
  dx(2) = (p.axle_length_m / wb) * x(3) * u(1);
  dx(3) = u(0);
  return dx;
}
}  // namespace

TEST_CASE("straight coast advances p_x by v dt") {
  VehicleParams p = default_params();
  VehicleState s;
  s.px = 10.0;
  s.speed = 20.0;
  VehicleState next = step_nonlinear(s, {0.0, 0.0}, 0.2, p);
  CHECK(next.px == doctest::Approx(14.0));
  CHECK(next.py == doctest::Approx(0.0));
  CHECK(next.heading == doctest::Approx(0.0));
  CHECK(next.speed == doctest::Approx(20.0));
}

TEST_CASE("zero speed nullifies all rates") {
  VehicleParams p = default_params();
  VehicleState s;
  s.px = 5.0;
  s.py = 1.75;
  s.speed = 0.0;
  VehicleState next = step_nonlinear(s, {0.0, 0.1}, 0.2, p);
  CHECK(next.px == s.px);
  CHECK(next.py == s.py);
  CHECK(next.heading == s.heading);
  CHECK(next.speed == s.speed);
}

TEST_CASE("hand-evaluated steering step") {
  // v=20, psi=0, delta_f=0.01, l_f=l_r=1.4, l=2.8, dt=0.2:
  // psi gains l/(l_f+l_r) * v * delta * dt = 0.04 rad,
  // p_y gains (l_r/(l_f+l_r)) * v * delta * dt = 0.02 m.
  VehicleParams p = default_params();
  VehicleState s;
  s.speed = 20.0;
  VehicleState next = step_nonlinear(s, {0.0, 0.01}, 0.2, p);
  CHECK(next.heading == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(next.py == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("speed clamps to state bounds") {
  VehicleParams p = default_params();
  VehicleState s;
  s.speed = 0.5;
  VehicleState next = step_nonlinear(s, {-6.0, 0.0}, 0.2, p);
  CHECK(next.speed == doctest::Approx(0.0));
  s.speed = 29.9;
  next = step_nonlinear(s, {3.0, 0.0}, 0.2, p);
  CHECK(next.speed == doctest::Approx(30.0));
}

TEST_CASE("p_x step is exactly reversible for zero controls") {
  VehicleParams p = default_params();
  VehicleState s;
  s.px = 123.456;
  s.speed = 17.3;
  VehicleState next = step_nonlinear(s, {0.0, 0.0}, 0.2, p);
  CHECK(next.px - next.speed * 0.2 == doctest::Approx(s.px).epsilon(1e-15));
}

TEST_CASE("linearize_discretize matches the stated entries") {
  VehicleParams p = default_params();
  LtiModel m = linearize_discretize(p, 20.0, 0.2);
  CHECK(m.A(0, 3) == doctest::Approx(0.2));
  CHECK(m.B(1, 1) == doctest::Approx(2.0));  // dt * (l_r/l) * v_ref
  CHECK(m.B(3, 0) == doctest::Approx(0.2));
  CHECK_THROWS_AS(linearize_discretize(p, 0.0, 0.2), std::invalid_argument);
}

TEST_CASE("Jacobians match central finite differences at the operating point") {
  VehicleParams p = default_params();
  const double v_ref = 23.0;
  const double dt = 0.2;
  LtiModel m = linearize_discretize(p, v_ref, dt);
  const Eigen::Vector4d x0(0.0, 0.0, 0.0, v_ref);
  const Eigen::Vector2d u0(0.0, 0.0);
  const double eps = 1e-6;
  for (int j = 0; j < 4; ++j) {
    Eigen::Vector4d xp = x0, xm = x0;
    xp(j) += eps;
    xm(j) -= eps;
    Eigen::Vector4d col = (f_nonlinear(xp, u0, p) - f_nonlinear(xm, u0, p)) / (2 * eps);
    for (int i = 0; i < 4; ++i) {
      const double analytic = (m.A(i, j) - (i == j ? 1.0 : 0.0)) / dt;
      CHECK(std::abs(col(i) - analytic) <= 1e-6 * (1.0 + std::abs(analytic)));
    }
  }
  for (int j = 0; j < 2; ++j) {
    Eigen::Vector2d up = u0, um = u0;
    up(j) += eps;
    um(j) -= eps;
    Eigen::Vector4d col = (f_nonlinear(x0, up, p) - f_nonlinear(x0, um, p)) / (2 * eps);
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(col(i) - m.B(i, j) / dt) <= 1e-6 * (1.0 + std::abs(col(i))));
    }
  }
}

TEST_CASE("propagate_linear basics and linearity") {
  VehicleParams p = default_params();
  LtiModel m = linearize_discretize(p, 20.0, 0.2);
  const Eigen::Vector4d x0(0.0, 0.0, 0.0, 20.0);

  SUBCASE("one step equals A x0 + B u0") {
    std::vector<ControlInput> u{{1.0, 0.01}};
    auto xs = propagate_linear(x0, u, m);
    REQUIRE(xs.size() == 1);
    Eigen::Vector4d expect = m.A * x0 + m.B * Eigen::Vector2d(1.0, 0.01);
    CHECK((xs[0] - expect).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("zero inputs grow p_x linearly") {
    std::vector<ControlInput> u(5, ControlInput{0.0, 0.0});
    auto xs = propagate_linear(x0, u, m);
    for (int t = 0; t < 5; ++t) {
      CHECK(xs[t](0) == doctest::Approx((t + 1) * 0.2 * 20.0));
    }
  }

  SUBCASE("superposition holds") {
    RngStream rng(3, "lin");
    std::vector<ControlInput> u(8);
    for (auto& ui : u) ui = {rng.uniform(-1, 1), rng.uniform(-0.05, 0.05)};
    Eigen::Vector4d y0(1.0, 0.5, 0.01, 2.0);
    auto a = propagate_linear(x0 + y0, u, m);
    auto b = propagate_linear(x0, u, m);
    std::vector<ControlInput> zero(8, ControlInput{0.0, 0.0});
    auto c = propagate_linear(y0, zero, m);
    for (int t = 0; t < 8; ++t) {
      CHECK((a[t] - b[t] - c[t]).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SUBCASE("empty input list throws") {
    CHECK_THROWS_AS(propagate_linear(x0, {}, m), std::invalid_argument);
  }
}

TEST_CASE("linear rollout tracks the nonlinear model for small controls") {
  VehicleParams p = default_params();
  const double dt = 0.2;
  const int P = 16;
  RngStream rng(99, "rollout");
  for (int trial = 0; trial < 20; ++trial) {
    const double v0 = rng.uniform(15.0, 25.0);
    LtiModel m = linearize_discretize(p, v0, dt);
    std::vector<ControlInput> u(P);
    for (auto& ui : u) {
      ui.accel = rng.uniform(-0.2, 0.2);
      ui.steer = rng.uniform(-0.02, 0.02);
    }
    Eigen::Vector4d x0(0.0, 0.0, 0.0, v0);
    auto lin = propagate_linear(x0, u, m);
    VehicleState s;
    s.speed = v0;
    double max_dev = 0.0;
    for (int t = 0; t < P; ++t) {
      s = step_nonlinear(s, u[t], dt, p);
      max_dev = std::max(max_dev, std::hypot(lin[t](0) - s.px, lin[t](1) - s.py));
    }
    CHECK(max_dev < 0.5);
  }
}
