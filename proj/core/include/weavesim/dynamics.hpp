#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

namespace weavesim {

using VehicleId = std::uint64_t;

enum class VehicleKind { Cav, Hv };

// Physical vehicle description plus box bounds on state and control.
// State ordering is [p_x, p_y, psi, v]; control ordering is [a_x, delta_f].
struct VehicleParams {
  double axle_length_m = 2.8;        // l
  double front_axle_to_cog_m = 1.4;  // l_f
  double rear_axle_to_cog_m = 1.4;   // l_r
  double body_length_m = 4.5;
  double body_width_m = 1.8;
  std::array<double, 4> x_min{-1e18, -1e18, -0.35, 0.0};
  std::array<double, 4> x_max{1e18, 1e18, 0.35, 30.0};
  std::array<double, 2> u_min{-6.0, -0.15};
  std::array<double, 2> u_max{3.0, 0.15};
};

struct VehicleState {
  VehicleId id = 0;
  VehicleKind kind = VehicleKind::Hv;
  int dest_lane = 0;     // e
  int current_lane = 0;  // o
  double px = 0.0;       // m, longitudinal
  double py = 0.0;       // m, lateral
  double speed = 0.0;    // v, m/s
  double heading = 0.0;  // psi, rad

  Eigen::Vector4d x() const { return {px, py, heading, speed}; }
};

struct ControlInput {
  double accel = 0.0;  // a_x, m/s^2
  double steer = 0.0;  // delta_f, rad
};

// Discrete-time LTI model x(k+1) = A x(k) + B u(k), obtained by linearizing
// the kinematic bicycle model at a fixed operating speed and discretizing
// with forward Euler. At the operating point (psi = 0, delta_f = 0,
// v = v_ref) the affine residual vanishes, so the model is exactly linear.
struct LtiModel {
  Eigen::Matrix4d A = Eigen::Matrix4d::Identity();
  Eigen::Matrix<double, 4, 2> B = Eigen::Matrix<double, 4, 2>::Zero();
  double dt_s = 0.2;
  double v_ref = 0.0;
};

// One explicit-Euler step of the kinematic bicycle model:
//   p_x' = v,  p_y' = v psi + (l_r/(l_f+l_r)) v delta_f,
//   psi' = (l/(l_f+l_r)) v delta_f,  v' = a_x.
// Speed is clamped to the state bounds; current_lane is left untouched
// (lane membership is a road-geometry concern, resolved by the caller).
VehicleState step_nonlinear(const VehicleState& state, const ControlInput& input,
                            double dt, const VehicleParams& params);

// Forward-Euler discretization of the bicycle model linearized at
// (psi = 0, delta_f = 0, v = v_ref). Throws std::invalid_argument for
// v_ref <= 0.
LtiModel linearize_discretize(const VehicleParams& params, double v_ref,
                              double dt);

// Sequential rollout x_{t+1} = A x_t + B u_t; returns inputs.size() states
// (x_1 .. x_P). Throws std::invalid_argument on empty input list.
std::vector<Eigen::Vector4d> propagate_linear(
    const Eigen::Vector4d& x0, const std::vector<ControlInput>& inputs,
    const LtiModel& model);

}  // namespace weavesim
