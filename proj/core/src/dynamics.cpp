#include "weavesim/dynamics.hpp"

#include <algorithm>
#include <stdexcept>

namespace weavesim {

VehicleState step_nonlinear(const VehicleState& state, const ControlInput& input,
                            double dt, const VehicleParams& params) {
  const double wheelbase = params.front_axle_to_cog_m + params.rear_axle_to_cog_m;
  const double c_lat = params.rear_axle_to_cog_m / wheelbase;
  const double c_yaw = params.axle_length_m / wheelbase;

  VehicleState next = state;
  next.px = state.px + dt * state.speed;
  next.py = state.py + dt * (state.speed * state.heading +
                             c_lat * state.speed * input.steer);
  next.heading = state.heading + dt * c_yaw * state.speed * input.steer;
  next.speed = std::clamp(state.speed + dt * input.accel, params.x_min[3],
                          params.x_max[3]);
  return next;
}

LtiModel linearize_discretize(const VehicleParams& params, double v_ref,
                              double dt) {
  if (v_ref <= 0.0) {
    throw std::invalid_argument("linearize_discretize: v_ref must be > 0");
  }
  const double wheelbase = params.front_axle_to_cog_m + params.rear_axle_to_cog_m;
  const double c_lat = params.rear_axle_to_cog_m / wheelbase;
  const double c_yaw = params.axle_length_m / wheelbase;

  LtiModel m;
  m.dt_s = dt;
  m.v_ref = v_ref;
  m.A = Eigen::Matrix4d::Identity();
  m.A(0, 3) = dt;          // d p_x / d v
  m.A(1, 2) = dt * v_ref;  // d p_y / d psi
  m.B.setZero();
  m.B(1, 1) = dt * c_lat * v_ref;
  m.B(2, 1) = dt * c_yaw * v_ref;
  m.B(3, 0) = dt;
  return m;
}

std::vector<Eigen::Vector4d> propagate_linear(
    const Eigen::Vector4d& x0, const std::vector<ControlInput>& inputs,
    const LtiModel& model) {
  if (inputs.empty()) {
    throw std::invalid_argument("propagate_linear: empty input sequence");
  }
  std::vector<Eigen::Vector4d> states;
  states.reserve(inputs.size());
  Eigen::Vector4d x = x0;
  for (const auto& u : inputs) {
    x = model.A * x + model.B * Eigen::Vector2d(u.accel, u.steer);
    states.push_back(x);
  }
  return states;
}

}  // namespace weavesim
