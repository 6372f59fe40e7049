#pragma once

#include "weavesim/hv_model.hpp"

namespace weavesim {

// Objective weights of the lower-level controller. The safety penalty weight
// is fixed at 1; these five are relative to it.
struct MpcWeights {
  double effort = 0.05;  // control energy
  double exit_x = 0.25;  // longitudinal exit attraction
  double exit_y = 0.5;   // lateral exit attraction
  double vel = 0.5;      // target-speed attraction
  double acc = 0.05;     // lane-change impact on surrounding vehicles

  double operator[](int i) const {
    const double* v[5] = {&effort, &exit_x, &exit_y, &vel, &acc};
    return *v[i];
  }
};

struct SafetyConfig {
  double d_safety = 2.7;       // m, safe distance between circle centers
  double chi = 0.9;            // per-step decay of the violation penalty
  double circle_radius = 1.1;  // m
  double sensing_range = 100.0;  // m
  double min_observe_s = 3.0;  // continuous-observation requirement
};

struct MpcConfig {
  int horizon = 16;  // P
  double qp_tol = 1e-6;
  int qp_max_newton = 100;
  double qp_mu_init = 10.0;
  double qp_mu_factor = 0.2;
  double lane_change_complete_tol = 0.2;  // m to target lane center
  double cav_politeness = 0.5;            // rho in the branch-cost incentive
  double v_ref_min = 1.0;  // m/s floor for the linearization speed
  IdmParams nominal_idm;   // used for branch-cost acceleration estimates
};

}  // namespace weavesim
