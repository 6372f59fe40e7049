#include "weavesim/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace weavesim {

namespace {
constexpr double kFree = 1e18;
}

PredictorKind predictor_kind_from_string(const std::string& s) {
  if (s == "cv") return PredictorKind::ConstantVelocity;
  if (s == "idm") return PredictorKind::IdmRollout;
  if (s == "learned") return PredictorKind::Learned;
  throw std::invalid_argument("unknown predictor kind '" + s +
                              "' (expected cv|idm|learned)");
}

std::string to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::ConstantVelocity:
      return "cv";
    case PredictorKind::IdmRollout:
      return "idm";
    case PredictorKind::Learned:
      return "learned";
  }
  return "cv";
}

std::vector<VehicleId> select_surrounding(const VehicleState& sv,
                                          const MpcWorldView& view,
                                          const SafetyConfig& cfg, double dt) {
  // Observation must exceed min_observe_s: strictly more than that many
  // steps of uninterrupted in-range presence.
  const int needed_steps = static_cast<int>(std::floor(cfg.min_observe_s / dt)) + 1;
  const int target_lane =
      sv.current_lane + (sv.dest_lane > sv.current_lane
                             ? 1
                             : (sv.dest_lane < sv.current_lane ? -1 : 0));

  struct Slot {
    double dist = std::numeric_limits<double>::infinity();
    VehicleId id = 0;
    bool used = false;
  };
  Slot slots[4];  // current leader/follower, target leader/follower

  for (const auto& obs : view.others) {
    const VehicleState& v = obs.state;
    if (v.id == sv.id) continue;
    const double range = std::hypot(v.px - sv.px, v.py - sv.py);
    if (range > cfg.sensing_range) continue;
    if (view.history != nullptr) {
      const int streak = view.history->observed_streak(sv.id, v.id,
                                                       cfg.sensing_range,
                                                       needed_steps);
      if (streak < needed_steps) continue;
    }
    int slot = -1;
    if (v.current_lane == sv.current_lane) {
      slot = (v.px >= sv.px) ? 0 : 1;
    } else if (target_lane != sv.current_lane && v.current_lane == target_lane) {
      slot = (v.px >= sv.px) ? 2 : 3;
    }
    if (slot < 0) continue;
    const double d = std::abs(v.px - sv.px);
    if (!slots[slot].used || d < slots[slot].dist) {
      slots[slot] = {d, v.id, true};
    }
  }

  std::vector<VehicleId> out;
  for (const auto& s : slots) {
    if (s.used) out.push_back(s.id);
  }
  return out;
}

std::array<Eigen::Vector2d, 3> circle_centers(const Eigen::Vector2d& cog,
                                              double heading,
                                              const VehicleParams& params) {
  const Eigen::Vector2d dir(std::cos(heading), std::sin(heading));
  return {cog + params.front_axle_to_cog_m * dir, cog,
          cog - params.rear_axle_to_cog_m * dir};
}

std::array<Eigen::Vector2d, 3> circle_centers(const VehicleState& state,
                                              const VehicleParams& params) {
  return circle_centers(Eigen::Vector2d(state.px, state.py), state.heading,
                        params);
}

std::vector<SafetyRow> build_safety_constraints(
    const std::vector<Eigen::Vector4d>& ref_traj,
    const std::vector<NeighborPrediction>& neighbors,
    const VehicleParams& sv_params, const SafetyConfig& cfg) {
  const int P = static_cast<int>(ref_traj.size());
  std::vector<SafetyRow> rows;
  rows.reserve(9 * neighbors.size() * P);

  const double offs[3] = {sv_params.front_axle_to_cog_m, 0.0,
                          -sv_params.rear_axle_to_cog_m};

  for (int t = 1; t <= P; ++t) {
    const Eigen::Vector4d& xr = ref_traj[t - 1];
    const double psi_r = xr(2);
    const double cpsi = std::cos(psi_r);
    const double spsi = std::sin(psi_r);

    for (size_t j = 0; j < neighbors.size(); ++j) {
      const auto& nb = neighbors[j];
      const Eigen::Vector2d nb_cog = nb.cog[t - 1];
      // Neighbor heading over the horizon from consecutive displacements.
      double nb_heading = nb.heading0;
      if (t >= 2) {
        const Eigen::Vector2d disp = nb_cog - nb.cog[t - 2];
        if (disp.norm() > 1e-6) nb_heading = std::atan2(disp.y(), disp.x());
      } else if (nb.cog.size() > 1) {
        const Eigen::Vector2d disp = nb.cog[1] - nb.cog[0];
        if (disp.norm() > 1e-6) nb_heading = std::atan2(disp.y(), disp.x());
      }
      const auto nb_circles = circle_centers(nb_cog, nb_heading, sv_params);

      for (int l = 0; l < 3; ++l) {
        const Eigen::Vector2d sv_center =
            Eigen::Vector2d(xr(0) + offs[l] * cpsi, xr(1) + offs[l] * spsi);
        for (int w = 0; w < 3; ++w) {
          SafetyRow row;
          row.t = t;
          row.neighbor = static_cast<int>(j);
          row.sv_circle = l;
          row.nb_circle = w;
          row.lin_sv = sv_center;
          row.lin_nb = nb_circles[w];
          Eigen::Vector2d diff = sv_center - nb_circles[w];
          const double dist = diff.norm();
          row.ref_gap = dist;
          // Degenerate linearization point: default to the lane-longitudinal
          // axis.
          Eigen::Vector2d n_hat =
              (dist < 1e-6) ? Eigen::Vector2d::UnitX() : Eigen::Vector2d(diff / dist);
          row.direction = n_hat;
          // d dist / d (px, py, psi) at the reference.
          row.grad(0) = n_hat.x();
          row.grad(1) = n_hat.y();
          row.grad(2) = n_hat.dot(Eigen::Vector2d(-offs[l] * spsi, offs[l] * cpsi));
          // Linearized: dist(ref) + grad . (x_t - xref_t) >= d_safety - iota
          row.rhs = cfg.d_safety - dist +
                    row.grad.dot(Eigen::Vector3d(xr(0), xr(1), xr(2)));
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

namespace {

struct BandBounds {
  double lo, hi;
  double terminal;
};

// Lateral band and terminal lateral target for the fixed lane-change
// decision, following the case split on (current lane, destination lane).
BandBounds lateral_band(const VehicleState& sv, int varsigma,
                        const RoadGeometry& geom) {
  const int o = sv.current_lane;
  const int e = sv.dest_lane;
  BandBounds b{geom.lane_border_y[o][0], geom.lane_border_y[o][1],
               geom.lane_center_y[o]};
  if (o < e) {
    if (varsigma == 1) {
      b.hi = geom.lane_border_y[o + 1][1];
      b.terminal = geom.lane_center_y[o + 1];
    }
  } else if (o > e) {
    if (varsigma == 1) {
      b.lo = geom.lane_border_y[o - 1][0];
      b.terminal = geom.lane_center_y[o - 1];
    }
  }
  return b;
}

// Strictly feasible starting point: zero acceleration, a minimum-norm
// steering profile meeting the terminal lateral equality exactly, states by
// exact rollout, and slacks lifted above any linearized violation. Returns
// nothing when the steering correction would leave the control box.
std::optional<Eigen::VectorXd> build_hint(
    const VehicleState& sv, const LtiModel& model, const QpLayout& layout,
    const std::vector<SafetyRow>& safety, const VehicleParams& params,
    double terminal_py) {
  const int P = layout.horizon;
  const double a12 = model.A(1, 2);
  const double b11 = model.B(1, 1);
  const double b21 = model.B(2, 1);

  Eigen::Vector4d x0 = sv.x();

  // Sensitivity of py(P) to the steering input at step t.
  Eigen::VectorXd sens(P);
  for (int t = 0; t < P; ++t) {
    sens(t) = b11 + (P - 1 - t) * a12 * b21;
  }

  // Zero-input rollout for the terminal lateral gap.
  Eigen::Vector4d x = x0;
  for (int t = 0; t < P; ++t) x = model.A * x;
  const double delta_needed = terminal_py - x(1);
  const double s2 = sens.squaredNorm();
  if (s2 < 1e-12) return std::nullopt;

  Eigen::VectorXd steer = (delta_needed / s2) * sens;
  for (int t = 0; t < P; ++t) {
    if (std::abs(steer(t)) > 0.9 * params.u_max[1]) return std::nullopt;
  }

  double accel = 0.0;
  if (x0(3) >= params.x_max[3] - 1e-3) accel = -0.05;
  if (x0(3) <= params.x_min[3] + 1e-3) accel = 0.05;

  Eigen::VectorXd hint = Eigen::VectorXd::Zero(layout.n());
  std::vector<Eigen::Vector4d> states(P + 1);
  states[0] = x0;
  for (int t = 0; t < P; ++t) {
    hint(layout.u(t, 0)) = accel;
    hint(layout.u(t, 1)) = steer(t);
    states[t + 1] = model.A * states[t] +
                    model.B * Eigen::Vector2d(accel, steer(t));
  }
  for (int t = 0; t <= P; ++t) {
    for (int i = 0; i < 4; ++i) hint(layout.x(t, i)) = states[t](i);
  }
  for (size_t r = 0; r < safety.size(); ++r) {
    const SafetyRow& row = safety[r];
    const Eigen::Vector4d& xt = states[row.t];
    const double lhs = row.grad.dot(Eigen::Vector3d(xt(0), xt(1), xt(2)));
    hint(layout.z(static_cast<int>(r))) = std::max(0.0, row.rhs - lhs) + 1.0;
  }
  return hint;
}

}  // namespace

AssembledQp assemble_qp(const VehicleState& sv, int varsigma,
                        const MpcWeights& weights,
                        const std::vector<NeighborPrediction>& neighbors,
                        const LtiModel& model, const RoadGeometry& geometry,
                        const SafetyConfig& safety_cfg, const MpcConfig& cfg,
                        const VehicleParams& params, double v_free,
                        const std::vector<Eigen::Vector4d>& ref_traj) {
  const int P = cfg.horizon;
  std::vector<SafetyRow> safety =
      build_safety_constraints(ref_traj, neighbors, params, safety_cfg);

  AssembledQp out;
  QpLayout& layout = out.layout;
  layout.horizon = P;
  layout.n_z = static_cast<int>(safety.size());
  const int n = layout.n();

  QpProblem& qp = out.problem;
  qp.horizon = P;
  qp.varsigma = varsigma;
  qp.sv_id = sv.id;
  qp.f = Eigen::VectorXd::Zero(n);
  qp.lb = Eigen::VectorXd::Constant(n, -kFree);
  qp.ub = Eigen::VectorXd::Constant(n, kFree);

  std::vector<Eigen::Triplet<double>> h_trip;

  // Control effort: w_eff * sum ||u||^2.
  for (int t = 0; t < P; ++t) {
    for (int i = 0; i < 2; ++i) {
      h_trip.emplace_back(layout.u(t, i), layout.u(t, i), 2.0 * weights.effort);
    }
  }
  // Speed attraction: w_vel * sum_t (v_t - v_free)^2 over t = 1..P.
  double constant = 0.0;
  for (int t = 1; t <= P; ++t) {
    h_trip.emplace_back(layout.x(t, 3), layout.x(t, 3), 2.0 * weights.vel);
    qp.f(layout.x(t, 3)) -= 2.0 * weights.vel * v_free;
    constant += weights.vel * v_free * v_free;
  }
  // Exit attraction at the end of the horizon.
  const double px_hat = sv.px + v_free * P * model.dt_s;
  h_trip.emplace_back(layout.x(P, 0), layout.x(P, 0), 2.0 * weights.exit_x);
  qp.f(layout.x(P, 0)) -= 2.0 * weights.exit_x * px_hat;
  constant += weights.exit_x * px_hat * px_hat;
  const double py_dest = geometry.lane_center_y[sv.dest_lane];
  h_trip.emplace_back(layout.x(P, 1), layout.x(P, 1), 2.0 * weights.exit_y);
  qp.f(layout.x(P, 1)) -= 2.0 * weights.exit_y * py_dest;
  constant += weights.exit_y * py_dest * py_dest;
  out.obj_constant = constant;

  // Reciprocal-force penalty: sum_t chi^t (sum of slacks at t)^2, weight 1.
  {
    std::vector<std::vector<int>> rows_at(P + 1);
    for (size_t r = 0; r < safety.size(); ++r) {
      rows_at[safety[r].t].push_back(static_cast<int>(r));
    }
    for (int t = 1; t <= P; ++t) {
      const double chi_t = std::pow(safety_cfg.chi, t);
      for (int r1 : rows_at[t]) {
        for (int r2 : rows_at[t]) {
          h_trip.emplace_back(layout.z(r1), layout.z(r2), 2.0 * chi_t);
        }
      }
    }
  }

  qp.H.resize(n, n);
  qp.H.setFromTriplets(h_trip.begin(), h_trip.end());

  // Equalities: initial condition, dynamics, terminal lateral position.
  const BandBounds band = lateral_band(sv, varsigma, geometry);
  std::vector<Eigen::Triplet<double>> eq_trip;
  const int m_eq = 4 + 4 * P + 1;
  qp.b_eq = Eigen::VectorXd::Zero(m_eq);
  int row = 0;
  const Eigen::Vector4d x_now = sv.x();
  for (int i = 0; i < 4; ++i) {
    eq_trip.emplace_back(row, layout.x(0, i), 1.0);
    qp.b_eq(row++) = x_now(i);
  }
  for (int t = 0; t < P; ++t) {
    for (int i = 0; i < 4; ++i) {
      eq_trip.emplace_back(row, layout.x(t + 1, i), 1.0);
      for (int j = 0; j < 4; ++j) {
        if (model.A(i, j) != 0.0) {
          eq_trip.emplace_back(row, layout.x(t, j), -model.A(i, j));
        }
      }
      for (int j = 0; j < 2; ++j) {
        if (model.B(i, j) != 0.0) {
          eq_trip.emplace_back(row, layout.u(t, j), -model.B(i, j));
        }
      }
      qp.b_eq(row++) = 0.0;
    }
  }
  eq_trip.emplace_back(row, layout.x(P, 1), 1.0);
  qp.b_eq(row++) = band.terminal;
  qp.A_eq.resize(m_eq, n);
  qp.A_eq.setFromTriplets(eq_trip.begin(), eq_trip.end());

  // Boxes. x(0) is pinned by the initial condition, so its boxes stay open.
  for (int t = 0; t < P; ++t) {
    for (int i = 0; i < 2; ++i) {
      qp.lb(layout.u(t, i)) = params.u_min[i];
      qp.ub(layout.u(t, i)) = params.u_max[i];
    }
  }
  for (int t = 1; t <= P; ++t) {
    qp.lb(layout.x(t, 1)) = band.lo;
    qp.ub(layout.x(t, 1)) = band.hi;
    qp.lb(layout.x(t, 2)) = params.x_min[2];
    qp.ub(layout.x(t, 2)) = params.x_max[2];
    qp.lb(layout.x(t, 3)) = params.x_min[3];
    qp.ub(layout.x(t, 3)) = params.x_max[3];
  }
  for (int r = 0; r < layout.n_z; ++r) qp.lb(layout.z(r)) = 0.0;

  // Linearized circle-separation rows: -grad . x_t - iota <= -rhs.
  std::vector<Eigen::Triplet<double>> in_trip;
  qp.b_in = Eigen::VectorXd::Zero(layout.n_z);
  for (size_t r = 0; r < safety.size(); ++r) {
    const SafetyRow& s = safety[r];
    const int ri = static_cast<int>(r);
    for (int i = 0; i < 3; ++i) {
      if (s.grad(i) != 0.0) in_trip.emplace_back(ri, layout.x(s.t, i), -s.grad(i));
    }
    in_trip.emplace_back(ri, layout.z(ri), -1.0);
    qp.b_in(ri) = -s.rhs;
  }
  qp.A_in.resize(layout.n_z, n);
  qp.A_in.setFromTriplets(in_trip.begin(), in_trip.end());

  qp.x0_hint = build_hint(sv, model, layout, safety, params, band.terminal);
  return out;
}

namespace {

// CAV neighbor positions over steps k+1..k+P from its step-(k-1) plan
// (states k..k+P-1), extrapolated one step at constant velocity.
std::vector<Eigen::Vector2d> positions_from_plan(
    const std::vector<Eigen::Vector4d>& plan, int P) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(P);
  const int n = static_cast<int>(plan.size());
  for (int t = 1; t <= P; ++t) {
    if (t < n) {
      out.emplace_back(plan[t](0), plan[t](1));
    } else if (n >= 2) {
      const Eigen::Vector2d last(plan[n - 1](0), plan[n - 1](1));
      const Eigen::Vector2d prev(plan[n - 2](0), plan[n - 2](1));
      out.push_back(last + (t - n + 1) * (last - prev));
    } else if (n == 1) {
      out.emplace_back(plan[0](0), plan[0](1));
    }
  }
  return out;
}

std::vector<Eigen::Vector2d> constant_velocity_positions(const VehicleState& v,
                                                         int P, double dt) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(P);
  for (int t = 1; t <= P; ++t) {
    out.emplace_back(v.px + t * dt * v.speed,
                     v.py + t * dt * v.speed * v.heading);
  }
  return out;
}

}  // namespace

MpcStepResult mpc_step(const MpcStepInput& in) {
  const MpcConfig& cfg = *in.cfg;
  const int P = cfg.horizon;
  MpcStepResult result;

  const double v_ref = std::max(in.sv.speed, cfg.v_ref_min);
  const LtiModel model = linearize_discretize(*in.params, v_ref, in.dt);

  // Surrounding set and its predicted trajectories.
  const std::vector<VehicleId> selected =
      select_surrounding(in.sv, in.view, *in.safety, in.dt);
  std::map<VehicleId, const ObservedVehicle*> by_id;
  for (const auto& o : in.view.others) by_id[o.state.id] = &o;

  std::vector<VehicleId> hv_ids;
  std::vector<NeighborPrediction> predictions;
  for (VehicleId id : selected) {
    const ObservedVehicle* obs = by_id.at(id);
    if (obs->state.kind == VehicleKind::Hv) {
      hv_ids.push_back(id);
    } else {
      NeighborPrediction np;
      np.id = id;
      np.heading0 = obs->state.heading;
      const auto* plans = in.view.cav_plans;
      bool have_plan = false;
      if (plans != nullptr) {
        auto it = plans->find(id);
        if (it != plans->end() && !it->second.empty()) {
          np.cog = positions_from_plan(it->second, P);
          have_plan = true;
        }
      }
      if (!have_plan) {
        np.cog = constant_velocity_positions(obs->state, P, in.dt);
      }
      predictions.push_back(std::move(np));
    }
  }

  if (!hv_ids.empty()) {
    NeighborFeatures features;
    PredictedTrajectories hv_trajs;
    switch (in.predictor) {
      case PredictorKind::ConstantVelocity: {
        features = build_neighbor_features(in.sv.id, hv_ids, *in.view.history,
                                           in.t_in);
        hv_trajs = predict_constant_velocity(features, P, in.dt);
        break;
      }
      case PredictorKind::IdmRollout: {
        features = build_neighbor_features(in.sv.id, hv_ids, *in.view.history,
                                           in.t_in);
        // Rollout context: everything within sensing range, leaders resolved
        // per current lane.
        std::vector<RolloutVehicle> ctx;
        for (const auto& o : in.view.others) {
          if (std::hypot(o.state.px - in.sv.px, o.state.py - in.sv.py) >
              in.safety->sensing_range) {
            continue;
          }
          RolloutVehicle rv;
          rv.id = o.state.id;
          rv.px = o.state.px;
          rv.py = o.state.py;
          rv.speed = o.state.speed;
          rv.body_length = in.params->body_length_m;
          ctx.push_back(rv);
        }
        for (auto& rv : ctx) {
          double best = std::numeric_limits<double>::infinity();
          const int lane = by_id.at(rv.id)->state.current_lane;
          for (const auto& other : ctx) {
            if (other.id == rv.id) continue;
            if (by_id.at(other.id)->state.current_lane != lane) continue;
            const double dx = other.px - rv.px;
            if (dx > 0.0 && dx < best) {
              best = dx;
              rv.leader = other.id;
            }
          }
        }
        hv_trajs = predict_idm_rollout(features, ctx, P, in.dt, cfg.nominal_idm);
        break;
      }
      case PredictorKind::Learned: {
        if (in.model == nullptr) {
          throw std::invalid_argument("mpc_step: learned predictor without model");
        }
        features = build_neighbor_features(in.sv.id, hv_ids, *in.view.history,
                                           in.t_in);
        hv_trajs = predict_learned(*in.model, features, P);
        break;
      }
    }
    for (VehicleId id : hv_ids) {
      auto it = hv_trajs.positions.find(id);
      if (it == hv_trajs.positions.end()) continue;
      NeighborPrediction np;
      np.id = id;
      np.heading0 = by_id.at(id)->state.heading;
      np.cog = it->second;
      predictions.push_back(std::move(np));
    }
  }

  // Reference trajectory for the safety linearization: previous plan shifted
  // by one step, constant-speed lane keeping on a cold start.
  std::vector<Eigen::Vector4d> ref(P);
  if (in.prev_plan != nullptr &&
      static_cast<int>(in.prev_plan->size()) == P) {
    for (int t = 1; t < P; ++t) ref[t - 1] = (*in.prev_plan)[t];
    ref[P - 1] = model.A * (*in.prev_plan)[P - 1];
  } else {
    Eigen::Vector4d x = in.sv.x();
    for (int t = 0; t < P; ++t) {
      x = model.A * x;
      ref[t] = x;
    }
  }

  // Admissible lane-change decisions.
  const int o = in.sv.current_lane;
  const int e = in.sv.dest_lane;
  std::vector<int> branches;
  if (in.change_in_progress && o == in.change_origin) {
    branches = {1};  // change continues until the border is crossed
  } else if (in.change_in_progress) {
    branches = {0};  // crossed, completing: no new decision yet
  } else if (o == e) {
    branches = {0};
  } else {
    branches = {0, 1};
  }

  // Lane-change impact term, constant per branch: penalizes the adverse part
  // of the IDM-estimated MOBIL balance (positive incentive = beneficial, so
  // the penalized quantity is max(0, -incentive)).
  double adverse_impact = 0.0;
  if (o != e) {
    std::vector<const VehicleState*> states;
    states.reserve(in.view.others.size());
    for (const auto& ov : in.view.others) states.push_back(&ov.state);
    const NeighborView nv =
        build_neighbor_view(in.sv, states, in.params->body_length_m);
    const MobilAssessment a = assess_mobil(in.sv, nv, cfg.nominal_idm);
    MobilParams mp;
    mp.politeness = cfg.cav_politeness;
    const double incentive =
        mobil_incentive(a.ego, a.new_follower, a.old_follower, mp);
    adverse_impact = std::max(0.0, -incentive);
  }

  QpSolverOptions opts;
  opts.tol = cfg.qp_tol;
  opts.max_newton = cfg.qp_max_newton;
  opts.mu_init = cfg.qp_mu_init;
  opts.mu_factor = cfg.qp_mu_factor;

  bool have_best = false;
  double best_cost = std::numeric_limits<double>::infinity();
  int best_varsigma = 0;
  Eigen::VectorXd best_x;
  QpLayout best_layout;

  for (int vs : branches) {
    AssembledQp built =
        assemble_qp(in.sv, vs, in.weights, predictions, model, *in.geometry,
                    *in.safety, cfg, *in.params, in.v_free, ref);
    QpSolution sol = solve_qp(built.problem, opts);
    ++result.qps_solved;
    result.branch_attempted[vs] = true;
    result.branch_status[vs] = sol.status;
    if (sol.status != QpStatus::Optimal) continue;
    double cost = sol.objective + built.obj_constant;
    if (vs == 1) cost += in.weights.acc * adverse_impact;
    result.branch_cost[vs] = cost;
    // Ties break to lane keeping: branch 0 is evaluated first and only a
    // strictly lower cost replaces it.
    if (!have_best || cost < best_cost) {
      have_best = true;
      best_cost = cost;
      best_varsigma = vs;
      best_x = sol.x;
      best_layout = built.layout;
    }
  }

  if (!have_best) {
    // Emergency fallback: full braking, zero steering.
    result.fallback = true;
    result.varsigma = 0;
    result.control = {in.params->u_min[0], 0.0};
    result.plan.clear();
    VehicleState s = in.sv;
    for (int t = 0; t < P; ++t) {
      s = step_nonlinear(s, result.control, in.dt, *in.params);
      result.plan.push_back(s.x());
    }
    result.cost = std::numeric_limits<double>::infinity();
    return result;
  }

  result.varsigma = best_varsigma;
  result.cost = best_cost;
  result.control = {best_x(best_layout.u(0, 0)), best_x(best_layout.u(0, 1))};
  result.plan.reserve(P);
  for (int t = 1; t <= P; ++t) {
    result.plan.emplace_back(best_x(best_layout.x(t, 0)),
                             best_x(best_layout.x(t, 1)),
                             best_x(best_layout.x(t, 2)),
                             best_x(best_layout.x(t, 3)));
  }
  return result;
}

}  // namespace weavesim
