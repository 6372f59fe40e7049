#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <vector>

#include "weavesim/dynamics.hpp"
#include "weavesim/history.hpp"
#include "weavesim/mpc_types.hpp"
#include "weavesim/predictor.hpp"
#include "weavesim/qp.hpp"
#include "weavesim/scenario.hpp"

namespace weavesim {

// Snapshot view the lower-level controller consumes. `others` holds every
// other vehicle currently on the road; `cav_plans` the trajectories shared
// over V2V at the previous step (states k .. k+P-1 planned at k-1).
struct MpcWorldView {
  std::vector<ObservedVehicle> others;
  const StateHistory* history = nullptr;
  const std::map<VehicleId, std::vector<Eigen::Vector4d>>* cav_plans = nullptr;
};

// The surrounding set M: nearest leader/follower on the current lane and on
// the adjacent lane toward the destination, each within sensing range and
// continuously observed for more than min_observe_s. At most four vehicles.
std::vector<VehicleId> select_surrounding(const VehicleState& sv,
                                          const MpcWorldView& view,
                                          const SafetyConfig& cfg, double dt);

// Front-axle, COG, and rear-axle circle centers, heading-rotated.
std::array<Eigen::Vector2d, 3> circle_centers(const VehicleState& state,
                                              const VehicleParams& params);
std::array<Eigen::Vector2d, 3> circle_centers(const Eigen::Vector2d& cog,
                                              double heading,
                                              const VehicleParams& params);

// Predicted COG positions of one surrounding vehicle over steps k+1..k+P.
struct NeighborPrediction {
  VehicleId id = 0;
  std::vector<Eigen::Vector2d> cog;
  double heading0 = 0.0;
};

// One linearized circle-pair separation constraint
//   grad . (p_x, p_y, psi)_t >= rhs - iota
// obtained by first-order expansion of the distance about the reference
// trajectory. direction is the unit vector from the neighbor circle to the
// SV circle at the linearization point (lane-longitudinal axis when the
// points coincide), ref_gap the distance there.
struct SafetyRow {
  int t = 1;                  // 1..P
  int neighbor = 0;           // index into the prediction list
  int sv_circle = 0, nb_circle = 0;
  Eigen::Vector3d grad = Eigen::Vector3d::Zero();
  double rhs = 0.0;
  Eigen::Vector2d direction = Eigen::Vector2d::UnitX();
  Eigen::Vector2d lin_sv = Eigen::Vector2d::Zero();
  Eigen::Vector2d lin_nb = Eigen::Vector2d::Zero();
  double ref_gap = 0.0;
};

// Emits exactly 9 * neighbors * P rows (every circle pair at every step).
// The matching iota >= 0 rows are added when the rows are assembled into a
// QP. ref_traj holds the P reference states for steps k+1..k+P.
std::vector<SafetyRow> build_safety_constraints(
    const std::vector<Eigen::Vector4d>& ref_traj,
    const std::vector<NeighborPrediction>& neighbors,
    const VehicleParams& sv_params, const SafetyConfig& cfg);

// Index helper for the stacked decision vector [U | X | Z]:
// U = u(k..k+P-1), X = x(k..k+P), Z = one slack per safety row.
struct QpLayout {
  int horizon = 0;
  int n_z = 0;
  int u(int t, int i) const { return 2 * t + i; }
  int x(int t, int i) const { return 2 * horizon + 4 * t + i; }
  int z(int r) const { return 2 * horizon + 4 * (horizon + 1) + r; }
  int n() const { return 2 * horizon + 4 * (horizon + 1) + n_z; }
};

struct AssembledQp {
  QpProblem problem;
  QpLayout layout;
  double obj_constant = 0.0;  // completing-the-square constants
};

// Builds the branch QP for a fixed lane-change decision varsigma.
AssembledQp assemble_qp(const VehicleState& sv, int varsigma,
                        const MpcWeights& weights,
                        const std::vector<NeighborPrediction>& neighbors,
                        const LtiModel& model, const RoadGeometry& geometry,
                        const SafetyConfig& safety_cfg, const MpcConfig& cfg,
                        const VehicleParams& params, double v_free,
                        const std::vector<Eigen::Vector4d>& ref_traj);

enum class PredictorKind { ConstantVelocity, IdmRollout, Learned };

PredictorKind predictor_kind_from_string(const std::string& s);
std::string to_string(PredictorKind kind);

struct MpcStepInput {
  VehicleState sv;
  const VehicleParams* params = nullptr;
  MpcWeights weights;
  const RoadGeometry* geometry = nullptr;
  const SafetyConfig* safety = nullptr;
  const MpcConfig* cfg = nullptr;
  double v_free = 27.78;
  double dt = 0.2;
  int t_in = 10;

  // Lane-change execution state maintained by the simulator.
  bool change_in_progress = false;
  int change_origin = 0;
  int change_target = 0;

  const std::vector<Eigen::Vector4d>* prev_plan = nullptr;  // states k..k+P-1
  MpcWorldView view;

  PredictorKind predictor = PredictorKind::ConstantVelocity;
  const PredictorModel* model = nullptr;
};

struct MpcStepResult {
  ControlInput control;
  int varsigma = 0;
  bool fallback = false;
  std::vector<Eigen::Vector4d> plan;  // states k+1..k+P
  double cost = 0.0;
  int qps_solved = 0;
  std::array<bool, 2> branch_attempted{false, false};
  std::array<QpStatus, 2> branch_status{QpStatus::MaxIter, QpStatus::MaxIter};
  std::array<double, 2> branch_cost{0.0, 0.0};
};

// Full receding-horizon step: neighbor selection, HV prediction, branch
// enumeration over admissible lane-change decisions, and first-control
// extraction. Falls back to full braking with zero steering when every
// admissible branch is infeasible (flagged in the result).
MpcStepResult mpc_step(const MpcStepInput& in);

}  // namespace weavesim
