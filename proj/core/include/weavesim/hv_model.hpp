#pragma once

#include <limits>
#include <optional>
#include <utility>

#include "weavesim/dynamics.hpp"
#include "weavesim/rng.hpp"

namespace weavesim {

// Intelligent Driver Model parameters. a_min is the comfortable braking
// magnitude that enters sqrt(a_max * a_min); a_hard is the emergency clamp
// applied to the returned acceleration.
struct IdmParams {
  double a_max = 2.0;   // m/s^2
  double a_min = 3.0;   // m/s^2, positive magnitude
  double tau = 1.5;     // desired time headway, s
  double d_jam = 2.0;   // jam spacing, m
  double v_free = 27.78;  // m/s
  double a_hard = 9.0;  // m/s^2, positive magnitude, output floor is -a_hard
};

struct MobilParams {
  double politeness = 0.5;  // rho in [0, 1]
  double threshold = 0.1;   // m/s^2, incentive needed to trigger a change
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct HvBehaviorRanges {
  Range a_max{1.5, 2.5};
  Range a_min{2.5, 3.5};
  Range tau{1.2, 1.8};
  Range d_jam{1.5, 2.5};
  Range v_free{23.6, 27.78};
  Range politeness{0.3, 0.7};
  Range threshold{0.1, 0.3};
  double a_hard = 9.0;
};

// IDM follower acceleration.
//   accel = a_max [1 - (v/v_free)^4 - (d*/gap)^2]
//   d*    = d_jam + tau v + v dv / (2 sqrt(a_max a_min)),  floored at d_jam
// dv is the closing speed (own speed minus leader speed). Pass
// gap = +infinity when there is no leader. The result is clamped to
// [-a_hard, a_max]. Throws std::invalid_argument for gap <= 0 so the caller
// can treat an overlap as an emergency.
double idm_acceleration(double v, double gap, double dv, const IdmParams& p);

// Net equilibrium gap at speed v (dv = 0), where the IDM acceleration is
// exactly zero. Valid for 0 <= v < v_free.
double idm_equilibrium_gap(double v, const IdmParams& p);

// Acceleration of one vehicle before (first) and after (second) a
// prospective lane change.
struct AccelPair {
  double before = 0.0;
  double after = 0.0;
};

// MOBIL incentive. Sign convention: the returned value is positive when the
// change is beneficial overall,
//   B = (after - before)_ego
//     + politeness * ((after - before)_new_follower + (after - before)_old_follower).
// A vehicle without a follower on either side contributes a zero pair.
double mobil_incentive(const AccelPair& ego, const AccelPair& new_follower,
                       const AccelPair& old_follower, const MobilParams& p);

// What an HV can see around itself: net gaps (bumper to bumper, m) and
// speeds of the nearest leader/follower on its own lane and on the adjacent
// lane toward its destination.
struct Neighbor {
  double gap = std::numeric_limits<double>::infinity();
  double speed = 0.0;
};

struct LaneNeighbors {
  std::optional<Neighbor> leader;
  std::optional<Neighbor> follower;
};

struct NeighborView {
  LaneNeighbors current;
  std::optional<LaneNeighbors> target;  // absent when already on dest lane
  double ego_body_length = 4.5;
};

struct HvDecision {
  double accel = 0.0;
  int lane_change = 0;  // 0: keep lane; +1/-1: toward destination
};

// IDM-estimated before/after pairs for a prospective change toward the
// destination lane, shared between the HV rule and the CAV branch cost.
struct MobilAssessment {
  AccelPair ego;
  AccelPair new_follower;
  AccelPair old_follower;
  double new_follower_after = 0.0;
  bool has_new_follower = false;
  bool target_overlap = false;  // a target-lane vehicle overlaps the ego
};

MobilAssessment assess_mobil(const VehicleState& ego, const NeighborView& view,
                             const IdmParams& p_idm);

// Rule-based human driver: IDM against the current leader, MOBIL-triggered
// mandatory lane changes toward the destination lane only. A change is
// proposed iff the incentive exceeds p_mobil.threshold and the prospective
// new follower would not need to brake harder than p_idm.a_min.
HvDecision hv_decide(const VehicleState& ego, const NeighborView& view,
                     const IdmParams& p_idm, const MobilParams& p_mobil);

// Assembles the neighbor view of `ego` from raw vehicle states, using the
// current_lane fields for lane membership. Gaps are net: longitudinal center
// distance minus body_length.
NeighborView build_neighbor_view(const VehicleState& ego,
                                 const std::vector<const VehicleState*>& others,
                                 double body_length);

// Independent uniform draws per field. Throws std::invalid_argument when a
// range has lo > hi.
std::pair<IdmParams, MobilParams> sample_hv_params(RngStream& rng,
                                                   const HvBehaviorRanges& r);

}  // namespace weavesim
