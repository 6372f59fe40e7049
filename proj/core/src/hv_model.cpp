#include "weavesim/hv_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace weavesim {

double idm_acceleration(double v, double gap, double dv, const IdmParams& p) {
  if (!(gap > 0.0)) {
    throw std::invalid_argument("idm_acceleration: gap must be positive");
  }
  const double free_term = std::pow(v / p.v_free, 4.0);
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    double d_star =
        p.d_jam + p.tau * v + v * dv / (2.0 * std::sqrt(p.a_max * p.a_min));
    d_star = std::max(d_star, p.d_jam);
    interaction = (d_star / gap) * (d_star / gap);
  }
  const double accel = p.a_max * (1.0 - free_term - interaction);
  return std::clamp(accel, -p.a_hard, p.a_max);
}

double idm_equilibrium_gap(double v, const IdmParams& p) {
  const double deficit = 1.0 - std::pow(v / p.v_free, 4.0);
  if (deficit <= 0.0) {
    throw std::invalid_argument("idm_equilibrium_gap: requires v < v_free");
  }
  return (p.d_jam + p.tau * v) / std::sqrt(deficit);
}

double mobil_incentive(const AccelPair& ego, const AccelPair& new_follower,
                       const AccelPair& old_follower, const MobilParams& p) {
  const double ego_gain = ego.after - ego.before;
  const double nf_gain = new_follower.after - new_follower.before;
  const double of_gain = old_follower.after - old_follower.before;
  return ego_gain + p.politeness * (nf_gain + of_gain);
}

namespace {

double safe_idm(double v, double gap, double dv, const IdmParams& p) {
  if (!(gap > 0.0)) return -p.a_hard;
  return idm_acceleration(v, gap, dv, p);
}

double leader_accel(double v, const std::optional<Neighbor>& leader,
                    const IdmParams& p) {
  if (!leader) {
    return safe_idm(v, std::numeric_limits<double>::infinity(), 0.0, p);
  }
  return safe_idm(v, leader->gap, v - leader->speed, p);
}

}  // namespace

MobilAssessment assess_mobil(const VehicleState& ego, const NeighborView& view,
                             const IdmParams& p_idm) {
  MobilAssessment a;
  a.ego.before = leader_accel(ego.speed, view.current.leader, p_idm);
  if (!view.target) return a;
  const LaneNeighbors& tgt = *view.target;
  a.target_overlap = (tgt.leader && tgt.leader->gap <= 0.0) ||
                     (tgt.follower && tgt.follower->gap <= 0.0);
  if (a.target_overlap) return a;

  a.ego.after = leader_accel(ego.speed, tgt.leader, p_idm);

  // New follower: currently trails the target-lane leader, afterwards trails
  // the ego. Gaps to its prospective leaders are reconstructed from the
  // ego-relative gaps.
  a.has_new_follower = tgt.follower.has_value();
  if (a.has_new_follower) {
    const Neighbor& nf = *tgt.follower;
    double before_gap = std::numeric_limits<double>::infinity();
    double before_dv = 0.0;
    if (tgt.leader) {
      before_gap = tgt.leader->gap + nf.gap + view.ego_body_length;
      before_dv = nf.speed - tgt.leader->speed;
    }
    a.new_follower.before = safe_idm(nf.speed, before_gap, before_dv, p_idm);
    a.new_follower_after = safe_idm(nf.speed, nf.gap, nf.speed - ego.speed, p_idm);
    a.new_follower.after = a.new_follower_after;
  }

  // Old follower: currently trails the ego, afterwards trails the ego's
  // current leader.
  if (view.current.follower) {
    const Neighbor& of = *view.current.follower;
    a.old_follower.before = safe_idm(of.speed, of.gap, of.speed - ego.speed, p_idm);
    double after_gap = std::numeric_limits<double>::infinity();
    double after_dv = 0.0;
    if (view.current.leader) {
      after_gap = view.current.leader->gap + of.gap + view.ego_body_length;
      after_dv = of.speed - view.current.leader->speed;
    }
    a.old_follower.after = safe_idm(of.speed, after_gap, after_dv, p_idm);
  }
  return a;
}

HvDecision hv_decide(const VehicleState& ego, const NeighborView& view,
                     const IdmParams& p_idm, const MobilParams& p_mobil) {
  HvDecision decision;
  decision.accel = leader_accel(ego.speed, view.current.leader, p_idm);

  // Mandatory changes only: nothing to do once on the destination lane.
  if (ego.current_lane == ego.dest_lane || !view.target) return decision;

  const MobilAssessment a = assess_mobil(ego, view, p_idm);
  if (a.target_overlap) return decision;

  const double incentive =
      mobil_incentive(a.ego, a.new_follower, a.old_follower, p_mobil);
  const bool safety_ok = !a.has_new_follower || a.new_follower_after >= -p_idm.a_min;
  if (incentive > p_mobil.threshold && safety_ok) {
    decision.lane_change = (ego.dest_lane > ego.current_lane) ? 1 : -1;
  }
  return decision;
}

NeighborView build_neighbor_view(const VehicleState& ego,
                                 const std::vector<const VehicleState*>& others,
                                 double body_length) {
  NeighborView view;
  view.ego_body_length = body_length;
  const int target_lane =
      ego.current_lane + (ego.dest_lane > ego.current_lane
                              ? 1
                              : (ego.dest_lane < ego.current_lane ? -1 : 0));
  if (target_lane != ego.current_lane) view.target = LaneNeighbors{};

  auto consider = [&](LaneNeighbors& lane, const VehicleState& v) {
    const double dx = v.px - ego.px;
    Neighbor n{std::abs(dx) - body_length, v.speed};
    if (dx >= 0.0) {
      if (!lane.leader || n.gap < lane.leader->gap) lane.leader = n;
    } else {
      if (!lane.follower || n.gap < lane.follower->gap) lane.follower = n;
    }
  };

  for (const VehicleState* v : others) {
    if (v->id == ego.id) continue;
    if (v->current_lane == ego.current_lane) {
      consider(view.current, *v);
    } else if (view.target && v->current_lane == target_lane) {
      consider(*view.target, *v);
    }
  }
  return view;
}

std::pair<IdmParams, MobilParams> sample_hv_params(RngStream& rng,
                                                   const HvBehaviorRanges& r) {
  auto draw = [&rng](const Range& range, const char* name) {
    if (range.lo > range.hi) {
      throw std::invalid_argument(std::string("sample_hv_params: invalid range for ") + name);
    }
    return rng.uniform(range.lo, range.hi);
  };
  IdmParams idm;
  idm.a_max = draw(r.a_max, "a_max");
  idm.a_min = draw(r.a_min, "a_min");
  idm.tau = draw(r.tau, "tau");
  idm.d_jam = draw(r.d_jam, "d_jam");
  idm.v_free = draw(r.v_free, "v_free");
  idm.a_hard = r.a_hard;
  MobilParams mobil;
  mobil.politeness = draw(r.politeness, "politeness");
  mobil.threshold = draw(r.threshold, "threshold");
  return {idm, mobil};
}

}  // namespace weavesim
