#include "weavesim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace weavesim {

using nlohmann::json;

int RoadGeometry::longitudinal_cell(double px) const {
  const int c = static_cast<int>(std::floor(px / cell_length()));
  return std::clamp(c, 0, cells_per_lane - 1);
}

int RoadGeometry::cell_index(int lane, double px) const {
  return lane * cells_per_lane + longitudinal_cell(px);
}

int RoadGeometry::lane_of(double py) const {
  const int l = static_cast<int>(std::floor(py / lane_width_m));
  return std::clamp(l, 0, lanes - 1);
}

void RoadGeometry::derive() {
  lane_center_y.resize(lanes);
  lane_border_y.resize(lanes);
  for (int l = 0; l < lanes; ++l) {
    lane_border_y[l] = {l * lane_width_m, (l + 1) * lane_width_m};
    lane_center_y[l] = (l + 0.5) * lane_width_m;
  }
}

double DemandSpec::total_rate() const {
  double total = 0.0;
  for (const auto& row : arrival_rate_veh_per_h) {
    for (double r : row) total += r;
  }
  return total;
}

std::string to_string(ControllerMode mode) {
  switch (mode) {
    case ControllerMode::Hdm:
      return "hdm";
    case ControllerMode::MpcOnly:
      return "mpc";
    case ControllerMode::BiLevelL:
      return "bilevel-l";
    case ControllerMode::BiLevelG:
      return "bilevel-g";
  }
  return "hdm";
}

ControllerMode controller_mode_from_string(const std::string& s) {
  if (s == "hdm") return ControllerMode::Hdm;
  if (s == "mpc") return ControllerMode::MpcOnly;
  if (s == "bilevel-l") return ControllerMode::BiLevelL;
  if (s == "bilevel-g") return ControllerMode::BiLevelG;
  throw ConfigError("controller_mode: unknown mode '" + s +
                    "' (expected hdm|mpc|bilevel-l|bilevel-g)");
}

namespace {

// Tracks which keys were consumed so unknown keys can be rejected.
class Reader {
 public:
  explicit Reader(const json& j) : j_(j) {}

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  double num(const std::string& key, double def) {
    seen_.insert(key);
    if (!j_.contains(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(key + ": expected a number");
    return v.get<double>();
  }

  int integer(const std::string& key, int def) {
    seen_.insert(key);
    if (!j_.contains(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(key + ": expected an integer");
    return v.get<int>();
  }

  std::string str(const std::string& key, const std::string& def) {
    seen_.insert(key);
    if (!j_.contains(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(key + ": expected a string");
    return v.get<std::string>();
  }

  Range range(const std::string& key, Range def) {
    seen_.insert(key);
    if (!j_.contains(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ConfigError(key + ": expected [lo, hi]");
    }
    Range r{v[0].get<double>(), v[1].get<double>()};
    if (r.lo > r.hi) throw ConfigError(key + ": lo must be <= hi");
    return r;
  }

  std::vector<int> int_list(const std::string& key, std::vector<int> def) {
    seen_.insert(key);
    if (!j_.contains(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(key + ": expected an integer array");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<int>() <= 0) {
        throw ConfigError(key + ": entries must be positive integers");
      }
      out.push_back(e.get<int>());
    }
    return out;
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (seen_.count(it.key()) == 0) {
        throw ConfigError("unknown key '" + it.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::set<std::string> seen_;
};

void require(bool cond, const std::string& field, const std::string& what) {
  if (!cond) throw ConfigError(field + ": " + what);
}

}  // namespace

Scenario Scenario::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("scenario: expected a JSON object");
  Reader r(j);
  Scenario s;

  s.name = r.str("name", "unnamed");

  s.geometry.lanes = r.integer("lanes", 3);
  require(s.geometry.lanes >= 1, "lanes", "must be >= 1");
  s.geometry.length_m = r.num("length_m", 535.0);
  require(s.geometry.length_m > 0, "length_m", "must be > 0");
  s.geometry.lane_width_m = r.num("lane_width_m", 3.5);
  require(s.geometry.lane_width_m > 0, "lane_width_m", "must be > 0");
  s.geometry.cells_per_lane = r.integer("cells_per_lane", 20);
  require(s.geometry.cells_per_lane >= 1, "cells_per_lane", "must be >= 1");
  s.geometry.derive();

  s.demand.dt_s = r.num("dt_s", 0.2);
  require(s.demand.dt_s > 0, "dt_s", "must be > 0");
  s.demand.horizon_steps = r.integer("horizon_steps", 18000);
  require(s.demand.horizon_steps >= 0, "horizon_steps", "must be >= 0");
  s.demand.cav_penetration = r.num("cav_penetration", 0.2);
  require(s.demand.cav_penetration >= 0.0 && s.demand.cav_penetration <= 1.0,
          "cav_penetration", "must be in [0, 1]");

  const int L = s.geometry.lanes;
  if (r.has("arrival_rates_veh_per_h")) {
    const json& m = r.raw("arrival_rates_veh_per_h");
    require(m.is_array() && static_cast<int>(m.size()) == L,
            "arrival_rates_veh_per_h", "must be a lanes x lanes matrix");
    for (const auto& row : m) {
      require(row.is_array() && static_cast<int>(row.size()) == L,
              "arrival_rates_veh_per_h", "must be a lanes x lanes matrix");
      std::vector<double> out;
      for (const auto& e : row) {
        require(e.is_number() && e.get<double>() >= 0.0,
                "arrival_rates_veh_per_h", "rates must be >= 0");
        out.push_back(e.get<double>());
      }
      s.demand.arrival_rate_veh_per_h.push_back(out);
    }
  } else {
    // Default evening-peak style demand: two main lanes plus one auxiliary
    // lane with crossing merge/diverge flows.
    s.demand.arrival_rate_veh_per_h.assign(L, std::vector<double>(L, 0.0));
    if (L == 3) {
      s.demand.arrival_rate_veh_per_h[0][0] = 1400.0;
      s.demand.arrival_rate_veh_per_h[1][1] = 1000.0;
      s.demand.arrival_rate_veh_per_h[1][2] = 600.0;
      s.demand.arrival_rate_veh_per_h[2][1] = 800.0;
      s.demand.arrival_rate_veh_per_h[2][2] = 200.0;
    } else {
      for (int l = 0; l < L; ++l) s.demand.arrival_rate_veh_per_h[l][l] = 1000.0;
    }
  }

  s.free_flow_speed = r.num("free_flow_speed_mps", 27.78);
  require(s.free_flow_speed > 0, "free_flow_speed_mps", "must be > 0");
  s.entry_speed = r.num("entry_speed_mps", 22.0);
  require(s.entry_speed > 0, "entry_speed_mps", "must be > 0");

  VehicleParams& vp = s.vehicle;
  vp.axle_length_m = r.num("axle_length_m", 2.8);
  vp.front_axle_to_cog_m = r.num("front_axle_to_cog_m", 1.4);
  vp.rear_axle_to_cog_m = r.num("rear_axle_to_cog_m", 1.4);
  require(std::abs(vp.axle_length_m -
                   (vp.front_axle_to_cog_m + vp.rear_axle_to_cog_m)) <= 1e-9,
          "axle_length_m", "must equal front_axle_to_cog_m + rear_axle_to_cog_m");
  vp.body_length_m = r.num("body_length_m", 4.5);
  require(vp.body_length_m > 0, "body_length_m", "must be > 0");
  vp.body_width_m = r.num("body_width_m", 1.8);
  require(vp.body_width_m > 0, "body_width_m", "must be > 0");

  const double v_min = r.num("speed_min_mps", 0.0);
  const double v_max = r.num("speed_max_mps", 30.0);
  const double psi_bound = r.num("heading_bound_rad", 0.35);
  const double a_lo = r.num("accel_min_mps2", -6.0);
  const double a_hi = r.num("accel_max_mps2", 3.0);
  const double steer_bound = r.num("steer_bound_rad", 0.15);
  require(v_min <= v_max, "speed_min_mps", "must be <= speed_max_mps");
  require(a_lo <= a_hi, "accel_min_mps2", "must be <= accel_max_mps2");
  require(psi_bound > 0, "heading_bound_rad", "must be > 0");
  require(steer_bound > 0, "steer_bound_rad", "must be > 0");
  vp.x_min = {-1e18, s.geometry.lane_border_y.front()[0], -psi_bound, v_min};
  vp.x_max = {1e18, s.geometry.lane_border_y.back()[1], psi_bound, v_max};
  vp.u_min = {a_lo, -steer_bound};
  vp.u_max = {a_hi, steer_bound};

  HvBehaviorRanges& hr = s.hv_ranges;
  hr.a_max = r.range("idm_a_max_range", hr.a_max);
  hr.a_min = r.range("idm_a_min_range", hr.a_min);
  hr.tau = r.range("idm_tau_range", hr.tau);
  hr.d_jam = r.range("idm_d_jam_range", hr.d_jam);
  hr.v_free = r.range("idm_v_free_range", {0.85 * s.free_flow_speed, s.free_flow_speed});
  hr.politeness = r.range("mobil_politeness_range", hr.politeness);
  hr.threshold = r.range("mobil_threshold_range", hr.threshold);
  hr.a_hard = r.num("idm_hard_brake_mps2", 9.0);
  require(hr.a_max.lo > 0, "idm_a_max_range", "must be strictly positive");
  require(hr.a_min.lo > 0, "idm_a_min_range", "must be strictly positive");
  require(hr.tau.lo > 0, "idm_tau_range", "must be strictly positive");
  require(hr.d_jam.lo > 0, "idm_d_jam_range", "must be strictly positive");
  require(hr.v_free.lo > 0, "idm_v_free_range", "must be strictly positive");
  require(hr.politeness.lo >= 0 && hr.politeness.hi <= 1.0,
          "mobil_politeness_range", "must be within [0, 1]");
  require(hr.threshold.lo >= 0, "mobil_threshold_range", "must be >= 0");
  require(hr.a_hard > 0, "idm_hard_brake_mps2", "must be > 0");

  s.hv_lane_change_duration_s = r.num("hv_lane_change_duration_s", 3.0);
  require(s.hv_lane_change_duration_s > 0, "hv_lane_change_duration_s",
          "must be > 0");

  s.controller.mode = controller_mode_from_string(r.str("controller_mode", "hdm"));
  if (r.has("fixed_weights")) {
    const json& w = r.raw("fixed_weights");
    require(w.is_array() && w.size() == 5, "fixed_weights",
            "must be an array of 5 numbers");
    double vals[5];
    for (int i = 0; i < 5; ++i) {
      require(w[i].is_number() && w[i].get<double>() >= 0.0, "fixed_weights",
              "entries must be >= 0");
      vals[i] = w[i].get<double>();
    }
    s.controller.fixed_weights = {vals[0], vals[1], vals[2], vals[3], vals[4]};
  }
  s.controller.upper_period_steps = r.integer("upper_period_steps", 5);
  require(s.controller.upper_period_steps >= 1, "upper_period_steps",
          "must be >= 1");

  s.mpc.horizon = r.integer("mpc_horizon", 16);
  require(s.mpc.horizon >= 1, "mpc_horizon", "must be >= 1");
  s.safety.circle_radius = r.num("circle_radius_m", vp.body_width_m / 2.0 + 0.2);
  require(s.safety.circle_radius > 0, "circle_radius_m", "must be > 0");
  s.safety.d_safety = r.num("safety_distance_m", 2.0 * s.safety.circle_radius + 0.5);
  require(s.safety.d_safety > 0, "safety_distance_m", "must be > 0");
  s.safety.chi = r.num("safety_decay_chi", 0.9);
  require(s.safety.chi > 0 && s.safety.chi <= 1.0, "safety_decay_chi",
          "must be in (0, 1]");
  s.safety.sensing_range = r.num("sensing_range_m", 100.0);
  require(s.safety.sensing_range > 0, "sensing_range_m", "must be > 0");
  s.safety.min_observe_s = r.num("min_observe_s", 3.0);
  require(s.safety.min_observe_s >= 0, "min_observe_s", "must be >= 0");
  s.mpc.cav_politeness = r.num("cav_politeness", 0.5);
  s.mpc.lane_change_complete_tol = r.num("lane_change_complete_tol_m", 0.2);
  s.mpc.v_ref_min = r.num("v_ref_min_mps", 1.0);
  s.mpc.qp_tol = r.num("qp_tol", 1e-6);
  s.mpc.qp_max_newton = r.integer("qp_max_newton", 100);
  s.mpc.qp_mu_init = r.num("qp_mu_init", 10.0);
  s.mpc.qp_mu_factor = r.num("qp_mu_factor", 0.2);
  require(s.mpc.qp_mu_factor > 0 && s.mpc.qp_mu_factor < 1, "qp_mu_factor",
          "must be in (0, 1)");

  s.reward.beta_spd = r.num("beta_spd", 1.0);
  s.reward.beta_flow = r.num("beta_flow", 1.0);
  s.reward.beta_miss = r.num("beta_miss", -2.0);
  s.reward.q_max = r.num("q_max_veh_per_lane_h", 1800.0);
  require(s.reward.q_max > 0, "q_max_veh_per_lane_h", "must be > 0");
  s.reward.v_free = s.free_flow_speed;
  s.grid.history_depth = r.integer("history_depth", 5);
  require(s.grid.history_depth >= 1, "history_depth", "must be >= 1");
  s.reward.flow_window_steps = r.integer("flow_window_steps", s.grid.history_depth);
  require(s.reward.flow_window_steps >= 1, "flow_window_steps", "must be >= 1");
  s.grid.weight_min = r.num("weight_min", 0.01);
  s.grid.weight_max = r.num("weight_max", 1.0);
  require(s.grid.weight_min >= 0 && s.grid.weight_min < s.grid.weight_max,
          "weight_min", "must satisfy 0 <= weight_min < weight_max");
  s.grid.local_radius_cells = r.integer("local_radius_cells", 3);
  require(s.grid.local_radius_cells >= 0, "local_radius_cells", "must be >= 0");

  s.ppo.clip = r.num("ppo_clip", 0.2);
  require(s.ppo.clip > 0 && s.ppo.clip < 1, "ppo_clip", "must be in (0, 1)");
  s.ppo.gamma = r.num("ppo_gamma", 0.99);
  require(s.ppo.gamma > 0 && s.ppo.gamma <= 1, "ppo_gamma", "must be in (0, 1]");
  s.ppo.lambda = r.num("ppo_lambda", 0.95);
  require(s.ppo.lambda >= 0 && s.ppo.lambda <= 1, "ppo_lambda",
          "must be in [0, 1]");
  s.ppo.actor_lr = r.num("actor_lr", 3e-4);
  s.ppo.critic_lr = r.num("critic_lr", 3e-4);
  require(s.ppo.actor_lr > 0, "actor_lr", "must be > 0");
  require(s.ppo.critic_lr > 0, "critic_lr", "must be > 0");
  s.ppo.epochs = r.integer("ppo_epochs", 4);
  s.ppo.minibatch = r.integer("ppo_minibatch", 256);
  require(s.ppo.epochs >= 1, "ppo_epochs", "must be >= 1");
  require(s.ppo.minibatch >= 1, "ppo_minibatch", "must be >= 1");
  s.ppo.actor_layers = r.int_list("actor_layers", s.ppo.actor_layers);
  s.ppo.critic_layers = r.int_list("critic_layers", s.ppo.critic_layers);
  s.ppo.init_log_std = r.num("ppo_init_log_std", -1.0);

  s.predictor.t_in = r.integer("predictor_t_in", 10);
  require(s.predictor.t_in >= 1, "predictor_t_in", "must be >= 1");
  s.predictor.hidden = r.int_list("predictor_hidden", s.predictor.hidden);
  s.predictor.learning_rate = r.num("predictor_lr", 5e-4);
  s.predictor.epochs = r.integer("predictor_epochs", 200);
  s.predictor.minibatch = r.integer("predictor_minibatch", 64);

  s.mpc.nominal_idm = s.nominal_idm();

  r.reject_unknown();
  return s;
}

IdmParams Scenario::nominal_idm() const {
  IdmParams p;
  p.a_max = 0.5 * (hv_ranges.a_max.lo + hv_ranges.a_max.hi);
  p.a_min = 0.5 * (hv_ranges.a_min.lo + hv_ranges.a_min.hi);
  p.tau = 0.5 * (hv_ranges.tau.lo + hv_ranges.tau.hi);
  p.d_jam = 0.5 * (hv_ranges.d_jam.lo + hv_ranges.d_jam.hi);
  p.v_free = free_flow_speed;
  p.a_hard = hv_ranges.a_hard;
  return p;
}

json Scenario::to_json() const {
  json j;
  j["name"] = name;
  j["lanes"] = geometry.lanes;
  j["length_m"] = geometry.length_m;
  j["lane_width_m"] = geometry.lane_width_m;
  j["cells_per_lane"] = geometry.cells_per_lane;
  j["dt_s"] = demand.dt_s;
  j["horizon_steps"] = demand.horizon_steps;
  j["cav_penetration"] = demand.cav_penetration;
  j["arrival_rates_veh_per_h"] = demand.arrival_rate_veh_per_h;
  j["free_flow_speed_mps"] = free_flow_speed;
  j["entry_speed_mps"] = entry_speed;
  j["axle_length_m"] = vehicle.axle_length_m;
  j["front_axle_to_cog_m"] = vehicle.front_axle_to_cog_m;
  j["rear_axle_to_cog_m"] = vehicle.rear_axle_to_cog_m;
  j["body_length_m"] = vehicle.body_length_m;
  j["body_width_m"] = vehicle.body_width_m;
  j["speed_min_mps"] = vehicle.x_min[3];
  j["speed_max_mps"] = vehicle.x_max[3];
  j["heading_bound_rad"] = vehicle.x_max[2];
  j["accel_min_mps2"] = vehicle.u_min[0];
  j["accel_max_mps2"] = vehicle.u_max[0];
  j["steer_bound_rad"] = vehicle.u_max[1];
  auto rng = [](const Range& r) { return json::array({r.lo, r.hi}); };
  j["idm_a_max_range"] = rng(hv_ranges.a_max);
  j["idm_a_min_range"] = rng(hv_ranges.a_min);
  j["idm_tau_range"] = rng(hv_ranges.tau);
  j["idm_d_jam_range"] = rng(hv_ranges.d_jam);
  j["idm_v_free_range"] = rng(hv_ranges.v_free);
  j["mobil_politeness_range"] = rng(hv_ranges.politeness);
  j["mobil_threshold_range"] = rng(hv_ranges.threshold);
  j["idm_hard_brake_mps2"] = hv_ranges.a_hard;
  j["hv_lane_change_duration_s"] = hv_lane_change_duration_s;
  j["controller_mode"] = to_string(controller.mode);
  j["fixed_weights"] = {controller.fixed_weights.effort,
                        controller.fixed_weights.exit_x,
                        controller.fixed_weights.exit_y,
                        controller.fixed_weights.vel,
                        controller.fixed_weights.acc};
  j["upper_period_steps"] = controller.upper_period_steps;
  j["mpc_horizon"] = mpc.horizon;
  j["circle_radius_m"] = safety.circle_radius;
  j["safety_distance_m"] = safety.d_safety;
  j["safety_decay_chi"] = safety.chi;
  j["sensing_range_m"] = safety.sensing_range;
  j["min_observe_s"] = safety.min_observe_s;
  j["cav_politeness"] = mpc.cav_politeness;
  j["lane_change_complete_tol_m"] = mpc.lane_change_complete_tol;
  j["v_ref_min_mps"] = mpc.v_ref_min;
  j["qp_tol"] = mpc.qp_tol;
  j["qp_max_newton"] = mpc.qp_max_newton;
  j["qp_mu_init"] = mpc.qp_mu_init;
  j["qp_mu_factor"] = mpc.qp_mu_factor;
  j["beta_spd"] = reward.beta_spd;
  j["beta_flow"] = reward.beta_flow;
  j["beta_miss"] = reward.beta_miss;
  j["q_max_veh_per_lane_h"] = reward.q_max;
  j["flow_window_steps"] = reward.flow_window_steps;
  j["history_depth"] = grid.history_depth;
  j["weight_min"] = grid.weight_min;
  j["weight_max"] = grid.weight_max;
  j["local_radius_cells"] = grid.local_radius_cells;
  j["ppo_clip"] = ppo.clip;
  j["ppo_gamma"] = ppo.gamma;
  j["ppo_lambda"] = ppo.lambda;
  j["actor_lr"] = ppo.actor_lr;
  j["critic_lr"] = ppo.critic_lr;
  j["ppo_epochs"] = ppo.epochs;
  j["ppo_minibatch"] = ppo.minibatch;
  j["actor_layers"] = ppo.actor_layers;
  j["critic_layers"] = ppo.critic_layers;
  j["ppo_init_log_std"] = ppo.init_log_std;
  j["predictor_t_in"] = predictor.t_in;
  j["predictor_hidden"] = predictor.hidden;
  j["predictor_lr"] = predictor.learning_rate;
  j["predictor_epochs"] = predictor.epochs;
  j["predictor_minibatch"] = predictor.minibatch;
  return j;
}

std::uint64_t Scenario::hash() const {
  const std::string text = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario parse error: ") + e.what());
  }
  return Scenario::from_json(j);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write scenario file '" + path + "'");
  out << s.to_json().dump(2) << "\n";
}

bool operator==(const Scenario& a, const Scenario& b) {
  return a.to_json() == b.to_json();
}

}  // namespace weavesim
