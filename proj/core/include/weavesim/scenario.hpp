#pragma once

#include <array>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "weavesim/dynamics.hpp"
#include "weavesim/hv_model.hpp"
#include "weavesim/mpc_types.hpp"
#include "weavesim/rng.hpp"

namespace weavesim {

// Raised by load_scenario with the offending field named in the message.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RoadGeometry {
  double length_m = 535.0;
  int lanes = 3;
  double lane_width_m = 3.5;
  int cells_per_lane = 20;
  std::vector<double> lane_center_y;                // derived
  std::vector<std::array<double, 2>> lane_border_y;  // derived, [lower, upper]

  int total_cells() const { return lanes * cells_per_lane; }
  double cell_length() const { return length_m / cells_per_lane; }

  // Longitudinal cell of a position in [0, length): floor(px / cell_length),
  // clamped into range for boundary round-off.
  int longitudinal_cell(double px) const;
  // Flat cell id: lane * cells_per_lane + longitudinal cell.
  int cell_index(int lane, double px) const;
  // Lane whose borders contain py (clamped to the outermost lanes).
  int lane_of(double py) const;

  void derive();  // fills lane_center_y / lane_border_y
};

struct DemandSpec {
  std::vector<std::vector<double>> arrival_rate_veh_per_h;  // [origin][dest]
  double cav_penetration = 0.2;
  int horizon_steps = 18000;
  double dt_s = 0.2;

  double total_rate() const;
};

enum class ControllerMode { Hdm, MpcOnly, BiLevelL, BiLevelG };

std::string to_string(ControllerMode mode);
ControllerMode controller_mode_from_string(const std::string& s);

struct ControllerAssignment {
  ControllerMode mode = ControllerMode::Hdm;
  MpcWeights fixed_weights;  // used when no upper level runs
  int upper_period_steps = 5;
};

struct RewardConfig {
  double beta_spd = 1.0;
  double beta_flow = 1.0;
  double beta_miss = -2.0;
  double q_max = 1800.0;  // veh/(lane h), theoretical capacity
  double v_free = 27.78;  // m/s
  int flow_window_steps = 5;  // D
};

struct GridConfig {
  int history_depth = 5;  // D
  double weight_min = 0.01;
  double weight_max = 1.0;
  int local_radius_cells = 3;  // Bi-Level-L visibility, cells fore/aft
};

struct PpoConfig {
  double clip = 0.2;     // kappa
  double gamma = 0.99;
  double lambda = 0.95;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  int epochs = 4;
  int minibatch = 256;
  std::vector<int> actor_layers{128, 512, 384};
  std::vector<int> critic_layers{64, 128, 64};
  double init_log_std = -1.0;
};

struct PredictorConfig {
  int t_in = 10;
  std::vector<int> hidden{64};
  double learning_rate = 5e-4;
  int epochs = 200;
  int minibatch = 64;
};

// Immutable after load; safe to share across concurrent episode runs.
struct Scenario {
  std::string name = "unnamed";
  RoadGeometry geometry;
  DemandSpec demand;
  VehicleParams vehicle;
  ControllerAssignment controller;
  HvBehaviorRanges hv_ranges;
  SafetyConfig safety;
  MpcConfig mpc;
  RewardConfig reward;
  GridConfig grid;
  PpoConfig ppo;
  PredictorConfig predictor;
  double free_flow_speed = 27.78;  // v_f, m/s
  double entry_speed = 22.0;       // spawn speed, m/s
  double hv_lane_change_duration_s = 3.0;

  nlohmann::json to_json() const;
  static Scenario from_json(const nlohmann::json& j);

  // Nominal (range-midpoint) human parameters, used wherever a CAV has to
  // estimate human behavior without knowing individual parameters.
  IdmParams nominal_idm() const;

  // FNV-1a hash of the canonical serialized form.
  std::uint64_t hash() const;
};

// Parses and validates a scenario file (JSON, flat keys; schema documented in
// docs/CONFIG.md). Unknown keys are rejected; every invariant is checked and
// violations name the offending field.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& text);

void save_scenario(const Scenario& s, const std::string& path);

bool operator==(const Scenario& a, const Scenario& b);

}  // namespace weavesim
