#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "weavesim/history.hpp"
#include "weavesim/hv_model.hpp"
#include "weavesim/net.hpp"
#include "weavesim/scenario.hpp"

namespace weavesim {

// Five-channel observation series for one surrounding HV, time-ordered
// oldest first, exactly t_in entries each.
struct HvFeatureSeries {
  VehicleId id = 0;
  std::vector<Eigen::Vector2d> abs_pos;
  std::vector<Eigen::Vector2d> rel_pos;  // relative to the SV, same steps
  std::vector<double> speed;
  std::vector<double> heading;
  std::vector<int> lc_intent;
  bool padded = false;  // oldest sample repeated to fill the window
};

struct NeighborFeatures {
  VehicleId sv_id = 0;
  int t_in = 0;
  std::vector<HvFeatureSeries> hvs;
};

// Collects the feature series of the given HVs from the rolling history.
// An HV (or the SV) missing from an older snapshot truncates that HV's
// series; the oldest available sample is then repeated and the series is
// flagged as padded. HVs absent from the newest snapshot are skipped.
NeighborFeatures build_neighbor_features(VehicleId sv_id,
                                         const std::vector<VehicleId>& hv_ids,
                                         const StateHistory& history, int t_in);

struct PredictedTrajectories {
  // COG positions over steps k+1 .. k+P.
  std::map<VehicleId, std::vector<Eigen::Vector2d>> positions;
};

// Baseline: hold the latest speed and heading; per step dx = v dt and
// dy = v psi dt, matching the small-angle kinematics used elsewhere.
PredictedTrajectories predict_constant_velocity(const NeighborFeatures& features,
                                                int horizon, double dt);

// Joint nominal-IDM rollout with lanes held fixed. `context` lists every
// vehicle taking part in the rollout (predicted HVs and their leaders);
// leaders reference entries of the same list by id.
struct RolloutVehicle {
  VehicleId id = 0;
  double px = 0, py = 0, speed = 0;
  std::optional<VehicleId> leader;
  double body_length = 4.5;
};

PredictedTrajectories predict_idm_rollout(const NeighborFeatures& features,
                                          const std::vector<RolloutVehicle>& context,
                                          int horizon, double dt,
                                          const IdmParams& nominal);

// Flat regressor input: the five channels of one HV normalized by fixed
// constants, plus a 4-entry summary of the other HVs in the feature set
// (mean relative offset, mean speed, count). Layout documented in
// docs/FORMATS.md.
Eigen::VectorXd predictor_feature_vector(const HvFeatureSeries& series,
                                         const NeighborFeatures& context);

int predictor_feature_dim(int t_in);

// Trainable displacement regressor. The label convention is the flattened
// (dx_1, dy_1, ..., dx_P, dy_P) displacement of the HV from its current
// position over the prediction horizon, in meters.
struct PredictorModel {
  Mlp net;
  int t_in = 0;
  int horizon = 0;
  double dt = 0.2;
  double max_step_disp = 6.6;  // clamp: v_max * dt plus slack
  double final_train_loss = 0.0;

  void save(const std::string& path) const;
  static PredictorModel load(const std::string& path);
};

struct PredictorSample {
  Eigen::VectorXd features;
  Eigen::VectorXd label;
};

// Zero-parameter model of the right shape (predicts zero displacement).
PredictorModel make_predictor_model(const PredictorConfig& cfg, int horizon,
                                    double dt);

// Minimizes the mean squared trajectory error with minibatch Adam.
// Deterministic given the seed. Throws std::invalid_argument on an empty or
// shape-inconsistent dataset.
PredictorModel train_predictor(const std::vector<PredictorSample>& dataset,
                               const PredictorConfig& cfg, int horizon,
                               double dt, std::uint64_t seed);

// Deterministic forward evaluation; per-step displacements are clamped to
// max_step_disp. Throws std::invalid_argument on horizon mismatch.
PredictedTrajectories predict_learned(const PredictorModel& model,
                                      const NeighborFeatures& features,
                                      int horizon);

// Dataset files: '#'-prefixed header lines with dimensions, then one sample
// per line (features then label, space separated, full precision).
void save_dataset(const std::vector<PredictorSample>& samples,
                  const std::string& path, int t_in, int horizon, double dt);
std::vector<PredictorSample> load_dataset(const std::string& path);

}  // namespace weavesim
