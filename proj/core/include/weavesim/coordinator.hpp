#pragma once

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

#include "weavesim/history.hpp"
#include "weavesim/mpc_types.hpp"
#include "weavesim/net.hpp"
#include "weavesim/scenario.hpp"

namespace weavesim {

// Cell-grid observation: 3 features x cells x history depth. Feature order:
// 0 = lane-change occupancy l (share of vehicles off their destination lane),
// 1 = vehicle count b, 2 = mean speed. Lag 0 is the newest step. Raw counts
// and speeds are stored; normalization constants are applied on flatten.
struct CellGridState {
  int lanes = 0;
  int cells_per_lane = 0;
  int depth = 0;
  std::vector<double> data;
  double v_norm = 27.78;
  double b_norm = 6.0;

  int cells() const { return lanes * cells_per_lane; }
  int size() const { return 3 * cells() * depth; }
  double& at(int feature, int cell, int lag) {
    return data[(feature * cells() + cell) * depth + lag];
  }
  double at(int feature, int cell, int lag) const {
    return data[(feature * cells() + cell) * depth + lag];
  }
  Eigen::VectorXd flatten_normalized() const;
};

// Aggregates the newest `depth` snapshots of the history. Empty cells carry
// l = 0, b = 0, mean speed = v_free; histories shorter than `depth` repeat
// their oldest snapshot.
CellGridState aggregate_cells(const StateHistory& history,
                              const RoadGeometry& geom, int depth,
                              double v_free);

struct RewardTuple {
  double total = 0, spd = 0, flow = 0, miss = 0;
};

// Composite step reward: beta_spd * (mean v / v_free, 1 when empty)
//  + beta_flow * (windowed exit flow / (q_max * lanes))
//  + beta_miss * (count of vehicles that left off their destination lane).
RewardTuple compute_reward(const std::vector<double>& speeds,
                           int window_departures, int window_steps,
                           int misses_now, const RewardConfig& cfg, int lanes,
                           double dt);

struct WeightAction {
  int cells = 0;
  std::vector<MpcWeights> per_cell;
};

// Componentwise sigmoid squash of the raw policy output into the weight box;
// monotone and bijective onto the open box.
WeightAction map_action_to_weights(const Eigen::VectorXd& raw, double w_min,
                                   double w_max);

enum class CoordinationScope { Global, Local };

struct GaussianAction {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_std;
  double log_prob(const Eigen::VectorXd& raw) const;
  Eigen::VectorXd sample(RngStream& rng) const;
};

// Actor-critic pair with a diagonal Gaussian over pre-squash outputs
// (state-independent learnable log scales). Local scope replaces each cell's
// input with a copy of the grid whose cells beyond the visibility radius are
// reset to empty-cell values before the same actor applies.
struct PolicyState {
  Mlp actor;
  Mlp critic;
  Eigen::VectorXd log_std;
  Eigen::VectorXd actor_old;    // flat parameter snapshot (theta_old)
  Eigen::VectorXd log_std_old;
  Adam actor_opt;
  Adam critic_opt;
  Adam logstd_opt;
  CoordinationScope scope = CoordinationScope::Global;
  int local_radius = 3;
  double weight_min = 0.01;
  double weight_max = 1.0;
  int lanes = 0, cells_per_lane = 0, depth = 0;

  int action_dim() const { return 5 * lanes * cells_per_lane; }
  int input_dim() const { return 3 * lanes * cells_per_lane * depth; }

  void save(const std::string& path) const;
  static PolicyState load(const std::string& path);
};

// Fresh policy wired to the scenario's grid shape. Hidden layers are
// randomly initialized (seeded); the actor output layer is pinned so the
// initial mean action squashes exactly to the conventional fixed weights.
PolicyState make_policy(const Scenario& scn, CoordinationScope scope,
                        std::uint64_t seed);

// Raw actor mean; applies the Local-scope masking composition when needed.
Eigen::VectorXd policy_mean(const CellGridState& grid,
                            const PolicyState& policy);

// Distribution over raw actions plus the critic's value estimate.
std::pair<GaussianAction, double> policy_forward(const CellGridState& grid,
                                                 const PolicyState& policy);

// Generalized advantage estimation. values must hold T+1 entries (bootstrap
// last); returns (advantages, value targets = advantage + value).
std::pair<std::vector<double>, std::vector<double>> compute_advantages(
    const std::vector<double>& rewards, const std::vector<double>& values,
    double gamma, double lambda);

struct RolloutStep {
  CellGridState state;
  Eigen::VectorXd raw_action;
  double logp_old = 0;
  double reward = 0;
  double value = 0;
};

struct RolloutBuffer {
  std::vector<RolloutStep> steps;
  double bootstrap_value = 0;
};

struct PpoReport {
  double actor_objective = 0;  // mean clipped surrogate
  double critic_loss = 0;      // mean absolute error
  double mean_ratio = 1.0;
  int samples = 0;
};

// One PPO round: clipped-surrogate ascent on the actor (Adam), L1 descent on
// the critic, advantages normalized per round, theta_old refreshed at the
// end. Throws std::runtime_error on non-finite losses.
PpoReport ppo_update(const std::vector<RolloutBuffer>& buffers,
                     PolicyState& policy, const PpoConfig& cfg,
                     RngStream& rng);

}  // namespace weavesim
