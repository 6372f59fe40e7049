#pragma once

#include <deque>
#include <map>

#include "weavesim/dynamics.hpp"

namespace weavesim {

struct ObservedVehicle {
  VehicleState state;
  bool lc_intent = false;  // lane change in progress (turn-signal proxy)
};

using WorldSnapshot = std::map<VehicleId, ObservedVehicle>;

// Depth-bounded rolling record of full per-step world snapshots, newest last.
// Serves as the shared observation source: cell-grid lags, predictor input
// series, and continuous-observation bookkeeping for neighbor selection.
class StateHistory {
 public:
  explicit StateHistory(int depth) : depth_(depth) {}

  void push(int step, WorldSnapshot snapshot) {
    steps_.push_back(step);
    snaps_.push_back(std::move(snapshot));
    while (static_cast<int>(snaps_.size()) > depth_) {
      snaps_.pop_front();
      steps_.pop_front();
    }
  }

  int depth() const { return depth_; }
  int size() const { return static_cast<int>(snaps_.size()); }
  bool empty() const { return snaps_.empty(); }
  int latest_step() const { return steps_.back(); }

  // lag = 0 is the newest snapshot; lag = size()-1 the oldest retained.
  const WorldSnapshot& at_lag(int lag) const {
    return snaps_[snaps_.size() - 1 - lag];
  }

  // Number of consecutive most-recent snapshots (up to max_lags) in which
  // `target` appears within `range` of `observer`'s position in the same
  // snapshot. Used for the continuous-observation requirement.
  int observed_streak(VehicleId observer, VehicleId target, double range,
                      int max_lags) const;

 private:
  int depth_;
  std::deque<int> steps_;
  std::deque<WorldSnapshot> snaps_;
};

}  // namespace weavesim
