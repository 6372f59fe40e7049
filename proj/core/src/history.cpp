#include "weavesim/history.hpp"

#include <cmath>

namespace weavesim {

int StateHistory::observed_streak(VehicleId observer, VehicleId target,
                                  double range, int max_lags) const {
  int streak = 0;
  const int lags = std::min(max_lags, size());
  for (int lag = 0; lag < lags; ++lag) {
    const WorldSnapshot& snap = at_lag(lag);
    auto obs = snap.find(observer);
    auto tgt = snap.find(target);
    if (obs == snap.end() || tgt == snap.end()) break;
    const double dx = obs->second.state.px - tgt->second.state.px;
    const double dy = obs->second.state.py - tgt->second.state.py;
    if (std::hypot(dx, dy) > range) break;
    ++streak;
  }
  return streak;
}

}  // namespace weavesim
