#pragma once

// Multi-window slope-based convergence detection on the epoch reward curve.

#include <optional>
#include <vector>

#include "byd/core.hpp"

namespace byd {

struct EarlyStopConfig {
  std::vector<int> windows = {8, 32, 64};
  int delta_early = 150;     // epochs
  double delta_slope = 1e-4;

  void validate() const {
    require(!windows.empty(), ErrorCategory::config, "windows must be nonempty");
    int prev = 1;
    for (int w : windows) {
      require(w >= 2, ErrorCategory::config, "windows must be >= 2");
      require(w >= prev, ErrorCategory::config, "windows must be ascending");
      prev = w;
    }
  }
};

using RewardHistory = std::vector<double>;

// OLS slope of reward vs epoch index over the trailing `window` entries.
// Empty optional when there is not enough history yet.
inline std::optional<double> slope(const RewardHistory& history, int window) {
  const int n = static_cast<int>(history.size());
  if (n < window) return std::nullopt;
  // regress on x = 0..window-1; shift-invariant in both axes
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < window; ++i) {
    const double x = i;
    const double y = history[n - window + i];
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = window * sxx - sx * sx;
  return (window * sxy - sx * sy) / denom;
}

inline bool should_stop(const RewardHistory& history, int epoch,
                        const EarlyStopConfig& cfg) {
  if (epoch < cfg.delta_early) return false;
  for (int w : cfg.windows) {
    const auto s = slope(history, w);
    if (!s || *s > cfg.delta_slope) return false;
  }
  return true;
}

}  // namespace byd
