#pragma once

// Occupation-density estimate of local time along a simulated path:
// L^x ~ sigma^2(x) * (time spent in (x-h, x+h)) / (2h). Each path segment is
// treated as linear in time, so its sojourn in a window is the overlap
// fraction times the step duration.

#include <algorithm>
#include <cmath>
#include <vector>

#include "diffun/quad.hpp"
#include "diffun/sim.hpp"

namespace diffun {

struct LocalTimeProfile {
  std::vector<double> levels;
  std::vector<double> density;  // one entry per level, >= 0
  double bandwidth = 0.0;
};

/// Time the linear segment (y0 -> y1, duration tau) spends in (a,b).
inline double segment_sojourn(double y0, double y1, double tau, double a, double b) {
  const double lo = std::min(y0, y1), hi = std::max(y0, y1);
  if (lo == hi) return (a < lo && lo < b) ? tau : 0.0;
  const double ov = std::min(hi, b) - std::max(lo, a);
  return ov > 0 ? tau * ov / (hi - lo) : 0.0;
}

inline LocalTimeProfile local_time_profile(const PathSample& path,
                                           std::vector<double> levels,
                                           double bandwidth,
                                           const Evaluator& sigma2 = {}) {
  if (!(bandwidth > 0)) throw std::invalid_argument("bandwidth must be positive");
  std::sort(levels.begin(), levels.end());
  LocalTimeProfile out;
  out.levels = levels;
  out.bandwidth = bandwidth;
  out.density.assign(levels.size(), 0.0);

  const auto& t = path.times;
  const auto& v = path.values;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double tau = t[i] - t[i - 1];
    if (!(tau > 0)) continue;
    const double lo = std::min(v[i - 1], v[i]) - bandwidth;
    const double hi = std::max(v[i - 1], v[i]) + bandwidth;
    auto first = std::lower_bound(levels.begin(), levels.end(), lo);
    for (auto it = first; it != levels.end() && *it <= hi; ++it) {
      const double occ =
          segment_sojourn(v[i - 1], v[i], tau, *it - bandwidth, *it + bandwidth);
      out.density[static_cast<std::size_t>(it - levels.begin())] += occ;
    }
  }
  for (std::size_t j = 0; j < levels.size(); ++j) {
    const double s2 = sigma2 ? sigma2(levels[j]) : 1.0;
    out.density[j] *= s2 / (2.0 * bandwidth);
  }
  return out;
}

/// Occupation mass: sum of density * level spacing, should recover elapsed
/// time for a unit-sigma path whose range is covered by the level grid.
inline double occupation_mass(const LocalTimeProfile& prof) {
  double mass = 0.0;
  for (std::size_t j = 0; j + 1 < prof.levels.size(); ++j)
    mass += 0.5 * (prof.density[j] + prof.density[j + 1]) *
            (prof.levels[j + 1] - prof.levels[j]);
  return mass;
}

}  // namespace diffun
