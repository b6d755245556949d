#pragma once

// Path simulation: Euler-Maruyama for general diffusions with absorbing
// boundaries (near-boundary step halving, linearly interpolated exit times),
// exact-increment Brownian motion stopped at a hitting level, and Bessel
// processes built coordinatewise from exact Gaussian increments (a Bessel(3)
// path is the norm of a 3d Brownian motion; squared Bessel(2) the squared
// norm of a 2d one). The coordinate construction avoids any Euler bias at
// the origin.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffun/problem.hpp"
#include "diffun/rng.hpp"

namespace diffun {

struct ExitRecord {
  bool exited = false;
  double time = 0.0;      // exit time (ExitAt) or horizon reached (NoExit)
  double endpoint = 0.0;  // which endpoint, when exited
};

struct PathSample {
  std::vector<double> times;   // times[0] = 0
  std::vector<double> values;  // values[0] = x0
  ExitRecord exit;
  std::uint64_t driving_seed = 0;

  double terminal_time() const { return times.back(); }
  double terminal_value() const { return values.back(); }
};

struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Euler-Maruyama with absorption at the endpoints of the state space.
/// The step is halved while the boundary is within 10*sigma(x)*sqrt(h)
/// (down to dt/2^12); a crossing is recorded at the linearly interpolated
/// time and the path is frozen there.
inline PathSample simulate_diffusion(const Problem& p, double dt, double horizon,
                                     std::uint64_t seed) {
  if (!(dt > 0) || !(horizon > 0))
    throw std::invalid_argument("simulate_diffusion: dt and horizon must be positive");
  Rng rng(seed);
  PathSample path;
  path.driving_seed = seed;
  path.times.reserve(static_cast<std::size_t>(horizon / dt) + 64);
  path.values.reserve(path.times.capacity());

  double t = 0.0;
  double y = p.space.x0;
  path.times.push_back(t);
  path.values.push_back(y);
  const double l = p.space.l, r = p.space.r;

  while (t < horizon) {
    const double mu = eval_expr(p.mu, y);
    const double sg = eval_expr(p.sigma, y);
    if (std::isnan(mu) || std::isnan(sg))
      throw SimulationError("coefficient undefined at y=" + std::to_string(y) +
                            ", t=" + std::to_string(t));
    double h = std::min(dt, horizon - t);
    const double guard = 10.0 * std::fabs(sg);
    for (int halvings = 0; halvings < 12; ++halvings) {
      const double reach = guard * std::sqrt(h) + std::fabs(mu) * h;
      const bool near_l = std::isfinite(l) && y - l < reach;
      const bool near_r = std::isfinite(r) && r - y < reach;
      if (!near_l && !near_r) break;
      h *= 0.5;
    }
    const double y_next = y + mu * h + sg * std::sqrt(h) * rng.normal();

    if ((std::isfinite(l) && y_next <= l) || (std::isfinite(r) && y_next >= r)) {
      const double endpoint = (std::isfinite(l) && y_next <= l) ? l : r;
      // linear interpolation of the crossing time within the step
      const double frac = (endpoint - y) / (y_next - y);
      const double t_exit = t + h * std::max(1e-12, std::min(1.0, frac));
      path.times.push_back(t_exit);
      path.values.push_back(endpoint);
      path.exit = {true, t_exit, endpoint};
      return path;
    }
    t += h;
    y = y_next;
    path.times.push_back(t);
    path.values.push_back(y);
  }
  path.exit = {false, horizon, 0.0};
  return path;
}

/// Brownian motion from x0 with exact Gaussian increments, stopped at the
/// first crossing of r (linearly interpolated). NoExit when max_time is hit
/// first (tau_r is a.s. finite but heavy-tailed, so truncation is visible).
inline PathSample simulate_bm_to_hit(double x0, double r, double dt,
                                     std::uint64_t seed, double max_time) {
  if (!(x0 <= r)) throw std::invalid_argument("simulate_bm_to_hit: need x0 <= r");
  Rng rng(seed);
  PathSample path;
  path.driving_seed = seed;
  path.times.push_back(0.0);
  path.values.push_back(x0);
  if (x0 == r) {
    path.exit = {true, 0.0, r};
    return path;
  }
  const double sq = std::sqrt(dt);
  double t = 0.0, y = x0;
  while (t < max_time) {
    const double y_next = y + sq * rng.normal();
    if (y_next >= r) {
      const double frac = (r - y) / (y_next - y);
      const double t_exit = t + dt * std::max(1e-12, std::min(1.0, frac));
      path.times.push_back(t_exit);
      path.values.push_back(r);
      path.exit = {true, t_exit, r};
      return path;
    }
    t += dt;
    y = y_next;
    path.times.push_back(t);
    path.values.push_back(y);
  }
  path.exit = {false, max_time, 0.0};
  return path;
}

/// Bessel(3) path as the norm of three independent Brownian coordinates,
/// started at the origin. Far above `refine_below` the step grows
/// quadratically with the distance (the probability of an unseen excursion
/// back down dies off like exp(-gap^2/2h)), which makes long horizons cheap
/// while keeping fine resolution near the level of interest.
struct Bessel3Path {
  PathSample path;
  bool horizon_too_short = false;  // terminal value < 2x the refine level

  /// Last time the norm crosses `level` (linear interpolation), 0 if never.
  double last_exit(double level) const {
    const auto& t = path.times;
    const auto& v = path.values;
    double last = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      const bool below = v[i - 1] < level, above = v[i] >= level;
      const bool down = v[i - 1] >= level, up = v[i] < level;
      if ((below && above) || (down && up)) {
        const double frac = (level - v[i - 1]) / (v[i] - v[i - 1]);
        last = t[i - 1] + (t[i] - t[i - 1]) * frac;
      }
    }
    return last;
  }

  double first_hit(double level) const {
    const auto& t = path.times;
    const auto& v = path.values;
    for (std::size_t i = 1; i < v.size(); ++i) {
      if ((v[i - 1] < level) != (v[i] < level)) {
        const double frac = (level - v[i - 1]) / (v[i] - v[i - 1]);
        return t[i - 1] + (t[i] - t[i - 1]) * frac;
      }
    }
    return -1.0;
  }
};

inline Bessel3Path simulate_bessel3(double dt, double horizon, std::uint64_t seed,
                                    double refine_below = 2.0) {
  Rng rng(seed);
  Bessel3Path out;
  out.path.driving_seed = seed;
  double w[3] = {0.0, 0.0, 0.0};
  double t = 0.0;
  out.path.times.push_back(0.0);
  out.path.values.push_back(0.0);
  while (t < horizon) {
    double nrm = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
    double h = dt;
    if (nrm > 2.0 * refine_below) {
      const double gap = nrm - 1.5 * refine_below;
      h = std::min(std::max(dt, gap * gap / 16.0), std::max(dt, horizon / 64.0));
    }
    h = std::min(h, horizon - t);
    const double sq = std::sqrt(h);
    for (auto& c : w) c += sq * rng.normal();
    t += h;
    out.path.times.push_back(t);
    out.path.values.push_back(std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]));
  }
  out.path.exit = {false, horizon, 0.0};
  out.horizon_too_short = out.path.values.back() < 2.0 * refine_below;
  return out;
}

/// Squared Bessel(2) sampled exactly at the grid times: sum of squares of
/// two independent Brownian coordinates.
inline std::vector<double> simulate_squared_bessel2(const std::vector<double>& u_grid,
                                                    std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(u_grid.size());
  double w1 = 0.0, w2 = 0.0, t = 0.0;
  for (double u : u_grid) {
    if (!(u >= t)) throw std::invalid_argument("u_grid must be nondecreasing");
    const double sq = std::sqrt(u - t);
    w1 += sq * rng.normal();
    w2 += sq * rng.normal();
    t = u;
    out.push_back(w1 * w1 + w2 * w2);
  }
  return out;
}

}  // namespace diffun
