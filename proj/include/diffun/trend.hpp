#pragma once

// Pathwise convergence diagnostics for int_0^t f(Y_u) du. Convergence of a
// random integral is not observable in finite time; the declared proxy is a
// dyadic checkpoint trend with an explicit Undecided bucket.
//
// Two checkpoint schedules, chosen by how the path ended:
//   * ExitAt (possible integrand singularity at the exit point): checkpoints
//     t_k = T (1 - 2^-k) halving toward the exit; the trend is the fitted
//     slope of the log window increments.
//   * NoExit (divergence, if any, happens in infinite time): checkpoints
//     t_k = T 2^(k-K) doubling toward the horizon; the trend compares the
//     integral's growth over the last octaves. Oscillating (recurrent)
//     paths leave the relevant region for long stretches, so divergence is
//     judged over a wide window while convergence wants a stalled tail.

#include <algorithm>
#include <cmath>
#include <vector>

#include "diffun/quad.hpp"
#include "diffun/sim.hpp"

namespace diffun {

enum class Trend { Converging, Diverging, Undecided };

inline const char* to_string(Trend t) {
  switch (t) {
    case Trend::Converging: return "converging";
    case Trend::Diverging: return "diverging";
    default: return "undecided";
  }
}

struct DichotomyDiagnostic {
  std::vector<std::pair<double, double>> checkpoints;  // (t_k, I_k)
  Trend trend = Trend::Undecided;
  double total = 0.0;  // I at the terminal time
};

namespace detail {

// Cumulative trapezoidal integral of f along the path; undefined or
// non-finite integrand samples contribute zero (f is defined a.e.).
inline std::vector<double> cumulative_integral(const PathSample& path,
                                               const Evaluator& f) {
  const auto& t = path.times;
  const auto& v = path.values;
  std::vector<double> cum(t.size(), 0.0);
  double prev_f = f(v[0]);
  if (!std::isfinite(prev_f)) prev_f = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    double fi = f(v[i]);
    if (!std::isfinite(fi)) fi = 0.0;
    cum[i] = cum[i - 1] + 0.5 * (prev_f + fi) * (t[i] - t[i - 1]);
    prev_f = fi;
  }
  return cum;
}

inline double interp_cum(const std::vector<double>& times,
                         const std::vector<double>& cum, double t) {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0.0;
  if (it == times.end()) return cum.back();
  const std::size_t i = static_cast<std::size_t>(it - times.begin());
  const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
  return cum[i - 1] + w * (cum[i] - cum[i - 1]);
}

}  // namespace detail

inline DichotomyDiagnostic functional_trajectory(const PathSample& path,
                                                 const Evaluator& f,
                                                 int dyadic_count = 10,
                                                 bool oscillating = false) {
  DichotomyDiagnostic out;
  const auto cum = detail::cumulative_integral(path, f);
  const double T = path.terminal_time();
  const double S = cum.back();
  out.total = S;
  const int K = std::max(4, dyadic_count);

  if (path.exit.exited) {
    // Halving windows toward the exit; keep windows that still contain a
    // few steps so discretization noise does not masquerade as a trend.
    const double mean_step = T / static_cast<double>(path.times.size());
    std::vector<double> incs;
    double prev = 0.0;
    for (int k = 1; k <= K; ++k) {
      const double tk = T * (1.0 - std::ldexp(1.0, -k));
      const double Ik = detail::interp_cum(path.times, cum, tk);
      out.checkpoints.push_back({tk, Ik});
      if (T * std::ldexp(1.0, -k) >= 8.0 * mean_step) incs.push_back(Ik - prev);
      prev = Ik;
    }
    if (S <= 0.0) {
      out.trend = Trend::Converging;
      return out;
    }
    if (incs.size() >= 2 && incs.back() + incs[incs.size() - 2] < 1e-9 * S) {
      out.trend = Trend::Converging;  // tail already negligible
      return out;
    }
    // Remainder scaling: R_k = S - I(t_k) aggregates the mass still to come
    // at scale 2^-k T.  An integrable singularity (1-x)^(-p), p < 2, makes
    // R_k decay like 2^(-k(1-p/2)); past the critical exponent the mass
    // piles up at the exit and R_k stays flat.  Because consecutive R_k share
    // the same tail, the local-time fluctuations near the exit largely cancel
    // in the fitted slope.
    int n = 0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int usable = static_cast<int>(incs.size());
    const int first = std::max(1, usable - 5);
    for (int k = first; k <= usable; ++k) {
      const double Rk = S - out.checkpoints[static_cast<std::size_t>(k) - 1].second;
      const double lx = k, ly = std::log2(std::max(Rk, 1e-12 * S));
      sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
      ++n;
    }
    if (n >= 3) {
      const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
      if (slope <= -0.10)
        out.trend = Trend::Converging;
      else if (slope >= -0.05)
        out.trend = Trend::Diverging;
    }
    return out;
  }

  // NoExit: doubling checkpoints t_k = T 2^(k-K).
  std::vector<double> I(K + 1, 0.0);
  for (int k = 1; k <= K; ++k) {
    const double tk = T * std::ldexp(1.0, k - K);
    I[k] = detail::interp_cum(path.times, cum, tk);
    out.checkpoints.push_back({tk, I[k]});
  }
  if (S <= 0.0) {
    out.trend = Trend::Converging;
    return out;
  }
  if (oscillating) {
    // Recurrent paths leave the integrand's support for long stretches
    // (arcsine law), so repeated accrual across octaves already witnesses
    // divergence; an octave is "active" when it adds >= 3% of the total.
    int active = 0;
    for (int k = 1; k <= K; ++k)
      if (I[k] - I[k - 1] >= 0.03 * S) ++active;
    if (active >= 2) out.trend = Trend::Diverging;
    return out;
  }

  // Transient paths: a converging tail has shrinking octave increments
  // (Delta_{k+1}/Delta_k < 1), power-law growth S ~ t^a has growing ones
  // (ratio 2^a). Fit the slope of log2 Delta_k across the octaves with a
  // trimmed Theil-Sen estimator: dropping the largest few increments and
  // taking the median pairwise slope shrugs off the heavy-tailed spike a
  // path leaves when it dips back toward the integrand's singularity.
  if (I[K] - I[K - 1] <= 1e-6 * S && I[K - 1] - I[K - 2] <= 1e-6 * S) {
    out.trend = Trend::Converging;  // tail already negligible
    return out;
  }
  std::vector<double> logd;
  for (int k = 1; k <= K; ++k)
    logd.push_back(std::log2(std::max(I[k] - I[k - 1], 1e-9 * S)));
  std::vector<char> keep(logd.size(), 1);
  const int trim = std::max(2, K / 5);
  for (int r = 0; r < trim; ++r) {
    int top = -1;
    for (std::size_t i = 0; i < logd.size(); ++i)
      if (keep[i] && (top < 0 || logd[i] > logd[static_cast<std::size_t>(top)]))
        top = static_cast<int>(i);
    keep[static_cast<std::size_t>(top)] = 0;
  }
  std::vector<double> slopes;
  for (std::size_t i = 0; i < logd.size(); ++i) {
    if (!keep[i]) continue;
    for (std::size_t j = i + 1; j < logd.size(); ++j)
      if (keep[j]) slopes.push_back((logd[j] - logd[i]) / static_cast<double>(j - i));
  }
  std::nth_element(slopes.begin(), slopes.begin() + slopes.size() / 2, slopes.end());
  const double slope = slopes[slopes.size() / 2];
  if (slope <= -0.02)
    out.trend = Trend::Converging;
  else if (slope >= 0.04)
    out.trend = Trend::Diverging;
  return out;
}

}  // namespace diffun
