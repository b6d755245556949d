#pragma once

// Adaptive Gauss-Kronrod quadrature on compact intervals plus a
// finite/infinite classifier for improper integrals of nonnegative
// integrands with a singularity (or unbounded domain) at one endpoint.
//
// The improper classifier integrates over a geometric ladder of bands
// approaching the endpoint and watches the band increments:
//   * geometric decay of the increments  -> Finite, with the remaining tail
//     extrapolated from the observed decay ratio;
//   * increments bounded below abs_tol-and-not-shrinking -> Infinite;
//   * ladder exhausted without a decision -> Indeterminate.
// A log-log fit of the increments yields a local power-law exponent
// estimate of the integrand at the endpoint, reported for diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffun {

using Evaluator = std::function<double(double)>;

struct Tolerances {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  int max_depth = 40;
  double shrink_ratio = 0.5;   // band shrink factor, in (0,1)
  int decision_window = 6;     // increments examined by the improper rule
};

struct QuadResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::size_t subdivisions = 0;
};

struct NonConvergentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class VerdictKind { Finite, Infinite, Indeterminate };

struct ImproperVerdict {
  VerdictKind kind = VerdictKind::Indeterminate;
  double value = 0.0;           // meaningful for Finite
  double error_estimate = 0.0;  // meaningful for Finite
  std::optional<double> exponent_estimate;  // fitted local power-law order
  std::vector<std::pair<double, double>> partial_integrals;  // (eps_k, I_k)
};

enum class Side { LeftOf, RightOf };  // integration region relative to the endpoint

namespace detail {

// QUADPACK qk15 nodes and weights on [-1,1].
inline constexpr double kXgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
inline constexpr double kWgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double kWg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

struct Panel {
  double a, b;
  double value;
  double error;
  int depth;
  bool operator<(const Panel& o) const { return error < o.error; }
};

// One K15/G7 panel. Undefined (NaN) evaluations are nudged off the node;
// a panel whose every node is undefined raises NonConvergent.
inline Panel gk15(const Evaluator& g, double a, double b, int depth) {
  const double h = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  auto sample = [&](double t) {
    double y = g(t);
    if (std::isnan(y)) {
      const double nudge = std::max(std::fabs(t), std::fabs(b - a)) * 1e-12 + 1e-300;
      y = g(t + nudge);
      if (std::isnan(y)) y = g(t - nudge);
    }
    return y;
  };

  double fv[15];
  int defined = 0;
  for (int i = 0; i < 7; ++i) {
    fv[2 * i] = sample(mid - h * kXgk[i]);
    fv[2 * i + 1] = sample(mid + h * kXgk[i]);
  }
  fv[14] = sample(mid);
  for (int i = 0; i < 15; ++i) {
    if (std::isnan(fv[i]))
      fv[i] = 0.0;
    else
      ++defined;
  }
  if (defined == 0)
    throw NonConvergentError("integrand undefined on the whole subinterval [" +
                             std::to_string(a) + "," + std::to_string(b) + "]");

  double resk = kWgk[7] * fv[14];
  double resg = 0.0;
  double resabs = kWgk[7] * std::fabs(fv[14]);
  for (int i = 0; i < 7; ++i) {
    resk += kWgk[i] * (fv[2 * i] + fv[2 * i + 1]);
    resabs += kWgk[i] * (std::fabs(fv[2 * i]) + std::fabs(fv[2 * i + 1]));
  }
  // Gauss nodes are the odd Kronrod indices 1,3,5 (plus the midpoint).
  resg = kWg[3] * fv[14];
  for (int i = 0; i < 3; ++i) {
    const int j = 2 * i + 1;
    resg += kWg[i] * (fv[2 * j] + fv[2 * j + 1]);
  }

  const double mean = resk * 0.5;
  double resasc = kWgk[7] * std::fabs(fv[14] - mean);
  for (int i = 0; i < 7; ++i)
    resasc += kWgk[i] * (std::fabs(fv[2 * i] - mean) + std::fabs(fv[2 * i + 1] - mean));
  resasc *= h;
  resabs *= h;

  double err = std::fabs((resk - resg) * h);
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  const double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps))
    err = std::max(err, 50.0 * eps * resabs);

  return Panel{a, b, resk * h, err, depth};
}

}  // namespace detail

/// Globally adaptive quadrature on [a,b]. Throws NonConvergentError when the
/// error target cannot be met within tol.max_depth bisection levels.
inline QuadResult integrate_compact(const Evaluator& g, double a, double b,
                                    const Tolerances& tol = {}) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
    throw std::invalid_argument("integrate_compact: need finite a < b");

  std::priority_queue<detail::Panel> heap;
  detail::Panel root = detail::gk15(g, a, b, 0);
  double total = root.value;
  double err = root.error;
  std::size_t splits = 0;
  heap.push(root);

  const std::size_t max_panels = 8192;
  while (err > std::max(tol.abs_tol, tol.rel_tol * std::fabs(total)) &&
         heap.size() < max_panels) {
    detail::Panel worst = heap.top();
    if (worst.depth >= tol.max_depth)
      throw NonConvergentError("integrate_compact: max depth reached with error " +
                               std::to_string(err));
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b)
      throw NonConvergentError("integrate_compact: interval underflow");
    detail::Panel left = detail::gk15(g, worst.a, mid, worst.depth + 1);
    detail::Panel right = detail::gk15(g, mid, worst.b, worst.depth + 1);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++splits;
  }
  if (err > std::max(tol.abs_tol, tol.rel_tol * std::fabs(total)) * 1.001 &&
      heap.size() >= max_panels)
    throw NonConvergentError("integrate_compact: panel budget exhausted");
  return QuadResult{total, err, splits};
}

/// Classifies \int g over a one-sided neighborhood of `endpoint`, starting
/// from `inner`. `side` says where the integration region lies relative to
/// the endpoint: LeftOf means (inner, endpoint) with inner < endpoint,
/// RightOf means (endpoint, inner) with inner > endpoint. g must be
/// nonnegative a.e. near the endpoint.
inline ImproperVerdict classify_improper(const Evaluator& g, double endpoint, Side side,
                                         double inner, const Tolerances& tol = {}) {
  ImproperVerdict v;
  const bool infinite_endpoint = std::isinf(endpoint);
  const double shrink = tol.shrink_ratio;
  const int window = std::max(3, tol.decision_window);

  // dist_k: distance from the endpoint (or 1/R_k when the endpoint is
  // infinite), strictly decreasing. Band k integrates between successive
  // ladder points.
  double dist0;
  if (infinite_endpoint) {
    dist0 = std::max({std::fabs(inner) * 2.0, std::fabs(inner) + 1.0, 1.0});
  } else {
    dist0 = std::fabs(endpoint - inner);
    if (!(dist0 > 0)) throw std::invalid_argument("classify_improper: inner == endpoint");
  }

  const int sgn = (side == Side::LeftOf) ? +1 : -1;  // direction of approach
  auto ladder_point = [&](double dist) {
    if (infinite_endpoint) return sgn > 0 ? dist : -dist;  // dist is R here
    return endpoint - sgn * dist;
  };

  // Bridge the gap between inner and the first ladder point (only needed for
  // an infinite endpoint where the ladder starts at R0 >= |inner|).
  double total = 0.0;
  double err = 0.0;
  Tolerances band_tol = tol;
  band_tol.abs_tol = std::min(tol.abs_tol, tol.rel_tol * 1e-2);
  if (infinite_endpoint) {
    const double first = ladder_point(dist0);
    const double lo = std::min(inner, first), hi = std::max(inner, first);
    if (hi > lo) {
      QuadResult q = integrate_compact(g, lo, hi, band_tol);
      total = q.value;
      err = q.error_estimate;
    }
  }

  std::vector<double> incs;       // band increments d_k
  std::vector<double> dists;      // leading distance of band k
  double dist = dist0;
  v.partial_integrals.push_back({infinite_endpoint ? 1.0 / dist0 : dist0, total});

  const int k_max = 700;
  for (int k = 0; k < k_max; ++k) {
    const double next = infinite_endpoint ? dist / shrink : dist * shrink;
    if (infinite_endpoint && next > 1e150) break;
    if (!infinite_endpoint && next < 1e-280 * std::max(1.0, std::fabs(endpoint))) break;
    const double p0 = ladder_point(dist);
    const double p1 = ladder_point(next);
    const double lo = std::min(p0, p1), hi = std::max(p0, p1);
    if (!(hi > lo)) break;

    double band;
    try {
      QuadResult q = integrate_compact(g, lo, hi, band_tol);
      band = q.value;
      err += q.error_estimate;
    } catch (const NonConvergentError&) {
      break;  // cannot resolve this band: fall through to Indeterminate
    }
    band = std::max(band, 0.0);  // g >= 0 a.e.; clip quadrature noise
    total += band;
    incs.push_back(band);
    dists.push_back(dist);
    dist = next;
    v.partial_integrals.push_back({infinite_endpoint ? 1.0 / dist : dist, total});

    if (total > 1e14) {  // runaway growth, no need for the window rule
      v.kind = VerdictKind::Infinite;
      break;
    }
    if (static_cast<int>(incs.size()) < window) continue;

    bool all_decay = true, all_large = true, ratios_ok = true;
    double last_ratio = 0.0;
    for (int j = static_cast<int>(incs.size()) - window; j + 1 < static_cast<int>(incs.size()); ++j) {
      const double d0 = incs[j], d1 = incs[j + 1];
      const double ratio = d0 > 0 ? d1 / d0 : (d1 > 0 ? 2.0 : 0.0);
      if (!(ratio <= 0.98)) all_decay = false;
      if (!(ratio >= 0.97)) ratios_ok = false;
      last_ratio = ratio;
    }
    for (int j = static_cast<int>(incs.size()) - window; j < static_cast<int>(incs.size()); ++j)
      if (incs[j] < tol.abs_tol) all_large = false;

    const double scale = std::max(std::fabs(total), 1.0);
    if (all_decay && incs.back() <= std::max(tol.abs_tol, tol.rel_tol * scale)) {
      // Finite: extrapolate the remaining geometric tail.
      const double r = std::clamp(last_ratio, 0.0, 0.98);
      const double tail = incs.back() * r / (1.0 - r);
      v.kind = VerdictKind::Finite;
      v.value = total + tail;
      v.error_estimate = err + tail * 0.5 + tol.abs_tol;
      break;
    }
    if (all_large && ratios_ok) {
      v.kind = VerdictKind::Infinite;
      break;
    }
  }

  // Local power-law exponent from the increments (diagnostic, always fitted
  // when enough bands exist). d_k ~ C * dist^(1+exponent) at a finite
  // endpoint; at an infinite endpoint the fit runs in u = 1/R and
  // d_k ~ C * u^(-1-exponent).
  const int fit_n = std::min<std::size_t>(incs.size(), 12);
  if (fit_n >= 3) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int j = static_cast<int>(incs.size()) - fit_n; j < static_cast<int>(incs.size()); ++j) {
      if (!(incs[j] > 0)) continue;
      const double lx = std::log(infinite_endpoint ? 1.0 / dists[j] : dists[j]);
      const double ly = std::log(incs[j]);
      sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
      ++n;
    }
    if (n >= 3) {
      const double denom = n * sxx - sx * sx;
      if (std::fabs(denom) > 1e-12) {
        const double slope = (n * sxy - sx * sy) / denom;
        v.exponent_estimate = infinite_endpoint ? -(slope + 1.0) : slope - 1.0;
      }
    }
  }
  return v;
}

struct LocalIntegrability {
  bool integrable = false;
  bool indeterminate = false;
  ImproperVerdict below;  // approach from below x
  ImproperVerdict above;  // approach from above x
  bool short_circuited = false;  // bounded at all probes, no classification run
};

/// L^1_loc membership of g at an interior point x: finite iff the improper
/// integral from both sides of x converges. Bounded integrands short-circuit.
inline LocalIntegrability local_integrability_at(const Evaluator& g, double x,
                                                 double half_width,
                                                 const Tolerances& tol = {}) {
  LocalIntegrability out;
  if (!(half_width > 0)) throw std::invalid_argument("half_width must be positive");

  bool bounded = true;
  for (int i = 1; i <= 12 && bounded; ++i) {
    const double d = half_width * std::pow(0.25, i);
    for (double p : {x - d, x + d}) {
      const double y = g(p);
      if (std::isnan(y) || std::fabs(y) > 1e6) {
        bounded = false;
        break;
      }
    }
  }
  if (bounded) {
    out.integrable = true;
    out.short_circuited = true;
    return out;
  }

  out.below = classify_improper(g, x, Side::LeftOf, x - half_width, tol);
  out.above = classify_improper(g, x, Side::RightOf, x + half_width, tol);
  if (out.below.kind == VerdictKind::Indeterminate ||
      out.above.kind == VerdictKind::Indeterminate) {
    out.indeterminate = true;
    return out;
  }
  out.integrable = out.below.kind == VerdictKind::Finite &&
                   out.above.kind == VerdictKind::Finite;
  return out;
}

struct NonintegrabilityResult {
  std::vector<double> points;         // candidates where integrability fails
  std::vector<double> indeterminate;  // candidates with no honest answer
};

/// Subset of `candidates` at which g fails local integrability. Approximates
/// the closed set D = { x : g not in L^1_loc(x) } on the candidate list.
inline NonintegrabilityResult nonintegrability_set(const Evaluator& g,
                                                   double l, double r,
                                                   std::vector<double> candidates,
                                                   const Tolerances& tol = {}) {
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  NonintegrabilityResult out;
  for (double x : candidates) {
    if (!(l < x && x < r)) continue;
    double hw = 0.5;
    if (std::isfinite(l)) hw = std::min(hw, 0.5 * (x - l));
    if (std::isfinite(r)) hw = std::min(hw, 0.5 * (r - x));
    LocalIntegrability li = local_integrability_at(g, x, hw, tol);
    if (li.indeterminate)
      out.indeterminate.push_back(x);
    else if (!li.integrable)
      out.points.push_back(x);
  }
  return out;
}

}  // namespace diffun
