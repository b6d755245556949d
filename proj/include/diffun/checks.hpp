#pragma once

// Monte Carlo verification: agreement between the deterministic classifier
// and simulated path trends, plus the distributional identities behind the
// two proofs (Williams / Bessel(3) last exit, the first Ray-Knight theorem,
// the Cherny dichotomy for Bessel integrals, and the Fubini mean identity).
//
// Determinism contract: per-path generators derive from (master_seed, path
// index) and reductions run in index order, so the thread count never
// changes a result.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "diffun/classify.hpp"
#include "diffun/localtime.hpp"
#include "diffun/problem.hpp"
#include "diffun/quad.hpp"
#include "diffun/rng.hpp"
#include "diffun/sim.hpp"
#include "diffun/trend.hpp"

namespace diffun {

struct MCSummary {
  std::size_t n_paths = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  std::vector<double> per_path;  // optional payload, may be empty
};

/// Runs fn(i) for i in [0,n) across `threads` workers; results land in a
/// preallocated vector by index, so the reduction order is fixed.
template <typename T, typename Fn>
std::vector<T> map_indexed(std::size_t n, unsigned threads, Fn&& fn) {
  std::vector<T> out(n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        out[i] = fn(i);
      }
    });
  for (auto& th : pool) th.join();
  return out;
}

inline MCSummary summarize(const std::vector<double>& xs, bool keep = false) {
  MCSummary s;
  s.n_paths = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.estimate = sum / xs.size();
  double var = 0.0;
  for (double x : xs) var += (x - s.estimate) * (x - s.estimate);
  var /= std::max<std::size_t>(1, xs.size() - 1);
  s.std_error = std::sqrt(var / xs.size());
  if (keep) s.per_path = xs;
  return s;
}

// ---------------------------------------------------------------------------
// Two-sample Kolmogorov-Smirnov
// ---------------------------------------------------------------------------

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0, n2 = 0;
};

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  KsResult r;
  r.n1 = a.size();
  r.n2 = b.size();
  if (a.empty() || b.empty()) return r;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / a.size() -
                              static_cast<double>(j) / b.size()));
  }
  r.statistic = d;
  const double ne = static_cast<double>(r.n1) * r.n2 / (r.n1 + r.n2);
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p;
  if (lambda < 1e-9) {
    p = 1.0;
  } else if (lambda < 1.18) {
    // small-lambda theta-function form; the alternating series converges
    // too slowly (and degenerates at lambda = 0)
    const double t = std::exp(-M_PI * M_PI / (8.0 * lambda * lambda));
    p = 1.0 - std::sqrt(2.0 * M_PI) / lambda * (t + std::pow(t, 9) + std::pow(t, 25));
  } else {
    p = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double term =
          2.0 * ((k & 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
      p += term;
      if (std::fabs(term) < 1e-12) break;
    }
  }
  r.p_value = std::clamp(p, 0.0, 1.0);
  return r;
}

// ---------------------------------------------------------------------------
// Verdict-simulation agreement
// ---------------------------------------------------------------------------

struct AgreementBucket {
  std::string event;  // "A", "limit_r", "limit_l"
  EventVerdict expected = EventVerdict::Inconclusive;
  std::size_t n = 0, match = 0, mismatch = 0, undecided = 0;
  bool too_few = false;  // fewer than 30 paths landed here
  double fraction() const { return n ? static_cast<double>(match) / n : 0.0; }
};

struct AgreementResult {
  std::vector<AgreementBucket> buckets;
  std::size_t n_paths = 0;
  std::size_t n_matched = 0, n_undecided = 0;
  double overall_fraction = 0.0;
  double undecided_fraction = 0.0;
  MCSummary summary;  // estimate = overall agreement fraction
};

inline Trend expected_trend(EventVerdict v) {
  switch (v) {
    case EventVerdict::Zero:
    case EventVerdict::Finite:
      return Trend::Converging;
    case EventVerdict::Infinite:
      return Trend::Diverging;
    default:
      return Trend::Undecided;
  }
}

struct SimParams {
  double dt = 1e-3;
  double horizon = 256.0;
  int dyadic_count = 10;
  std::uint64_t master_seed = 1;
  unsigned threads = 1;
};

/// Simulates n paths of the problem, buckets each by its realized event,
/// and reports the fraction whose pathwise trend matches the classifier's
/// verdict for that event.
inline AgreementResult verdict_agreement(const Problem& p, const ConvergenceReport& rep,
                                         std::size_t n_paths, const SimParams& sim) {
  if (!rep.conclusive)
    throw std::invalid_argument("verdict_agreement: report is inconclusive");
  const bool recurrent = rep.on_event_A.has_value();
  auto f = as_evaluator(p.f);

  struct PathOutcome {
    int bucket = -1;  // 0 = A, 1 = limit_r, 2 = limit_l
    Trend trend = Trend::Undecided;
  };

  auto outcomes = map_indexed<PathOutcome>(n_paths, sim.threads, [&](std::size_t i) {
    PathOutcome po;
    PathSample path = simulate_diffusion(
        p, sim.dt, sim.horizon, Rng::for_path(sim.master_seed, i).next_u64());
    if (recurrent) {
      po.bucket = 0;
    } else if (path.exit.exited) {
      po.bucket = (path.exit.endpoint == p.space.r) ? 1 : 2;
    } else {
      // no exit: attribute to the attracted side; when both endpoints are
      // attracted, fall back to which side of x0 the path ended on
      const bool r_live = rep.on_limit_r && *rep.on_limit_r != EventVerdict::EventNull;
      const bool l_live = rep.on_limit_l && *rep.on_limit_l != EventVerdict::EventNull;
      if (r_live && !l_live)
        po.bucket = 1;
      else if (l_live && !r_live)
        po.bucket = 2;
      else
        po.bucket = path.terminal_value() >= p.space.x0 ? 1 : 2;
    }
    po.trend = functional_trajectory(path, f, sim.dyadic_count, recurrent).trend;
    return po;
  });

  AgreementResult res;
  res.buckets = {
      {"A", rep.on_event_A.value_or(EventVerdict::Inconclusive)},
      {"limit_r", rep.on_limit_r.value_or(EventVerdict::Inconclusive)},
      {"limit_l", rep.on_limit_l.value_or(EventVerdict::Inconclusive)},
  };
  for (const auto& po : outcomes) {
    auto& b = res.buckets[static_cast<std::size_t>(po.bucket)];
    ++b.n;
    const Trend want = expected_trend(b.expected);
    if (po.trend == Trend::Undecided)
      ++b.undecided;
    else if (po.trend == want)
      ++b.match;
    else
      ++b.mismatch;
  }
  for (auto& b : res.buckets) {
    if (b.n > 0 && b.n < 30) b.too_few = true;
    if (expected_trend(b.expected) == Trend::Undecided && b.n > 0) b.too_few = true;
    res.n_paths += b.n;
    res.n_matched += b.match;
    res.n_undecided += b.undecided;
  }
  res.overall_fraction = res.n_paths ? static_cast<double>(res.n_matched) / res.n_paths : 0.0;
  res.undecided_fraction =
      res.n_paths ? static_cast<double>(res.n_undecided) / res.n_paths : 0.0;
  std::vector<double> indicators;
  indicators.reserve(outcomes.size());
  for (const auto& po : outcomes) {
    const Trend want = expected_trend(res.buckets[static_cast<std::size_t>(po.bucket)].expected);
    indicators.push_back(po.trend == want ? 1.0 : 0.0);
  }
  res.summary = summarize(indicators);
  return res;
}

// ---------------------------------------------------------------------------
// Ray-Knight: Law(L^{r-u}_{tau_r}) = Law(eta_u), eta a squared Bessel(2)
// ---------------------------------------------------------------------------

struct RayKnightResult {
  KsResult ks;
  MCSummary local_time;  // L-hat samples
  MCSummary eta;         // squared-Bessel samples
  double truncated_fraction = 0.0;
  bool bandwidth_flag = false;  // halving h moved the KS statistic too much
};

/// One streaming Brownian path from x0 to its first hit of r, accumulating
/// occupation time of (level-h, level+h) -- no path storage.
inline std::pair<double, bool> bm_local_time_at_hit(double x0, double r, double level,
                                                    double h, double dt,
                                                    std::uint64_t seed,
                                                    double max_time) {
  Rng rng(seed);
  const double sq = std::sqrt(dt);
  double t = 0.0, y = x0, occ = 0.0;
  while (t < max_time) {
    const double y_next = y + sq * rng.normal();
    const bool hit = y_next >= r;
    const double frac = hit ? std::max(1e-12, std::min(1.0, (r - y) / (y_next - y))) : 1.0;
    occ += segment_sojourn(y, hit ? r : y_next, dt * frac, level - h, level + h);
    if (hit) return {occ / (2.0 * h), false};
    y = y_next;
    t += dt;
  }
  return {occ / (2.0 * h), true};
}

inline RayKnightResult ray_knight_check(double r, double x0, double u,
                                        std::size_t n_paths, double dt, double bandwidth,
                                        std::uint64_t seed, unsigned threads = 1,
                                        double max_time = 0.0) {
  if (!(u > 0) || !(u <= r - x0))
    throw std::invalid_argument("ray_knight_check: need 0 < u <= r - x0");
  if (max_time <= 0) max_time = 2000.0 * (r - x0) * (r - x0);
  const double level = r - u;

  struct Sample { double L, L_half; bool truncated; };
  auto samples = map_indexed<Sample>(n_paths, threads, [&](std::size_t i) {
    // accumulate two windows (h and h/2) from the same trajectory
    Rng rng(Rng::for_path(seed, i).next_u64());
    const double sq = std::sqrt(dt);
    double t = 0.0, y = x0, occ = 0.0, occ_half = 0.0;
    const double h = bandwidth, hh = bandwidth * 0.5;
    while (t < max_time) {
      const double y_next = y + sq * rng.normal();
      const bool hit = y_next >= r;
      const double frac = hit ? std::max(1e-12, std::min(1.0, (r - y) / (y_next - y))) : 1.0;
      const double y_end = hit ? r : y_next;
      occ += segment_sojourn(y, y_end, dt * frac, level - h, level + h);
      occ_half += segment_sojourn(y, y_end, dt * frac, level - hh, level + hh);
      if (hit) return Sample{occ / (2 * h), occ_half / (2 * hh), false};
      y = y_next;
      t += dt;
    }
    return Sample{occ / (2 * h), occ_half / (2 * hh), true};
  });

  std::vector<double> L, L_half, eta;
  L.reserve(n_paths);
  std::size_t truncated = 0;
  for (const auto& s : samples) {
    L.push_back(s.L);
    L_half.push_back(s.L_half);
    if (s.truncated) ++truncated;
  }
  for (std::size_t i = 0; i < n_paths; ++i)
    eta.push_back(simulate_squared_bessel2({u}, Rng::for_path(seed ^ 0x5bd1e995, i).next_u64())[0]);

  RayKnightResult out;
  out.ks = ks_two_sample(L, eta);
  out.local_time = summarize(L);
  out.eta = summarize(eta);
  out.truncated_fraction = static_cast<double>(truncated) / n_paths;
  const KsResult ks_half = ks_two_sample(L_half, eta);
  const double crit = 1.36 * std::sqrt(2.0 / static_cast<double>(n_paths));
  out.bandwidth_flag = std::fabs(ks_half.statistic - out.ks.statistic) > crit;
  return out;
}

// ---------------------------------------------------------------------------
// Williams: Law(tau^B_r) = Law(Bessel(3) last exit from r - x0)
// ---------------------------------------------------------------------------

struct WilliamsResult {
  KsResult ks;
  double median_tau = 0.0;
  double median_xi = 0.0;
  std::size_t excluded_tau = 0;  // truncated hitting times
  std::size_t excluded_xi = 0;   // bessel paths flagged horizon-too-short
};

inline double median_of(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

inline WilliamsResult williams_check(double r, double x0, std::size_t n_paths, double dt,
                                     std::uint64_t seed, unsigned threads = 1,
                                     double max_time = 0.0) {
  const double gap = r - x0;
  if (!(gap > 0)) throw std::invalid_argument("williams_check: need x0 < r");
  if (max_time <= 0) max_time = 1e4 * gap * gap;

  struct TauSample { double tau; bool truncated; };
  auto taus = map_indexed<TauSample>(n_paths, threads, [&](std::size_t i) {
    Rng rng(Rng::for_path(seed, i).next_u64());
    const double sq = std::sqrt(dt);
    double t = 0.0, y = x0;
    while (t < max_time) {
      const double y_next = y + sq * rng.normal();
      if (y_next >= r) {
        const double frac = std::max(1e-12, std::min(1.0, (r - y) / (y_next - y)));
        return TauSample{t + dt * frac, false};
      }
      y = y_next;
      t += dt;
    }
    return TauSample{max_time, true};
  });

  struct XiSample { double xi; bool flagged; };
  auto xis = map_indexed<XiSample>(n_paths, threads, [&](std::size_t i) {
    Bessel3Path bp = simulate_bessel3(dt, max_time,
                                      Rng::for_path(seed ^ 0x9e3779b9, i).next_u64(), gap);
    return XiSample{bp.last_exit(gap), bp.horizon_too_short};
  });

  WilliamsResult out;
  std::vector<double> tau_v, xi_v;
  for (const auto& s : taus) {
    if (s.truncated) { ++out.excluded_tau; continue; }
    tau_v.push_back(s.tau);
  }
  for (const auto& s : xis) {
    if (s.flagged) { ++out.excluded_xi; continue; }
    xi_v.push_back(s.xi);
  }
  out.ks = ks_two_sample(tau_v, xi_v);
  out.median_tau = median_of(tau_v);
  out.median_xi = median_of(xi_v);
  return out;
}

// ---------------------------------------------------------------------------
// Cherny dichotomy: int_0^eps rho_u^{-p} du finite a.s. iff p < 2
// ---------------------------------------------------------------------------

struct ChernyResult {
  Trend expected = Trend::Undecided;  // Converging iff p < 2
  double frac_converging = 0.0;
  double frac_diverging = 0.0;
  double frac_undecided = 0.0;
  bool refinement_flag = false;  // finer grid flips > 5% of trends
  MCSummary summary;             // estimate = fraction matching expectation
};

namespace detail {

/// Trend of int_0^eps rho^{-p} along one Bessel(3) path, sampled exactly on
/// a geometric grid: band sums over octaves [eps 2^-(k+1), eps 2^-k]; the
/// trend is the fitted slope of log2(band) toward the origin.
inline Trend cherny_path_trend(double p_exponent, double eps, int octaves,
                               int pts_per_octave, std::uint64_t seed) {
  Rng rng(seed);
  double w[3] = {0, 0, 0};
  double t = 0.0;
  // octave k = octaves-1 is closest to 0; walk forward in time
  std::vector<double> band(static_cast<std::size_t>(octaves), 0.0);
  double prev_g = 0.0;
  bool have_prev = false;
  double prev_t = 0.0;
  for (int k = octaves - 1; k >= 0; --k) {
    const double lo = eps * std::ldexp(1.0, -(k + 1));
    const double hi = eps * std::ldexp(1.0, -k);
    for (int j = 1; j <= pts_per_octave; ++j) {
      const double u = lo + (hi - lo) * j / pts_per_octave;
      const double sq = std::sqrt(u - t);
      for (auto& c : w) c += sq * rng.normal();
      t = u;
      const double nrm = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
      const double g = std::pow(nrm, -p_exponent);
      if (std::isfinite(g)) {
        if (have_prev) band[static_cast<std::size_t>(k)] += 0.5 * (prev_g + g) * (u - prev_t);
        prev_g = g;
        prev_t = u;
        have_prev = true;
      }
    }
  }
  // Fit log2(band_k) against k (k increases toward the origin).  Individual
  // bands are heavy-tailed -- a single close approach of the path to the
  // origin spikes one octave -- so use the Theil-Sen median pairwise slope,
  // which a few outlier bands cannot drag around, instead of least squares.
  std::vector<std::pair<int, double>> pts_fit;
  for (int k = 0; k < octaves; ++k) {
    const double b = band[static_cast<std::size_t>(k)];
    if (b > 0) pts_fit.push_back({k, std::log2(b)});
  }
  if (pts_fit.size() < 4) return Trend::Undecided;
  std::vector<double> slopes;
  for (std::size_t i = 0; i < pts_fit.size(); ++i)
    for (std::size_t j = i + 1; j < pts_fit.size(); ++j)
      slopes.push_back((pts_fit[j].second - pts_fit[i].second) /
                       static_cast<double>(pts_fit[j].first - pts_fit[i].first));
  std::nth_element(slopes.begin(), slopes.begin() + slopes.size() / 2, slopes.end());
  const double slope = slopes[slopes.size() / 2];
  if (slope <= -0.08) return Trend::Converging;
  if (slope >= 0.08) return Trend::Diverging;
  return Trend::Undecided;
}

}  // namespace detail

inline ChernyResult cherny_dichotomy_check(double p_exponent, double eps,
                                           std::size_t n_paths, double dt,
                                           std::uint64_t seed, unsigned threads = 1) {
  if (p_exponent == 2.0)
    throw std::invalid_argument("cherny_dichotomy_check: p = 2 is the boundary case");
  // The geometric grid samples the Brownian increments exactly, so the ladder
  // can go well below the dt scale; extra octaves sharpen the slope estimate.
  const int octaves =
      std::clamp(static_cast<int>(std::log2(eps / std::max(dt * 1e-4, 1e-15))), 8, 40);
  const int pts = 24;

  auto trends = map_indexed<Trend>(n_paths, threads, [&](std::size_t i) {
    return detail::cherny_path_trend(p_exponent, eps, octaves, pts,
                                     Rng::for_path(seed, i).next_u64());
  });
  auto fine_trends = map_indexed<Trend>(n_paths, threads, [&](std::size_t i) {
    return detail::cherny_path_trend(p_exponent, eps, octaves, pts * 2,
                                     Rng::for_path(seed, i).next_u64());
  });

  ChernyResult out;
  out.expected = p_exponent < 2.0 ? Trend::Converging : Trend::Diverging;
  std::size_t conv = 0, div = 0, und = 0, flips = 0;
  std::vector<double> match;
  for (std::size_t i = 0; i < trends.size(); ++i) {
    switch (trends[i]) {
      case Trend::Converging: ++conv; break;
      case Trend::Diverging: ++div; break;
      default: ++und; break;
    }
    if (trends[i] != fine_trends[i]) ++flips;
    match.push_back(trends[i] == out.expected ? 1.0 : 0.0);
  }
  out.frac_converging = static_cast<double>(conv) / n_paths;
  out.frac_diverging = static_cast<double>(div) / n_paths;
  out.frac_undecided = static_cast<double>(und) / n_paths;
  out.refinement_flag = static_cast<double>(flips) / n_paths > 0.05;
  out.summary = summarize(match);
  return out;
}

// ---------------------------------------------------------------------------
// Fubini identity: E int_0^{r-x0} f(r-u) W_u^2 du = int_0^{r-x0} f(r-u) u du
// ---------------------------------------------------------------------------

struct FubiniResult {
  MCSummary mc;       // left side
  double rhs = 0.0;   // quadrature of f(r-u) u
  double z_score = 0.0;
};

inline FubiniResult fubini_mean_check(const Evaluator& f, double r, double x0,
                                      std::size_t n_paths, std::uint64_t seed,
                                      unsigned threads = 1, std::size_t grid_n = 1024) {
  const double T = r - x0;
  if (!(T > 0)) throw std::invalid_argument("fubini_mean_check: need x0 < r");

  auto vals = map_indexed<double>(n_paths, threads, [&](std::size_t i) {
    Rng rng(Rng::for_path(seed, i).next_u64());
    const double du = T / static_cast<double>(grid_n);
    const double sq = std::sqrt(du);
    double w = 0.0, acc = 0.0, prev = 0.0;
    for (std::size_t j = 1; j <= grid_n; ++j) {
      w += sq * rng.normal();
      const double u = du * static_cast<double>(j);
      const double g = f(r - u) * w * w;
      acc += 0.5 * (prev + g) * du;
      prev = g;
    }
    return acc;
  });

  FubiniResult out;
  out.mc = summarize(vals);
  out.rhs = integrate_compact([&](double u) { return f(r - u) * u; }, 0.0, T).value;
  out.z_score = out.mc.std_error > 0 ? (out.mc.estimate - out.rhs) / out.mc.std_error : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Occupation-times identity: int_0^T f(Y_u) du = int f(x) L^x_T dx
// ---------------------------------------------------------------------------

/// Relative error between the time integral of f along a path and the level
/// integral of f against the occupation-density local-time profile.
inline double occupation_identity_relerr(const PathSample& path, const Evaluator& f,
                                         double bandwidth, std::size_t n_levels = 512) {
  double lhs = 0.0, prev = f(path.values.front());
  for (std::size_t i = 1; i < path.times.size(); ++i) {
    const double g = f(path.values[i]);
    lhs += 0.5 * (prev + g) * (path.times[i] - path.times[i - 1]);
    prev = g;
  }
  auto [lo_it, hi_it] = std::minmax_element(path.values.begin(), path.values.end());
  const double lo = *lo_it - bandwidth, hi = *hi_it + bandwidth;
  std::vector<double> levels(n_levels);
  for (std::size_t i = 0; i < n_levels; ++i)
    levels[i] = lo + (hi - lo) * static_cast<double>(i) / (n_levels - 1);
  LocalTimeProfile prof = local_time_profile(path, levels, bandwidth);
  double rhs = 0.0, prev_fl = f(levels[0]) * prof.density[0];
  for (std::size_t i = 1; i < n_levels; ++i) {
    const double fl = f(levels[i]) * prof.density[i];
    rhs += 0.5 * (prev_fl + fl) * (levels[i] - levels[i - 1]);
    prev_fl = fl;
  }
  const double scale = std::max(std::fabs(lhs), 1e-300);
  return std::fabs(lhs - rhs) / scale;
}

}  // namespace diffun
