#pragma once

// Scale function machinery: rho(x) = exp(-int_c^x 2 mu/sigma^2), the scale
// function s(x) = int_c^x rho, and the boundary limits s(l), s(r).
//
// Both the log-derivative integral and s itself are cached on monotone knot
// tables: a query integrates from the nearest cached knot only, so repeated
// evaluations near an endpoint (the Feller and convergence integrands hammer
// this) stay cheap. The cache is guarded by a mutex; concurrent readers may
// compute a knot twice but never observe a non-monotone table.

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "diffun/problem.hpp"
#include "diffun/quad.hpp"

namespace diffun {

enum class LimitKind { Finite, Infinite, Indeterminate };

struct ScaleLimit {
  LimitKind kind = LimitKind::Indeterminate;
  double value = 0.0;  // for Finite
  ImproperVerdict detail;

  bool finite() const { return kind == LimitKind::Finite; }
};

struct BoundaryLimits {
  ScaleLimit s_l;  // Infinite means s(l) = -inf
  ScaleLimit s_r;  // Infinite means s(r) = +inf
};

class ScaleFunction {
 public:
  ScaleFunction(Problem p, std::optional<double> reference = std::nullopt,
                Tolerances tol = {})
      : p_(std::move(p)),
        c_(reference.value_or(p_.space.x0)),
        tol_(tol),
        state_(std::make_shared<State>()) {
    if (!p_.space.contains(c_))
      throw std::invalid_argument("scale reference point must be interior");
    state_->log_knots[c_] = 0.0;
    state_->s_knots[c_] = 0.0;
  }

  double reference() const { return c_; }
  const Problem& problem() const { return p_; }
  const Tolerances& tolerances() const { return tol_; }

  /// rho(x) = exp(-int_c^x 2 mu / sigma^2 dy), always positive.
  double rho(double x) const {
    return std::exp(-log_integral(x));
  }

  /// s(x) = int_c^x rho dy, strictly increasing, s(c) = 0.
  double s(double x) const {
    if (x == c_) return 0.0;
    std::lock_guard<std::mutex> lock(state_->s_mutex);
    auto& knots = state_->s_knots;
    auto it = knots.find(x);
    if (it != knots.end()) return it->second;
    auto [anchor_x, anchor_v] = nearest(knots, x);
    auto rho_ev = [this](double y) { return rho_nolock(y); };
    double v;
    if (x > anchor_x)
      v = anchor_v + integrate_compact(rho_ev, anchor_x, x, tol_).value;
    else
      v = anchor_v - integrate_compact(rho_ev, x, anchor_x, tol_).value;
    knots[x] = v;
    return v;
  }

  /// s(r) - s(x), computed as a single quadrature toward a finite endpoint
  /// (cancellation control); for r = +inf falls back to the cached limit.
  double tail_to_r(double x, const ScaleLimit& s_r) const {
    const double r = p_.space.r;
    if (std::isfinite(r)) {
      auto rho_ev = [this](double y) { return rho(y); };
      return integrate_compact(rho_ev, x, r, tol_).value;
    }
    return std::max(s_r.value - s(x), 0.0);
  }

  /// s(x) - s(l), mirrored.
  double tail_to_l(double x, const ScaleLimit& s_l) const {
    const double l = p_.space.l;
    if (std::isfinite(l)) {
      auto rho_ev = [this](double y) { return rho(y); };
      return integrate_compact(rho_ev, l, x, tol_).value;
    }
    return std::max(s(x) - s_l.value, 0.0);
  }

  /// Boundary limits of s, classified via the improper integral of rho.
  BoundaryLimits limits() const {
    BoundaryLimits out;
    auto rho_ev = [this](double y) { return rho(y); };

    ImproperVerdict vr = classify_improper(rho_ev, p_.space.r, Side::LeftOf, c_, tol_);
    out.s_r.detail = vr;
    switch (vr.kind) {
      case VerdictKind::Finite:
        out.s_r.kind = LimitKind::Finite;
        out.s_r.value = vr.value;
        break;
      case VerdictKind::Infinite:
        out.s_r.kind = LimitKind::Infinite;
        break;
      default:
        out.s_r.kind = LimitKind::Indeterminate;
    }

    ImproperVerdict vl = classify_improper(rho_ev, p_.space.l, Side::RightOf, c_, tol_);
    out.s_l.detail = vl;
    switch (vl.kind) {
      case VerdictKind::Finite:
        out.s_l.kind = LimitKind::Finite;
        out.s_l.value = -vl.value;  // s(l) = -int_l^c rho
        break;
      case VerdictKind::Infinite:
        out.s_l.kind = LimitKind::Infinite;
        break;
      default:
        out.s_l.kind = LimitKind::Indeterminate;
    }
    return out;
  }

 private:
  struct State {
    std::mutex log_mutex;
    std::mutex s_mutex;
    std::map<double, double> log_knots;  // x -> int_c^x 2 mu / sigma^2
    std::map<double, double> s_knots;    // x -> s(x)
  };

  static std::pair<double, double> nearest(const std::map<double, double>& m, double x) {
    auto hi = m.lower_bound(x);
    if (hi == m.end()) return *std::prev(hi);
    if (hi == m.begin()) return *hi;
    auto lo = std::prev(hi);
    return (x - lo->first <= hi->first - x) ? *lo : *hi;
  }

  double log_integral(double x) const {
    if (x == c_) return 0.0;
    std::lock_guard<std::mutex> lock(state_->log_mutex);
    return log_integral_locked(x);
  }

  double log_integral_locked(double x) const {
    auto& knots = state_->log_knots;
    auto it = knots.find(x);
    if (it != knots.end()) return it->second;
    auto [anchor_x, anchor_v] = nearest(knots, x);
    auto drift = [this](double y) {
      const double m = eval_expr(p_.mu, y);
      const double sg = eval_expr(p_.sigma, y);
      return 2.0 * m / (sg * sg);
    };
    double v;
    if (x > anchor_x)
      v = anchor_v + integrate_compact(drift, anchor_x, x, tol_).value;
    else
      v = anchor_v - integrate_compact(drift, x, anchor_x, tol_).value;
    knots[x] = v;
    return v;
  }

  // rho for use inside the s-integration (s_mutex already held; log cache
  // has its own lock so this is still safe).
  double rho_nolock(double y) const { return std::exp(-log_integral(y)); }

  Problem p_;
  double c_;
  Tolerances tol_;
  std::shared_ptr<State> state_;
};

/// Standalone form of rho used by tests and one-off queries.
inline double rho_at(const Problem& p, double c, double x, const Tolerances& tol = {}) {
  ScaleFunction sf(p, c, tol);
  return sf.rho(x);
}

}  // namespace diffun
