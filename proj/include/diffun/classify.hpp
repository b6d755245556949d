#pragma once

// Deterministic convergence classification for the integral functional
// int_0^zeta f(Y_u) du of a one-dimensional diffusion:
//   * boundary behaviour from the scale limits and Feller's explosion test;
//   * reduction of the state space by the set D where f/sigma^2 fails local
//     integrability (the functional is finite strictly before the hitting
//     time of D and infinite strictly after);
//   * the recurrent verdict (zero vs infinite, by Lebesgue-positivity of f)
//     when both scale limits are infinite;
//   * the transient per-endpoint verdict via the integrand
//     (s(r)-s) f / (rho sigma^2) near an attracted endpoint;
//   * the Brownian special case: finite iff (r-x) f(x) is integrable at r-.
// Every verdict carries the improper-integral diagnostics it was based on,
// and any Indeterminate sub-answer surfaces as an inconclusive report, never
// as a silently degraded verdict.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "diffun/problem.hpp"
#include "diffun/quad.hpp"
#include "diffun/scale.hpp"

namespace diffun {

enum class Which { Left, Right };

struct EndpointBehavior {
  Which which = Which::Right;
  bool attracted = false;               // s finite at this endpoint
  std::optional<bool> explosive;        // present iff attracted
  bool indeterminate = false;
  ScaleLimit scale_limit;
  ImproperVerdict feller_integrand_verdict;  // only run when attracted
};

struct RecurrenceClass {
  bool recurrent_a = false;  // s(l) = -inf and s(r) = +inf
  bool indeterminate = false;
  EndpointBehavior left;
  EndpointBehavior right;
};

struct ReducedProblem {
  std::vector<double> D_points;
  std::vector<double> indeterminate_candidates;
  std::vector<double> candidates_tested;
  double alpha = 0.0;  // sup of D below x0, else l
  double beta = 0.0;   // inf of D above x0, else r
  bool x0_in_D = false;
  StateSpace I;        // (alpha, beta) with the original x0
};

enum class EventVerdict { Zero, Finite, Infinite, EventNull, Inconclusive };

inline const char* to_string(EventVerdict v) {
  switch (v) {
    case EventVerdict::Zero: return "zero";
    case EventVerdict::Finite: return "finite";
    case EventVerdict::Infinite: return "infinite";
    case EventVerdict::EventNull: return "event_null";
    default: return "inconclusive";
  }
}

struct SupportingVerdict {
  std::string name;
  ImproperVerdict verdict;
};

struct ConvergenceReport {
  ReducedProblem reduced;
  RecurrenceClass recurrence;   // of the reduced problem
  BoundaryLimits limits;        // of the reduced problem
  std::optional<EventVerdict> on_event_A;
  std::optional<EventVerdict> on_limit_r;
  std::optional<EventVerdict> on_limit_l;
  bool conclusive = false;
  std::string blocking;         // names the blocking integral when inconclusive
  std::vector<SupportingVerdict> supporting;
};

inline double sigma2_at(const Problem& p, double x) {
  const double sg = eval_expr(p.sigma, x);
  return sg * sg;
}

/// Feller's test at one endpoint: attracted iff the scale limit is finite;
/// explosive (exit in finite time with positive probability) iff additionally
/// (s(endpoint)-s)/(rho sigma^2) is integrable at the endpoint.
inline EndpointBehavior feller_test(const Problem& p, const ScaleFunction& sf,
                                    Which which, const BoundaryLimits& limits,
                                    const Tolerances& tol = {}) {
  EndpointBehavior out;
  out.which = which;
  const ScaleLimit& lim = (which == Which::Right) ? limits.s_r : limits.s_l;
  out.scale_limit = lim;
  if (lim.kind == LimitKind::Indeterminate) {
    out.indeterminate = true;
    return out;
  }
  out.attracted = lim.finite();
  if (!out.attracted) return out;

  auto integrand = [&, lim](double x) {
    const double tail = (which == Which::Right) ? sf.tail_to_r(x, lim)
                                                : sf.tail_to_l(x, lim);
    return tail / (sf.rho(x) * sigma2_at(p, x));
  };
  const double endpoint = (which == Which::Right) ? p.space.r : p.space.l;
  const Side side = (which == Which::Right) ? Side::LeftOf : Side::RightOf;
  out.feller_integrand_verdict =
      classify_improper(integrand, endpoint, side, p.space.x0, tol);
  switch (out.feller_integrand_verdict.kind) {
    case VerdictKind::Finite: out.explosive = true; break;
    case VerdictKind::Infinite: out.explosive = false; break;
    default: out.indeterminate = true; break;
  }
  return out;
}

inline RecurrenceClass classify_recurrence(const Problem& p, const ScaleFunction& sf,
                                           const BoundaryLimits& limits,
                                           const Tolerances& tol = {}) {
  RecurrenceClass out;
  out.left = feller_test(p, sf, Which::Left, limits, tol);
  out.right = feller_test(p, sf, Which::Right, limits, tol);
  if (limits.s_l.kind == LimitKind::Indeterminate ||
      limits.s_r.kind == LimitKind::Indeterminate) {
    out.indeterminate = true;
    return out;
  }
  out.recurrent_a = limits.s_l.kind == LimitKind::Infinite &&
                    limits.s_r.kind == LimitKind::Infinite;
  return out;
}

/// D-set reduction: alpha/beta are the nearest points around x0 where
/// f/sigma^2 fails local integrability; (alpha,beta) is the new state space.
inline ReducedProblem reduce_by_D(const Problem& p,
                                  const std::vector<double>& extra_candidates = {},
                                  const Tolerances& tol = {}) {
  ReducedProblem out;
  auto g = [&](double x) {
    const double fv = eval_expr(p.f, x);
    return fv / sigma2_at(p, x);
  };

  std::vector<double> candidates = p.declared_singularities;
  for (double c : extra_candidates) candidates.push_back(c);
  for (double c : probe_grid(p.space, 32)) candidates.push_back(c);

  candidates.erase(
      std::remove_if(candidates.begin(), candidates.end(),
                     [&](double x) { return !p.space.contains(x); }),
      candidates.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  out.candidates_tested = candidates;

  NonintegrabilityResult nr =
      nonintegrability_set(g, p.space.l, p.space.r, candidates, tol);
  out.D_points = nr.points;
  out.indeterminate_candidates = nr.indeterminate;

  out.alpha = p.space.l;
  out.beta = p.space.r;
  for (double d : out.D_points) {
    if (std::fabs(d - p.space.x0) < 1e-12 * (1.0 + std::fabs(p.space.x0)))
      out.x0_in_D = true;
    else if (d < p.space.x0)
      out.alpha = std::max(out.alpha, d);
    else
      out.beta = std::min(out.beta, d);
  }
  out.I = StateSpace{out.alpha, out.beta, p.space.x0};
  return out;
}

/// Recurrent case (both scale limits infinite): the functional is zero when
/// f vanishes Lebesgue-a.e., infinite otherwise. Positivity is decided on a
/// probe grid unless the problem carries the f_ae_zero flag.
inline EventVerdict theorem2_verdict(const Problem& p, const Tolerances& = {}) {
  if (p.f_ae_zero) return EventVerdict::Zero;
  const StateSpace& sp = p.space;
  // Multi-scale probe: 64 off-lattice points per dyadic window around x0,
  // so that features of any width down to ~1e-3 are hit.
  for (int e = -10; e <= 9; ++e) {
    const double w = std::ldexp(1.0, e);
    for (int i = 0; i < 64; ++i) {
      const double x = sp.x0 + w * (2.0 * (i + 0.5) / 64.0 - 1.0);
      if (!sp.contains(x)) continue;
      if (eval_expr(p.f, x) > 0) return EventVerdict::Infinite;
    }
  }
  for (double x : probe_grid(sp, 64)) {
    if (eval_expr(p.f, x) > 0) return EventVerdict::Infinite;
  }
  return EventVerdict::Zero;
}

/// Transient case at an attracted endpoint: finiteness of the functional on
/// {Y -> endpoint} is decided by (s(endpoint)-s) f / (rho sigma^2) there.
inline EventVerdict theorem3_verdict(const Problem& p, const ScaleFunction& sf,
                                     Which which, const BoundaryLimits& limits,
                                     const Tolerances& tol,
                                     ImproperVerdict* detail = nullptr) {
  const ScaleLimit& lim = (which == Which::Right) ? limits.s_r : limits.s_l;
  if (lim.kind == LimitKind::Indeterminate) return EventVerdict::Inconclusive;
  if (!lim.finite()) return EventVerdict::EventNull;

  auto integrand = [&, lim](double x) {
    const double tail = (which == Which::Right) ? sf.tail_to_r(x, lim)
                                                : sf.tail_to_l(x, lim);
    const double fv = eval_expr(p.f, x);
    return tail * fv / (sf.rho(x) * sigma2_at(p, x));
  };
  const double endpoint = (which == Which::Right) ? p.space.r : p.space.l;
  const Side side = (which == Which::Right) ? Side::LeftOf : Side::RightOf;
  ImproperVerdict v = classify_improper(integrand, endpoint, side, p.space.x0, tol);
  if (detail) *detail = v;
  switch (v.kind) {
    case VerdictKind::Finite: return EventVerdict::Finite;
    case VerdictKind::Infinite: return EventVerdict::Infinite;
    default: return EventVerdict::Inconclusive;
  }
}

/// Brownian special case: for B starting at x0 < r, int_0^{tau_r} f(B) du is
/// a.s. finite iff (r-x) f(x) is integrable at r-.
inline EventVerdict brownian_case_verdict(const Evaluator& f, double x0, double r,
                                          const Tolerances& tol = {},
                                          ImproperVerdict* detail = nullptr) {
  if (!(x0 < r)) throw std::invalid_argument("brownian_case_verdict: need x0 < r");
  auto integrand = [&](double x) { return (r - x) * f(x); };
  ImproperVerdict v = classify_improper(integrand, r, Side::LeftOf, x0, tol);
  if (detail) *detail = v;
  switch (v.kind) {
    case VerdictKind::Finite: return EventVerdict::Finite;
    case VerdictKind::Infinite: return EventVerdict::Infinite;
    default: return EventVerdict::Inconclusive;
  }
}

/// Full decision procedure: D-reduction, scale on the reduced interval,
/// recurrence classification, then the recurrent or per-endpoint verdicts.
inline ConvergenceReport full_verdict(const Problem& p, const Tolerances& tol = {},
                                      std::optional<double> reference = std::nullopt) {
  ConvergenceReport rep;
  rep.reduced = reduce_by_D(p, {}, tol);
  if (!rep.reduced.indeterminate_candidates.empty()) {
    rep.blocking = "local integrability of f/sigma^2 at candidate x=" +
                   std::to_string(rep.reduced.indeterminate_candidates.front());
    return rep;
  }
  if (rep.reduced.x0_in_D) {
    // eta_D == 0: the functional is 0 at t=0 and infinite for all t in
    // (0, zeta]; there is nothing left to classify.
    rep.conclusive = true;
    return rep;
  }

  Problem pr = p;
  pr.space = rep.reduced.I;
  ScaleFunction sf(pr, reference, tol);
  rep.limits = sf.limits();
  rep.recurrence = classify_recurrence(pr, sf, rep.limits, tol);
  rep.supporting.push_back({"scale_limit_r", rep.limits.s_r.detail});
  rep.supporting.push_back({"scale_limit_l", rep.limits.s_l.detail});
  if (rep.recurrence.right.attracted)
    rep.supporting.push_back({"feller_r", rep.recurrence.right.feller_integrand_verdict});
  if (rep.recurrence.left.attracted)
    rep.supporting.push_back({"feller_l", rep.recurrence.left.feller_integrand_verdict});

  if (rep.recurrence.indeterminate) {
    rep.blocking = "scale limit classification";
    return rep;
  }

  if (rep.recurrence.recurrent_a) {
    rep.on_event_A = theorem2_verdict(pr, tol);
    rep.conclusive = true;
    return rep;
  }

  ImproperVerdict dr, dl;
  rep.on_limit_r = theorem3_verdict(pr, sf, Which::Right, rep.limits, tol, &dr);
  rep.on_limit_l = theorem3_verdict(pr, sf, Which::Left, rep.limits, tol, &dl);
  if (rep.limits.s_r.finite()) rep.supporting.push_back({"convergence_integrand_r", dr});
  if (rep.limits.s_l.finite()) rep.supporting.push_back({"convergence_integrand_l", dl});

  if (*rep.on_limit_r == EventVerdict::Inconclusive) {
    rep.blocking = "convergence integrand at r";
    return rep;
  }
  if (*rep.on_limit_l == EventVerdict::Inconclusive) {
    rep.blocking = "convergence integrand at l";
    return rep;
  }
  rep.conclusive = true;
  return rep;
}

struct TransformedProblem {
  double s_l = -kInf;  // scale image of l (may be -inf)
  double s_r = kInf;   // scale image of r (may be +inf)
  Evaluator s_inverse;
  Evaluator sigma_tilde;  // (rho * sigma) o s^{-1}
  Evaluator f_tilde;      // f o s^{-1}
};

/// Scale transform of the problem: Y~ = s(Y) is driftless with diffusion
/// coefficient sigma_tilde on (s(l), s(r)). s^{-1} is resolved from a
/// monotone knot table refined by bisection.
inline TransformedProblem transform_problem(const Problem& p, const ScaleFunction& sf,
                                            const BoundaryLimits& limits) {
  TransformedProblem out;
  out.s_l = limits.s_l.finite() ? limits.s_l.value : -kInf;
  out.s_r = limits.s_r.finite() ? limits.s_r.value : kInf;

  auto grid = probe_grid(p.space, 256);
  auto knots = std::make_shared<std::vector<std::pair<double, double>>>();  // (s, x)
  for (double x : grid) knots->push_back({sf.s(x), x});
  std::sort(knots->begin(), knots->end());

  ScaleFunction sf_copy = sf;
  auto s_inverse = [knots, sf_copy](double u) {
    auto it = std::lower_bound(knots->begin(), knots->end(), std::make_pair(u, -kInf));
    if (it == knots->begin() || it == knots->end())
      throw std::domain_error("s_inverse: query outside the resolved mesh");
    double hi_x = it->second;
    double lo_x = std::prev(it)->second;
    for (int i = 0; i < 200 && hi_x - lo_x > 1e-14 * (1.0 + std::fabs(hi_x)); ++i) {
      const double mid = 0.5 * (lo_x + hi_x);
      if (sf_copy.s(mid) < u)
        lo_x = mid;
      else
        hi_x = mid;
    }
    return 0.5 * (lo_x + hi_x);
  };
  out.s_inverse = s_inverse;

  Expr sigma = p.sigma;
  Expr f = p.f;
  out.sigma_tilde = [s_inverse, sf_copy, sigma](double u) {
    const double x = s_inverse(u);
    return sf_copy.rho(x) * eval_expr(sigma, x);
  };
  out.f_tilde = [s_inverse, f](double u) {
    const double x = s_inverse(u);
    return eval_expr(f, x);
  };
  return out;
}

}  // namespace diffun
