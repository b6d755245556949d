#pragma once

// Problem definition: open state space (l,r), SDE coefficients mu/sigma and
// the functional integrand f, all given as expressions of x. Validation is
// grid-based: sigma != 0, coefficients finite, f nonnegative, probed on a
// geometric grid clustering toward the endpoints. Integrability conditions
// on 1/sigma^2 and mu/sigma^2 can only be checked at probe points plus the
// user-declared singularities; the result records that the check is
// grid-verified, not exhaustive.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "diffun/expr.hpp"

namespace diffun {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct StateSpace {
  double l = -kInf;
  double r = kInf;
  double x0 = 0.0;

  bool contains(double x) const { return l < x && x < r; }
  bool well_formed() const { return l < x0 && x0 < r && std::isfinite(x0); }
};

struct Problem {
  StateSpace space;
  Expr mu;
  Expr sigma;
  Expr f;
  std::vector<double> declared_singularities;
  bool f_ae_zero = false;  // user asserts f = 0 Lebesgue-a.e.
};

struct Violation {
  std::string condition;
  double point;
  std::string detail;
};

struct ValidationResult {
  bool ok = false;
  bool grid_verified_only = true;  // always: the check is a probe grid
  std::vector<Violation> violations;
};

/// Probe grid on (l,r) clustering geometrically toward both endpoints.
/// Finite endpoints are approached by shrinking distances; infinite ones by
/// doubling distances from x0.
inline std::vector<double> probe_grid(const StateSpace& sp, std::size_t n) {
  std::vector<double> pts;
  pts.reserve(n + 1);
  const std::size_t half = n / 2;
  auto side = [&](double endpoint, int sign) {
    // sign = +1 toward r, -1 toward l
    if (std::isfinite(endpoint)) {
      const double gap = std::fabs(endpoint - sp.x0);
      double q = std::pow(1e-6, 1.0 / static_cast<double>(half));
      double d = gap;
      for (std::size_t i = 0; i < half; ++i) {
        d *= q;
        pts.push_back(endpoint - sign * d);
      }
    } else {
      double d = std::max(1.0, std::fabs(sp.x0));
      for (std::size_t i = 0; i < half; ++i) {
        d *= 2.0;
        if (d > 1e12) break;
        pts.push_back(sp.x0 + sign * d);
      }
    }
  };
  pts.push_back(sp.x0);
  side(sp.r, +1);
  side(sp.l, -1);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

inline ValidationResult validate_problem(const Problem& p, std::size_t n_probes = 64) {
  ValidationResult res;
  if (n_probes < 16) n_probes = 16;
  if (!p.space.well_formed()) {
    res.violations.push_back({"state_space", p.space.x0, "requires l < x0 < r with finite x0"});
    return res;
  }

  auto near_declared = [&](double x) {
    for (double s : p.declared_singularities)
      if (std::fabs(x - s) < 1e-9 * (1.0 + std::fabs(s))) return true;
    return false;
  };

  for (double x : probe_grid(p.space, n_probes)) {
    const double sg = eval_expr(p.sigma, x);
    if (std::isnan(sg) || sg == 0.0) {
      if (!near_declared(x))
        res.violations.push_back({"sigma_nonzero", x,
                                  std::isnan(sg) ? "sigma undefined" : "sigma(x) = 0"});
    }
    const double mu = eval_expr(p.mu, x);
    if (std::isnan(mu) && !near_declared(x))
      res.violations.push_back({"mu_defined", x, "mu undefined"});
    const double fv = eval_expr(p.f, x);
    if (std::isnan(fv)) {
      if (!near_declared(x)) res.violations.push_back({"f_defined", x, "f undefined"});
    } else if (fv < 0.0) {
      res.violations.push_back({"f_nonnegative", x, "f(x) < 0"});
    }
  }
  res.ok = res.violations.empty();
  return res;
}

}  // namespace diffun
