#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diffun/problem.hpp"
#include "diffun/quad.hpp"

using namespace diffun;

TEST_CASE("compact quadrature on smooth integrands") {
  auto r = integrate_compact([](double x) { return x * x; }, 0.0, 3.0);
  CHECK(r.value == doctest::Approx(9.0).epsilon(1e-12));
  r = integrate_compact([](double x) { return std::sin(x); }, 0.0, M_PI);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-12));
  r = integrate_compact([](double x) { return std::exp(-x * x); }, -6.0, 6.0);
  CHECK(r.value == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-10));
}

TEST_CASE("compact quadrature additivity") {
  auto g = [](double x) { return 1.0 / (1.0 + x * x); };
  const double whole = integrate_compact(g, 0.0, 4.0).value;
  const double split =
      integrate_compact(g, 0.0, 1.3).value + integrate_compact(g, 1.3, 4.0).value;
  CHECK(whole == doctest::Approx(split).epsilon(1e-10));
  CHECK(whole == doctest::Approx(std::atan(4.0)).epsilon(1e-10));
}

TEST_CASE("power-law calibration at a finite endpoint") {
  // int_0^1 x^-p: finite iff p < 1, value 1/(1-p)
  for (double p : {0.25, 0.5, 0.75}) {
    auto v = classify_improper([p](double x) { return std::pow(x, -p); }, 0.0,
                               Side::RightOf, 1.0);
    REQUIRE(v.kind == VerdictKind::Finite);
    CHECK(v.value == doctest::Approx(1.0 / (1.0 - p)).epsilon(1e-8));
    REQUIRE(v.exponent_estimate.has_value());
    CHECK(*v.exponent_estimate == doctest::Approx(-p).epsilon(1e-2));
  }
  for (double p : {1.0, 1.25, 1.5}) {
    auto v = classify_improper([p](double x) { return std::pow(x, -p); }, 0.0,
                               Side::RightOf, 1.0);
    CHECK(v.kind == VerdictKind::Infinite);
  }
}

TEST_CASE("power-law calibration at infinity") {
  // int_1^inf x^-p: finite iff p > 1
  for (double p : {1.5, 2.0, 3.0}) {
    auto v = classify_improper([p](double x) { return std::pow(x, -p); }, kInf,
                               Side::LeftOf, 1.0);
    REQUIRE(v.kind == VerdictKind::Finite);
    CHECK(v.value == doctest::Approx(1.0 / (p - 1.0)).epsilon(1e-7));
  }
  for (double p : {0.5, 1.0}) {
    auto v = classify_improper([p](double x) { return std::pow(x, -p); }, kInf,
                               Side::LeftOf, 1.0);
    CHECK(v.kind == VerdictKind::Infinite);
  }
}

TEST_CASE("left-of-endpoint and negative-axis orientations") {
  auto v = classify_improper([](double x) { return std::pow(1.0 - x, -0.5); }, 1.0,
                             Side::LeftOf, 0.0);
  REQUIRE(v.kind == VerdictKind::Finite);
  CHECK(v.value == doctest::Approx(2.0).epsilon(1e-8));
  v = classify_improper([](double x) { return std::exp(x); }, -kInf, Side::RightOf, 0.0);
  REQUIRE(v.kind == VerdictKind::Finite);
  CHECK(v.value == doctest::Approx(1.0).epsilon(1e-8));
  v = classify_improper([](double) { return 1.0; }, -kInf, Side::RightOf, 0.0);
  CHECK(v.kind == VerdictKind::Infinite);
}

TEST_CASE("partial integrals are monotone for nonnegative integrands") {
  auto v = classify_improper([](double x) { return std::pow(x, -0.9); }, 0.0,
                             Side::RightOf, 1.0);
  REQUIRE(v.partial_integrals.size() >= 3);
  for (std::size_t i = 1; i < v.partial_integrals.size(); ++i) {
    CHECK(v.partial_integrals[i].first < v.partial_integrals[i - 1].first);
    CHECK(v.partial_integrals[i].second >= v.partial_integrals[i - 1].second);
  }
}

TEST_CASE("logarithmic divergence is caught") {
  auto v = classify_improper([](double x) { return 1.0 / x; }, 0.0, Side::RightOf, 1.0);
  CHECK(v.kind == VerdictKind::Infinite);
  // log-integrable singularity converges
  v = classify_improper([](double x) { return -std::log(x); }, 0.0, Side::RightOf, 1.0);
  REQUIRE(v.kind == VerdictKind::Finite);
  CHECK(v.value == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("local integrability at an interior point") {
  auto li = local_integrability_at([](double x) { return std::fabs(x) < 1e-300
                                                         ? kInf
                                                         : std::pow(std::fabs(x), -0.5); },
                                   0.0, 1.0);
  CHECK(li.integrable);
  li = local_integrability_at([](double x) { return std::fabs(x) < 1e-300
                                                    ? kInf
                                                    : std::pow(std::fabs(x), -1.5); },
                              0.0, 1.0);
  CHECK_FALSE(li.integrable);
  CHECK_FALSE(li.indeterminate);
  li = local_integrability_at([](double) { return 2.0; }, 0.0, 1.0);
  CHECK(li.integrable);
  CHECK(li.short_circuited);
}

TEST_CASE("nonintegrability set of a two-pole integrand") {
  auto g = [](double x) {
    const double a = std::fabs(x), b = std::fabs(x - 1.0);
    return 1.0 / (a * a) + 1.0 / b;  // non-integrable at 0, integrable-ish? no: 1/|x-1| fails too
  };
  auto res = nonintegrability_set(g, -5.0, 5.0, {0.0, 1.0, 2.0});
  REQUIRE(res.points.size() == 2);
  CHECK(res.points[0] == 0.0);
  CHECK(res.points[1] == 1.0);
  CHECK(res.indeterminate.empty());
}

TEST_CASE("undefined whole panel raises") {
  CHECK_THROWS_AS(integrate_compact([](double) { return std::nan(""); }, 0.0, 1.0),
                  NonConvergentError);
}
