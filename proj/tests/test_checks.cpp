#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diffun/checks.hpp"

using namespace diffun;

TEST_CASE("summarize: mean and standard error") {
  auto s = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(s.n_paths == 4);
  CHECK(s.estimate == doctest::Approx(2.5));
  // sample sd = sqrt(5/3), se = sd/2
  CHECK(s.std_error == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
}

TEST_CASE("map_indexed is independent of the thread count") {
  auto job = [](std::size_t i) { return Rng::for_path(9, i).normal(); };
  auto a = map_indexed<double>(500, 1, job);
  auto b = map_indexed<double>(500, 8, job);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("KS accepts identical distributions and rejects shifted ones") {
  std::vector<double> a, b, c;
  Rng r(1);
  for (int i = 0; i < 2000; ++i) {
    a.push_back(r.normal());
    b.push_back(r.normal());
    c.push_back(r.normal() + 1.0);
  }
  const auto same = ks_two_sample(a, b);
  CHECK(same.p_value > 0.01);
  const auto diff = ks_two_sample(a, c);
  CHECK(diff.p_value < 1e-6);
  CHECK(diff.statistic > same.statistic);
}

TEST_CASE("KS statistic bounds") {
  auto r = ks_two_sample({1.0, 2.0}, {10.0, 11.0});
  CHECK(r.statistic == doctest::Approx(1.0));
  r = ks_two_sample({1.0, 2.0}, {1.0, 2.0});
  CHECK(r.statistic == doctest::Approx(0.0));
  CHECK(r.p_value == doctest::Approx(1.0));
}

TEST_CASE("median helper") {
  CHECK(median_of({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median_of({4.0, 1.0, 2.0, 3.0}) == doctest::Approx(2.5));
}

TEST_CASE("occupation identity holds on a stopped BM path") {
  auto f = [](double x) { return std::exp(-x * x); };
  const double dt = 2.5e-4;
  std::vector<double> errs;
  for (std::uint64_t i = 0; i < 10; ++i) {
    auto path = simulate_bm_to_hit(0.0, 1.0, dt, Rng::for_path(31, i).next_u64(), 1e4);
    errs.push_back(occupation_identity_relerr(path, f, 2.0 * std::sqrt(dt)));
  }
  CHECK(median_of(errs) < 0.05);
}

TEST_CASE("fubini mean check on f = 1 hits 1/2") {
  auto f = [](double) { return 1.0; };
  auto res = fubini_mean_check(f, 1.0, 0.0, 2000, 77);
  CHECK(res.rhs == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(std::fabs(res.z_score) < 4.0);
}

TEST_CASE("cherny trend matches the dichotomy on a small run") {
  auto conv = cherny_dichotomy_check(1.5, 1.0, 60, 1e-3, 5);
  CHECK(conv.frac_converging > 0.8);
  auto div = cherny_dichotomy_check(2.5, 1.0, 60, 1e-3, 5);
  CHECK(div.frac_diverging > 0.8);
  CHECK_THROWS_AS(cherny_dichotomy_check(2.0, 1.0, 10, 1e-3, 5), std::invalid_argument);
}

TEST_CASE("verdict agreement on a fast transient case") {
  Problem p;
  p.space = {0.0, kInf, 1.0};
  p.mu = parse_expr("0");
  p.sigma = parse_expr("x");
  p.f = parse_expr("1");
  auto rep = full_verdict(p);
  REQUIRE(rep.conclusive);
  SimParams sp;
  sp.dt = 1e-3;
  sp.horizon = 32.0;
  sp.master_seed = 3;
  auto ag = verdict_agreement(p, rep, 60, sp);
  CHECK(ag.overall_fraction > 0.8);
  // deterministic across thread counts
  sp.threads = 4;
  auto ag2 = verdict_agreement(p, rep, 60, sp);
  CHECK(ag.overall_fraction == ag2.overall_fraction);
  CHECK(ag.summary.estimate == ag2.summary.estimate);
}
