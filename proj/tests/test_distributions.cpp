#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "margin_phase/distributions.hpp"

using namespace margin_phase;
using Catch::Approx;

TEST_CASE("geometric pmf, mean, tails") {
  GeomDist g(1.0);
  CHECK(g.pmf(0) == Approx(0.5).margin(1e-15));
  CHECK(g.pmf(3) == Approx(1.0 / 16.0).margin(1e-15));
  CHECK(g.mean() == 1.0);
  CHECK(g.variance() == 2.0);
  CHECK_THROWS_AS(GeomDist(0.0), std::invalid_argument);

  // Normalization: partial sums plus the closed-form tail reach 1.
  for (double lambda : {0.1, 1.0, 7.5}) {
    GeomDist d(lambda);
    double acc = 0.0;
    std::int64_t k = 0;
    while (d.tail(k) >= 1e-13) acc += d.pmf(k++);
    CHECK(acc + d.tail(k) == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("paper-convention TV distance") {
  CHECK(tv_distance(GeomDist(2.5), GeomDist(2.5)) == Approx(0.0).margin(1e-12));

  EmpiricalDist at0, at1;
  at0.add(0, 10);
  at1.add(1, 3);
  CHECK(tv_distance(at0, at1) == Approx(2.0).margin(1e-15));  // no 1/2 factor

  const double tv12 = tv_distance(GeomDist(1.0), GeomDist(2.0));
  CHECK(tv12 > 0.0);
  CHECK(tv12 <= tv_geom_bound(1.0, 2.0));
}

TEST_CASE("Prop-style TV bound between geometric laws") {
  CHECK(tv_geom_bound(5.0, 5.0) == 0.0);
  CHECK(tv_geom_bound(1.0, 2.0) == Approx(4.0 / 3.0).margin(1e-14));
  CHECK_THROWS_AS(tv_geom_bound(-1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(tv_geom_bound(1.0, 0.0), std::invalid_argument);

  SplitMix64 rng(4321);
  for (int i = 0; i < 2000; ++i) {
    const double l1 = 10.0 * rng.next_unit();
    const double l2 = 10.0 * rng.next_unit();
    if (l1 <= 0 || l2 <= 0) continue;
    CHECK(tv_distance(GeomDist(l1), GeomDist(l2)) <= tv_geom_bound(l1, l2) + 1e-12);
  }
}

TEST_CASE("TV is symmetric and satisfies the triangle inequality") {
  SplitMix64 rng(777);
  for (int i = 0; i < 300; ++i) {
    const GeomDist a(0.1 + 9.9 * rng.next_unit());
    const GeomDist b(0.1 + 9.9 * rng.next_unit());
    const GeomDist c(0.1 + 9.9 * rng.next_unit());
    const double ab = tv_distance(a, b), ba = tv_distance(b, a);
    CHECK(ab == Approx(ba).margin(1e-12));
    CHECK(ab <= tv_distance(a, c) + tv_distance(c, b) + 1e-12);
  }
}

TEST_CASE("truncated and excess means") {
  GeomDist g(1.0);
  CHECK(g.truncated_mean(1e9) == Approx(1.0).margin(1e-12));
  CHECK(g.truncated_mean(0.0) == 0.0);
  CHECK(g.truncated_mean(1.0) == Approx(0.5).margin(1e-14));
  CHECK(g.excess_mean(0.0) == Approx(g.mean()).margin(1e-14));
  CHECK(g.excess_mean(1e9) == Approx(0.0).margin(1e-12));

  SplitMix64 rng(31);
  for (int i = 0; i < 200; ++i) {
    const GeomDist d(0.05 + 12.0 * rng.next_unit());
    const double M = 20.0 * rng.next_unit();
    CHECK(d.truncated_mean(M) + d.excess_mean(M) == Approx(d.mean()).margin(1e-12));
  }

  EmpiricalDist e;
  e.add(0, 5);
  e.add(2, 3);
  e.add(7, 2);
  const double M = 2.5;
  CHECK(e.truncated_mean(M) + e.excess_mean(M) == Approx(e.mean()).margin(1e-12));
  CHECK(e.mean() == Approx((0.0 * 5 + 2.0 * 3 + 7.0 * 2) / 10.0).margin(1e-14));
}

TEST_CASE("empirical TV to a geometric law handles the tail exactly") {
  // All-zero sample vs Geom(1): |1 - 1/2| + tail(1) = 1.
  EmpiricalDist zeros;
  zeros.add(0, 1000);
  CHECK(empirical_tv_to_geom(zeros, 1.0) == Approx(1.0).margin(1e-12));

  // Exact uniform law on {0,1,2} (the entry law of X11 on margins (2,2)^2)
  // vs Geom(z11 = 1): frozen value 7/12.
  EmpiricalDist third;
  third.add(0, 1);
  third.add(1, 1);
  third.add(2, 1);
  CHECK(empirical_tv_to_geom(third, 1.0) == Approx(7.0 / 12.0).margin(1e-12));

  // A histogram rendered from the geometric pmf itself converges to 0.
  EmpiricalDist close;
  GeomDist g(1.0);
  const std::int64_t big = 1'000'000'000;
  for (std::int64_t k = 0; k <= 40; ++k) {
    const auto c = static_cast<std::int64_t>(std::round(g.pmf(k) * static_cast<double>(big)));
    if (c > 0) close.add(k, c);
  }
  CHECK(empirical_tv_to_geom(close, 1.0) < 1e-6);

  CHECK_THROWS_AS(empirical_tv_to_geom(EmpiricalDist{}, 1.0), std::invalid_argument);
}

TEST_CASE("histogram merge is associative bookkeeping") {
  EmpiricalDist a, b;
  a.add(0, 2);
  a.add(3, 1);
  b.add(3, 4);
  b.add(5, 1);
  a.merge(b);
  CHECK(a.total() == 8);
  CHECK(a.prob(3) == Approx(5.0 / 8.0));
  CHECK(a.max_value() == 5);

  auto j = a.to_json();
  CHECK(j["total"] == 8);
  CHECK(j["counts"]["3"] == 5);
}

TEST_CASE("geometric sampling matches its law") {
  SplitMix64 rng(5150);
  GeomDist g(1.0);
  std::int64_t zeros = 0;
  const int T = 200000;
  double sum = 0.0;
  for (int i = 0; i < T; ++i) {
    const std::int64_t v = g.sample(rng);
    zeros += v == 0;
    sum += static_cast<double>(v);
  }
  // P(Y=0) = 1/2 and E[Y] = 1, both within 4 standard errors.
  CHECK(std::abs(static_cast<double>(zeros) / T - 0.5) < 4.0 * std::sqrt(0.25 / T));
  CHECK(std::abs(sum / T - 1.0) < 4.0 * std::sqrt(2.0 / T));

  // lambda -> 0+ returns 0 with probability -> 1.
  GeomDist tiny(1e-9);
  for (int i = 0; i < 1000; ++i) CHECK(tiny.sample(rng) == 0);
}
