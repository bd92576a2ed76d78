#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "margin_phase/rng.hpp"
#include "margin_phase/typical.hpp"

using namespace margin_phase;
using Catch::Approx;

TEST_CASE("f and g evaluate the entropy-like objective") {
  CHECK(f_barvinok(0.0) == 0.0);
  CHECK(f_barvinok(1.0) == Approx(2.0 * std::log(2.0)).margin(1e-14));
  CHECK(f_barvinok(3.0) == Approx(4.0 * std::log(4.0) - 3.0 * std::log(3.0)).margin(1e-14));
  CHECK_THROWS_AS(f_barvinok(-0.5), std::invalid_argument);

  DMat ones(3, 3, 1.0);
  CHECK(g_value(ones) == Approx(18.0 * std::log(2.0)).margin(1e-12));
  CHECK(g_value(DMat(2, 3, 0.0)) == 0.0);
  DMat d(2, 2, 0.0);
  d(0, 0) = d(1, 1) = 2.0;
  CHECK(g_value(d) == Approx(2.0 * (3.0 * std::log(3.0) - 2.0 * std::log(2.0))).margin(1e-12));
}

TEST_CASE("independence table and entropy") {
  DMat w = independence_table(Margins({2, 2}, {2, 2}));
  for (double v : w.data()) CHECK(v == 1.0);

  DMat w2 = independence_table(Margins({4, 2}, {3, 3}));
  CHECK(w2(0, 0) == 2.0);
  CHECK(w2(0, 1) == 2.0);
  CHECK(w2(1, 0) == 1.0);
  CHECK(w2(1, 1) == 1.0);

  DMat w3 = independence_table(Margins({1, 1, 1}, {1, 1, 1}));
  for (double v : w3.data()) CHECK(v == Approx(1.0 / 3.0).margin(1e-15));

  CHECK(entropy_H(DMat(2, 2, 1.0), 4.0) == Approx(std::log(4.0)).margin(1e-14));
  DMat single(1, 1, 7.0);
  CHECK(entropy_H(single, 7.0) == Approx(0.0).margin(1e-14));
  CHECK(entropy_H(w2, 6.0) ==
        Approx(2.0 * (2.0 / 6.0) * std::log(3.0) + 2.0 * (1.0 / 6.0) * std::log(6.0))
            .margin(1e-12));
}

TEST_CASE("typical table for symmetric margins is constant") {
  auto t = solve_typical(Margins({3, 3, 3}, {3, 3, 3}));
  for (double v : t.z.data()) CHECK(v == Approx(1.0).margin(1e-9));
  CHECK(t.residual <= 1e-10);

  auto t2 = solve_typical(Margins({2, 2}, {2, 2}));
  for (double v : t2.z.data()) CHECK(v == Approx(1.0).margin(1e-9));
}

TEST_CASE("typical table matches a brute-force grid scan on a 2x2 instance") {
  // Feasible set is {[[a, 4-a], [3-a, a-1]] : 1 <= a <= 3}; scan g to 1e-6.
  auto g_of = [](double a) {
    return f_barvinok(a) + f_barvinok(4.0 - a) + f_barvinok(3.0 - a) + f_barvinok(a - 1.0);
  };
  double best_a = 1.0, best = -1.0;
  for (double a = 1.0001; a <= 2.9999; a += 1e-4) {
    const double v = g_of(a);
    if (v > best) { best = v; best_a = a; }
  }
  for (double a = best_a - 2e-4; a <= best_a + 2e-4; a += 1e-7) {
    if (a <= 1.0 || a >= 3.0) continue;
    const double v = g_of(a);
    if (v > best) { best = v; best_a = a; }
  }
  CHECK(best_a == Approx(2.0).margin(1e-5));

  auto t = solve_typical(Margins({4, 2}, {3, 3}), 1e-11);
  CHECK(t.z(0, 0) == Approx(2.0).margin(1e-8));
  CHECK(t.z(0, 1) == Approx(2.0).margin(1e-8));
  CHECK(t.z(1, 0) == Approx(1.0).margin(1e-8));
  CHECK(t.z(1, 1) == Approx(1.0).margin(1e-8));
  CHECK(g_value(t.z) >= best - 1e-9);
}

TEST_CASE("typical table rejects zero margins and reports non-convergence") {
  CHECK_THROWS_AS(solve_typical(Margins({0, 4}, {2, 2})), std::invalid_argument);
  CHECK_THROWS_AS(solve_typical(Margins({2, 2}, {2, 2}), 1e-14, 0), ConvergenceError);
  try {
    solve_typical(Margins({5, 1}, {3, 3}), 1e-30, 3);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("dual reconstruction and maximality vs the independence table") {
  Margins m({7, 3, 2}, {5, 4, 3});
  auto t = solve_typical(m, 1e-11);
  for (std::size_t i = 0; i < m.m(); ++i)
    for (std::size_t j = 0; j < m.n(); ++j) {
      const double s = t.lambda[i] + t.mu[j];
      CHECK(s > 0.0);
      CHECK(t.z(i, j) == Approx(1.0 / std::expm1(s)).margin(1e-12));
    }
  CHECK(g_value(t.z) >= g_value(independence_table(m)));
}

TEST_CASE("g is stationary at the solution under cycle perturbations") {
  SplitMix64 rng(2024);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t m = 2 + rng.below(4), n = 2 + rng.below(4);
    IMat a(m, n);
    for (auto& v : a.data()) v = 1 + static_cast<std::int64_t>(rng.below(3));
    Margins mg(a.row_sums(), a.col_sums());
    auto t = solve_typical(mg, 1e-11);
    const double eps = 1e-4;
    for (int cyc = 0; cyc < 50; ++cyc) {
      const std::size_t i = rng.below(m), j = rng.below(n);
      std::size_t i2 = rng.below(m - 1), j2 = rng.below(n - 1);
      if (i2 >= i) ++i2;
      if (j2 >= j) ++j2;
      if (std::min({t.z(i, j), t.z(i, j2), t.z(i2, j), t.z(i2, j2)}) < 10 * eps) continue;
      auto delta_g = [&](double e) {
        return f_barvinok(t.z(i, j) + e) + f_barvinok(t.z(i2, j2) + e) +
               f_barvinok(t.z(i, j2) - e) + f_barvinok(t.z(i2, j) - e) -
               (f_barvinok(t.z(i, j)) + f_barvinok(t.z(i2, j2)) +
                f_barvinok(t.z(i, j2)) + f_barvinok(t.z(i2, j)));
      };
      CHECK(delta_g(eps) < 0.0);
      CHECK(delta_g(-eps) < 0.0);
    }
  }
}

TEST_CASE("block solver: symmetric endpoint in closed form") {
  // delta = 1, B = 1, C = 1: all entries 1/2, P = Q = sqrt(3).
  for (std::int64_t n : {2, 5, 17}) {
    auto bt = solve_typical_block(BlockSpec(n, 1.0, 1.0, 1.0));
    CHECK(bt.z11 == Approx(0.5).margin(1e-10));
    CHECK(bt.z1n1 == Approx(0.5).margin(1e-10));
    CHECK(bt.znn == Approx(0.5).margin(1e-10));
    CHECK(bt.P == Approx(std::sqrt(3.0)).margin(1e-9));
    CHECK(bt.Q == Approx(std::sqrt(3.0)).margin(1e-9));
  }
}

TEST_CASE("block and general solvers agree on block margins") {
  for (auto [n, delta, B, C] :
       {std::tuple<std::int64_t, double, double, double>{6, 0.5, 2.0, 1.0},
        {10, 0.3, 3.5, 9.0},
        {12, 0.8, 1.5, 1.0}}) {
    BlockSpec spec(n, delta, B, C);
    auto bt = solve_typical_block(spec, 1e-12);
    auto tt = solve_typical(block_margins(spec), 1e-11);
    const auto k = static_cast<std::size_t>(spec.k());
    CHECK(tt.z(0, 0) == Approx(bt.z11).margin(1e-8));
    CHECK(tt.z(0, k) == Approx(bt.z1n1).margin(1e-8));
    CHECK(tt.z(k, k) == Approx(bt.znn).margin(1e-8));
  }
}

TEST_CASE("subcritical and supercritical closed-form limits") {
  const double Bc = critical_B(1.0);
  CHECK(subcritical_limit_z11(2.0, 1.0) == Approx(8.0).margin(1e-12));
  CHECK(subcritical_limit_z11(1.0, 1.0) == Approx(1.0).margin(1e-12));
  CHECK(subcritical_limit_z11(1e-9, 1.0) == Approx(0.0).margin(1e-12));
  CHECK_THROWS_AS(subcritical_limit_z11(Bc, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(subcritical_limit_z11(3.0, 1.0), std::invalid_argument);

  CHECK(supercritical_scaled_z11(3.0, 1.0) == Approx(2.0 - std::sqrt(2.0)).margin(1e-12));
  CHECK(supercritical_scaled_z11(Bc + 1.0, 1.0) == Approx(1.0).margin(1e-12));
  CHECK(supercritical_scaled_z11(2.2, 9.0) ==
        Approx(9.0 * (2.2 - (1.0 + std::sqrt(10.0 / 9.0)))).margin(1e-12));
  CHECK(supercritical_scaled_z11(2.2, 9.0) == Approx(1.313167).margin(1e-6));
  CHECK_THROWS_AS(supercritical_scaled_z11(2.0, 1.0), std::invalid_argument);
}

TEST_CASE("block solver approaches the closed-form limits at the paper's rate") {
  // Subcritical B=2, C=1, delta=0.7: z11 -> 8 from below, error ~ K n^{delta-1}.
  double prev_err = 1e100;
  for (std::int64_t n : {100, 1000, 10000, 100000}) {
    auto bt = solve_typical_block(BlockSpec(n, 0.7, 2.0, 1.0));
    const double err = std::abs(bt.z11 - 8.0);
    CHECK(err < prev_err);
    CHECK(bt.z11 <= subcritical_limit_z11(2.0, 1.0) + 0.01);  // limsup bound
    prev_err = err;
  }
  // Supercritical B=3, C=1: scaled corner, side and bottom entries converge.
  prev_err = 1e100;
  double prev_znn = 1e100, prev_z1n1 = 1e100;
  for (std::int64_t n : {100, 1000, 10000, 100000}) {
    auto bt = solve_typical_block(BlockSpec(n, 0.7, 3.0, 1.0));
    const double scaled = std::pow(static_cast<double>(n), -0.3) * bt.z11;
    const double err = std::abs(scaled - (2.0 - std::sqrt(2.0)));
    CHECK(err < prev_err);
    prev_err = err;
    CHECK(std::abs(bt.znn - 1.0) < prev_znn);
    prev_znn = std::abs(bt.znn - 1.0);
    CHECK(std::abs(bt.z1n1 - critical_B(1.0)) < prev_z1n1);
    prev_z1n1 = std::abs(bt.z1n1 - critical_B(1.0));
  }
}

TEST_CASE("solver copes with strongly unbalanced margins") {
  Margins m({100, 1, 1}, {50, 51, 1});
  auto t = solve_typical(m, 1e-10);
  CHECK(t.residual <= 1e-10);
  auto rs = t.z.row_sums();
  CHECK(rs[0] == Approx(100.0).margin(1e-9));
  // B at criticality is accepted by the solver.
  auto bt = solve_typical_block(BlockSpec(50, 0.5, critical_B(1.0), 1.0));
  CHECK(bt.residual <= 1e-10);
}
