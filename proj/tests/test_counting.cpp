#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "margin_phase/counting.hpp"
#include "margin_phase/rng.hpp"

using namespace margin_phase;
using Catch::Approx;

TEST_CASE("exact counts on known instances") {
  CHECK(count_exact(Margins({2, 2}, {2, 2})) == 3);
  CHECK(count_exact(Margins({1, 1, 1}, {1, 1, 1})) == 6);
  CHECK(count_exact(Margins({3, 3, 3}, {3, 3, 3})) == 55);
  CHECK(count_exact(Margins({2, 1, 1}, {2, 1, 1})) == 7);
  CHECK(count_exact(Margins({4, 2}, {3, 3})) == 3);
  CHECK(count_exact(Margins({1, 1}, {1, 1})) == 2);
  // Larger spot check, still exact.
  CHECK(count_exact(Margins({12, 12, 4, 4, 4, 4}, {12, 12, 4, 4, 4, 4})) ==
        BigInt("34022301938"));
}

TEST_CASE("enumeration streams every table once, lexicographically") {
  auto tabs = enumerate_tables(Margins({2, 1}, {2, 1}));
  REQUIRE(tabs.size() == 2);
  // Ascending row-major order.
  CHECK(tabs[0](0, 0) == 1);
  CHECK(tabs[0](0, 1) == 1);
  CHECK(tabs[0](1, 0) == 1);
  CHECK(tabs[0](1, 1) == 0);
  CHECK(tabs[1](0, 0) == 2);
  CHECK(tabs[1](1, 1) == 1);

  auto perms = enumerate_tables(Margins({1, 1}, {1, 1}));
  REQUIRE(perms.size() == 2);

  CHECK(enumerate_tables(Margins({2, 2}, {2, 2})).size() == 3);

  for (const auto& t : enumerate_tables(Margins({3, 3, 3}, {3, 3, 3}))) {
    CHECK(t.row_sums() == std::vector<std::int64_t>{3, 3, 3});
    CHECK(t.col_sums() == std::vector<std::int64_t>{3, 3, 3});
  }
}

TEST_CASE("count equals enumeration length on random small margins") {
  SplitMix64 rng(99);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t m = 1 + rng.below(4), n = 1 + rng.below(4);
    IMat a(m, n);
    for (auto& v : a.data()) v = static_cast<std::int64_t>(rng.below(4));
    Margins mg(a.row_sums(), a.col_sums());
    CHECK(count_exact(mg) == BigInt(enumerate_tables(mg).size()));
  }
}

TEST_CASE("count is invariant under simultaneous margin permutations") {
  Margins base({5, 2, 3}, {4, 1, 5});
  const BigInt expected = count_exact(base);
  std::vector<std::int64_t> rows = base.rows(), cols = base.cols();
  std::sort(rows.begin(), rows.end());
  std::sort(cols.begin(), cols.end());
  do {
    do {
      CHECK(count_exact(Margins(rows, cols)) == expected);
    } while (std::next_permutation(cols.begin(), cols.end()));
  } while (std::next_permutation(rows.begin(), rows.end()));
}

TEST_CASE("budget overruns are an error, not an approximation") {
  CHECK_THROWS_AS(count_exact(Margins({3, 3, 3}, {3, 3, 3}), 10), BudgetExceededError);
  CHECK_THROWS_AS(enumerate_tables(Margins({3, 3, 3}, {3, 3, 3}), 10), BudgetExceededError);
}

TEST_CASE("Barvinok upper bound dominates the exact count") {
  auto r = barvinok_log_bounds(Margins({3, 3, 3}, {3, 3, 3}));
  REQUIRE(r.exact.has_value());
  CHECK(*r.exact == 55);
  CHECK(r.log_upper == Approx(18.0 * std::log(2.0)).margin(1e-8));
  CHECK(std::log(55.0) <= r.log_upper + 1e-9);
  CHECK(r.N == 9);
  CHECK(r.m_plus_n == 6);

  auto r2 = barvinok_log_bounds(Margins({1, 1}, {1, 1}));
  REQUIRE(r2.exact.has_value());
  CHECK(*r2.exact == 2);
  CHECK(r2.log_upper == Approx(4.0 * f_barvinok(0.5)).margin(1e-8));
  CHECK(std::log(2.0) <= r2.log_upper);

  auto r3 = barvinok_log_bounds(Margins({4, 2}, {3, 3}));
  REQUIRE(r3.exact.has_value());
  CHECK(std::log(static_cast<double>(*r3.exact)) <= r3.log_upper + 1e-9);
}

TEST_CASE("Fisher-Yates log pmf normalizes over the table set") {
  for (auto margins : {Margins({1, 1}, {1, 1}), Margins({2, 2}, {2, 2}),
                       Margins({2, 1, 1}, {2, 1, 1})}) {
    double total = 0.0;
    for (const auto& t : enumerate_tables(margins))
      total += std::exp(fisher_yates_log_pmf(t, margins));
    CHECK(total == Approx(1.0).margin(1e-9));
  }
  // Two permutation matrices are equiprobable.
  Margins m11({1, 1}, {1, 1});
  auto tabs = enumerate_tables(m11);
  CHECK(fisher_yates_log_pmf(tabs[0], m11) == Approx(std::log(0.5)).margin(1e-12));

  IMat bad(2, 2, 0);
  bad(0, 0) = 2;  // row sums (2,0) != (1,1)
  CHECK_THROWS_AS(fisher_yates_log_pmf(bad, m11), std::invalid_argument);
}
