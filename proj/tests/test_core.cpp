#include <catch2/catch_amalgamated.hpp>

#include "margin_phase/core.hpp"

using namespace margin_phase;

TEST_CASE("margins validate and expose totals") {
  Margins m({4, 2}, {3, 3});
  CHECK(m.total() == 6);
  CHECK(m.m() == 2);
  CHECK(m.n() == 2);
  CHECK(m.all_positive());

  CHECK_THROWS_AS(Margins({1, 2}, {4}), std::invalid_argument);   // unequal totals
  CHECK_THROWS_AS(Margins({-1, 4}, {3}), std::invalid_argument);  // negative
  CHECK_THROWS_AS(Margins({}, {}), std::invalid_argument);        // empty
  CHECK_FALSE(Margins({0, 3}, {3, 0}).all_positive());
}

TEST_CASE("margins JSON round trip") {
  Margins m({4, 2}, {3, 3});
  auto j = m.to_json();
  CHECK(j.dump() == R"({"cols":[3,3],"rows":[4,2]})");
  CHECK(Margins::from_json(j) == m);
}

TEST_CASE("block margins match the defining formula") {
  // (n=4, delta=0.5, B=3, C=1): k = 2, heavy 12, light 4.
  Margins a = block_margins(BlockSpec(4, 0.5, 3.0, 1.0));
  CHECK(a.rows() == std::vector<std::int64_t>{12, 12, 4, 4, 4, 4});
  CHECK(a.cols() == a.rows());
  CHECK(a.total() == 40);

  // delta = 0 gives a single heavy row/column.
  Margins b = block_margins(BlockSpec(3, 0.0, 2.0, 1.0));
  CHECK(b.rows() == std::vector<std::int64_t>{6, 3, 3, 3});

  // B = 1 collapses to uniform margins.
  Margins c = block_margins(BlockSpec(2, 1.0, 1.0, 1.0));
  CHECK(c.rows() == std::vector<std::int64_t>{2, 2, 2, 2});

  CHECK_THROWS_AS(BlockSpec(0, 0.5, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(BlockSpec(4, 0.5, -1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(BlockSpec(4, 0.5, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("critical value") {
  CHECK(critical_B(1.0) == Catch::Approx(1.0 + std::sqrt(2.0)).epsilon(0).margin(1e-15));
  CHECK(critical_B(1.0 / 3.0) == Catch::Approx(3.0).margin(1e-12));
  CHECK(critical_B(1e9) == Catch::Approx(2.0000000005).margin(1e-12));
  CHECK_THROWS_AS(critical_B(0.0), std::invalid_argument);
  CHECK_THROWS_AS(critical_B(-2.0), std::invalid_argument);

  // Strictly decreasing in C, always above 2.
  double prev = critical_B(1e-3);
  for (double c : {0.01, 0.1, 1.0, 10.0, 1e4}) {
    const double v = critical_B(c);
    CHECK(v < prev);
    CHECK(v > 2.0);
    prev = v;
  }
}

TEST_CASE("block classification partitions the index square") {
  BlockSpec spec(4, 0.5, 3.0, 1.0);  // k = 2, size 6
  CHECK(block_of(spec, 0, 0) == BlockLabel::TopLeft);
  CHECK(block_of(spec, 0, 2) == BlockLabel::TopRight);
  CHECK(block_of(spec, 5, 5) == BlockLabel::BottomRight);
  CHECK(block_of(spec, 3, 1) == BlockLabel::BottomLeft);
  CHECK_THROWS_AS(block_of(spec, 6, 0), std::out_of_range);
  CHECK_THROWS_AS(block_of(spec, 0, -1), std::out_of_range);

  // Counts per block are k^2, kn, nk, n^2.
  const std::int64_t k = spec.k(), n = spec.n;
  std::int64_t cnt[4] = {0, 0, 0, 0};
  for (std::int64_t i = 0; i < spec.size(); ++i)
    for (std::int64_t j = 0; j < spec.size(); ++j)
      ++cnt[static_cast<int>(block_of(spec, i, j))];
  CHECK(cnt[static_cast<int>(BlockLabel::TopLeft)] == k * k);
  CHECK(cnt[static_cast<int>(BlockLabel::TopRight)] == k * n);
  CHECK(cnt[static_cast<int>(BlockLabel::BottomLeft)] == n * k);
  CHECK(cnt[static_cast<int>(BlockLabel::BottomRight)] == n * n);
}

TEST_CASE("floor_index is stable on mathematically integral powers") {
  CHECK(BlockSpec(4, 0.5, 3.0, 1.0).k() == 2);
  CHECK(BlockSpec(100, 0.5, 1.0, 1.0).k() == 10);
  CHECK(BlockSpec(1000000, 0.5, 1.0, 1.0).k() == 1000);
  CHECK(BlockSpec(10, 0.3, 1.0, 1.0).k() == 1);  // 10^0.3 = 1.995
  CHECK(BlockSpec(3, 0.0, 2.0, 1.0).k() == 1);
  CHECK(BlockSpec(7, 1.0, 2.0, 1.0).k() == 7);
}
