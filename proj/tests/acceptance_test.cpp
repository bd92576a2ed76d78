// Acceptance battery: every criterion must pass for the suite to go green.
// The same battery backs the `accept` CLI subcommand; here each criterion
// is surfaced as its own assertion so failures name the exact check.

#include <catch2/catch_amalgamated.hpp>

#include <iostream>

#include "margin_phase/acceptance.hpp"

TEST_CASE("acceptance criteria") {
  margin_phase::acceptance::Options opts;
  opts.seed = 20250811;
  opts.threads = 0;
  opts.out_dir = "acceptance_out";

  const auto results = margin_phase::acceptance::run_all(opts, std::cout);
  REQUIRE(results.size() == 14);
  for (const auto& r : results) {
    INFO("criterion " << r.id << " (" << r.name << "): " << r.details);
    CHECK(r.pass);
  }
}
