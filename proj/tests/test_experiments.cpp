#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "margin_phase/experiments.hpp"

using namespace margin_phase;
using Catch::Approx;

namespace {

SamplerConfig exact_cfg(std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.method = SampleMethod::Exact;
  cfg.seed = seed;
  return cfg;
}

SamplerConfig mcmc_cfg(std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.method = SampleMethod::Mcmc;
  cfg.seed = seed;
  return cfg;
}

// Exact mean of a per-table statistic under the uniform law, by full
// enumeration.  The oracle the samplers are held against at tiny sizes.
double enum_mean(const Margins& m, const std::function<double(const IMat&)>& f) {
  double sum = 0.0;
  std::int64_t count = 0;
  enumerate_tables(m, [&](const IMat& t) {
    sum += f(t);
    ++count;
  });
  return sum / static_cast<double>(count);
}

}  // namespace

TEST_CASE("entry law experiment: exact sampler on a tiny block instance") {
  BlockSpec spec(2, 0.5, 2.0, 1.0);  // margins (4,2,2)
  TrialPlan plan(spec, 20000, exact_cfg(2718), 2);
  auto r = entry_law_experiment(plan);

  CHECK(r.mass.margins_exact);
  // Mass balance: mean of (k/n) X11 + X_tr equals floor(BCn)/n = 2 exactly
  // in expectation; allow 4 standard errors of Monte Carlo noise.
  CHECK(std::abs(r.mass.mean - r.mass.reference) <= 4.0 * r.mass.se);

  // Designated-entry means land on the enumeration-exact uniform means.
  const Margins m = block_margins(spec);
  const auto k = static_cast<std::size_t>(spec.k());
  const double e_tl = enum_mean(m, [&](const IMat& t) { return double(t(0, 0)); });
  const double e_br = enum_mean(m, [&](const IMat& t) { return double(t(k, k)); });
  const auto& tl = r.classes[0];
  const auto& br = r.classes[2];
  CHECK(std::abs(tl.mean - e_tl) <= 4.0 * tl.se);
  CHECK(std::abs(br.mean - e_br) <= 4.0 * br.se);
  // At n = 2 the typical entry is a biased but recognizable stand-in.
  CHECK(std::abs(e_tl - r.z.z11) < 0.5);

  // Reference consistency with the closed forms.
  CHECK(r.classes[1].limit_ref == Approx(spec.B * spec.C).margin(1e-12));
  CHECK(r.classes[2].limit_ref == Approx(spec.C).margin(1e-12));
  CHECK(tl.limit_ref == Approx(subcritical_limit_z11(spec.B, spec.C)).margin(1e-12));
  CHECK(r.classes[0].eta == Approx(spec.delta - 0.5).margin(1e-15));
  CHECK(r.classes[1].eta == Approx(spec.delta / 2.0).margin(1e-15));
  CHECK(r.classes[2].eta == Approx(0.5).margin(1e-15));
}

TEST_CASE("entry law experiment is reproducible bit for bit") {
  BlockSpec spec(2, 0.5, 2.0, 1.0);
  TrialPlan plan(spec, 4000, exact_cfg(99), 4);
  auto a = entry_law_experiment(plan);
  auto b = entry_law_experiment(plan);
  CHECK(a.to_json().dump() == b.to_json().dump());
  std::ostringstream ca, cb;
  a.write_csv(ca, true);
  b.write_csv(cb, true);
  CHECK(ca.str() == cb.str());

  // Thread count must not change the result, only wall time.
  TrialPlan serial(spec, 4000, exact_cfg(99), 1);
  CHECK(entry_law_experiment(serial).to_json().dump() == a.to_json().dump());
}

TEST_CASE("mcmc entry mean tracks the typical table at n=20") {
  BlockSpec spec(20, 0.5, 2.0, 1.0);
  TrialPlan plan(spec, 10000, mcmc_cfg(31337), 0);
  auto r = entry_law_experiment(plan);
  const auto& br = r.classes[2];
  CHECK(std::abs(br.mean - r.z.znn) <= 3.0 * br.se + 0.02);
  CHECK(r.mass.margins_exact);
  CHECK(std::abs(r.mass.mean - r.mass.reference) <= 3.0 * r.mass.se);
  // Triangle consistency: TV to Geom(C) can exceed TV to Geom(znn) by at
  // most the geometric-mean bound.
  CHECK(br.tv_geom_limit <=
        br.tv_geom_z + tv_geom_bound(r.z.znn, spec.C) + 1e-12);
}

TEST_CASE("phase sweep rows carry predictions and provenance") {
  SamplerConfig cfg = exact_cfg(512);
  auto sweep = phase_sweep(1.0, 0.5, 2, {1.0, 2.4, 3.0}, 3000, cfg, 2);
  // B = 2.4 sits inside the default near-critical window and is skipped.
  REQUIRE(sweep.rows.size() == 2);
  REQUIRE(sweep.skipped_B.size() == 1);
  CHECK(sweep.skipped_B[0] == 2.4);
  auto with_window = phase_sweep(1.0, 0.5, 2, {2.4}, 500, cfg, 2, true);
  CHECK(with_window.rows.size() == 1);

  for (const auto& row : sweep.rows) {
    CHECK(row.margins_exact);
    CHECK(row.trials == 3000);
    CHECK(row.sampler == "exact");
    const Margins m = block_margins(BlockSpec(2, 0.5, row.B, 1.0));
    const double e_tl = enum_mean(m, [&](const IMat& t) { return double(t(0, 0)); });
    CHECK(std::abs(row.mean_x11 - e_tl) <= 4.0 * row.stderr_x11);
    const auto bt = solve_typical_block(BlockSpec(2, 0.5, row.B, 1.0));
    CHECK(row.z11 == Approx(bt.z11).margin(1e-12));
    CHECK(row.scaled_z11 ==
          Approx(std::pow(2.0, -0.5) * bt.z11).margin(1e-12));
  }

  std::ostringstream os;
  sweep.write_csv(os);
  const std::string csv = os.str();
  CHECK(csv.find("B,n,delta,C,mean_x11") == 0);
  CHECK(csv.find("exact") != std::string::npos);
}

TEST_CASE("slln row averages match the enumeration-exact means") {
  std::vector<BlockSpec> specs{BlockSpec(2, 0.5, 2.0, 1.0)};
  auto rows = slln_experiment(specs, 20000, exact_cfg(8080), 2);
  REQUIRE(rows.size() == 1);
  const auto& r = rows[0];
  CHECK(r.margins_exact);
  CHECK(r.br_row_ref == 1.0);
  CHECK_FALSE(r.first_row_in_hypothesis);  // delta = 0.5 not in (1/2, 1)

  const Margins m = block_margins(specs[0]);
  const auto k = static_cast<std::size_t>(specs[0].k());
  const auto n = static_cast<std::size_t>(specs[0].n);
  auto row_avg = [&](std::size_t i) {
    return [&, i](const IMat& t) {
      double s = 0.0;
      for (std::size_t j = k; j < k + n; ++j) s += static_cast<double>(t(i, j));
      return s / static_cast<double>(n);
    };
  };
  CHECK(std::abs(r.first_row_mean - enum_mean(m, row_avg(0))) <= 5.0 * r.first_row_se);
  CHECK(std::abs(r.br_row_mean - enum_mean(m, row_avg(k))) <= 5.0 * r.br_row_se);

  std::ostringstream os;
  SllnRow::csv_header(os);
  r.write_csv(os);
  CHECK(os.str().find("first_row_avg") != std::string::npos);
  CHECK(os.str().find("br_row_avg") != std::string::npos);
}

TEST_CASE("clt diagnostic standardizes and never passes judgement") {
  BlockSpec spec(6, 0.75, 4.0, 1.0);
  auto d = clt_diagnostic(spec, 2000, mcmc_cfg(2020), 2);
  CHECK(d.diagnostic);
  CHECK(d.trials == 2000);
  const double BcC = critical_B(1.0);
  CHECK(d.center == Approx(BcC * 6.0).margin(1e-12));
  CHECK(d.scale == Approx(std::sqrt(6.0 * (BcC + BcC * BcC))).margin(1e-12));
  CHECK(std::isfinite(d.skewness));
  CHECK(std::isfinite(d.excess_kurtosis));
  CHECK_FALSE(d.histogram.empty());
  CHECK_THROWS_AS(clt_diagnostic(BlockSpec(6, 0.75, critical_B(1.0), 1.0), 100,
                                 exact_cfg(1), 1),
                  std::invalid_argument);
  // Variance plug-in value quoted for C = 1.
  CHECK(BcC + BcC * BcC == Approx(8.2426).margin(1e-4));
}

TEST_CASE("independence: self-pair is dependent, synthetic pair is not") {
  BlockSpec spec(4, 0.5, 2.0, 1.0);
  const std::int64_t k = spec.k();
  auto self = independence_check(spec, {k, k, k, k}, 20000, exact_cfg(606), 2);
  CHECK(self.statistic > 0.05);  // sup_a |P(a) - P(a)^2| is far from zero

  auto off = independence_check(spec, {k, k, k + 1, k + 1}, 20000, exact_cfg(606), 2);
  CHECK(off.eta == Approx(0.5).margin(1e-15));
  CHECK(off.statistic < self.statistic);
  // The synthetic null is pure Monte Carlo noise at scale ~ 1/sqrt(T).
  CHECK(off.null_statistic < 0.02);
}

TEST_CASE("truncated moment report obeys the excess identity") {
  BlockSpec spec(3, 0.5, 3.0, 1.0);
  auto rep = truncated_moment_experiment(spec, 0.9, 20000, exact_cfg(11), 2);
  CHECK(rep.threshold == Approx(std::pow(3.0, 0.9)).margin(1e-12));
  for (const auto& c : rep.classes) {
    CHECK(c.identity_gap <= 1e-12);
    CHECK(c.truncated <= c.mean + 1e-12);
    CHECK(c.excess >= -1e-12);
  }
  const auto bt = solve_typical_block(spec);
  CHECK(rep.classes[0].z_ref == Approx(bt.z11).margin(1e-12));
}
