#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "margin_phase/core.hpp"
#include "margin_phase/distributions.hpp"
#include "margin_phase/sampling.hpp"
#include "margin_phase/typical.hpp"
#include "margin_phase/version.hpp"

namespace margin_phase {

// Monte Carlo plan for one block instance.
struct TrialPlan {
  BlockSpec spec;
  std::int64_t trials = 0;
  SamplerConfig sampler;
  int threads = 0;  // 0 = hardware concurrency

  TrialPlan(BlockSpec s, std::int64_t t, SamplerConfig cfg, int th = 0)
      : spec(std::move(s)), trials(t), sampler(std::move(cfg)), threads(th) {
    if (trials < 1) throw std::invalid_argument("TrialPlan: trials must be >= 1");
  }
};

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return SplitMix64::substream(seed, salt).next_u64();
}

namespace detail {

inline int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs `trials` draws split over cfg.streams fixed chunks, each with its own
// derived substream, and merges the per-chunk accumulators in chunk order.
// Results are a pure function of (margins, cfg, trials): worker count only
// affects wall time.  When `parts_out` is given it receives the per-chunk
// accumulators (for between-stream error estimates).
template <typename A>
A run_trials(const Margins& margins, const DMat* z_hint, const SamplerConfig& cfg,
             std::int64_t trials, int threads, const A& prototype,
             std::vector<A>* parts_out = nullptr) {
  cfg.validate();
  const std::int64_t chunks = std::min<std::int64_t>(cfg.streams, trials);
  DMat z_local;
  const DMat* z = z_hint;
  if (cfg.method == SampleMethod::Rejection && z == nullptr) {
    z_local = solve_typical(margins).z;
    z = &z_local;
  }

  std::vector<A> parts(static_cast<std::size_t>(chunks), prototype);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chunks));
  std::atomic<std::int64_t> next{0};
  auto work = [&]() {
    while (true) {
      const std::int64_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        const std::int64_t lo = trials * c / chunks;
        const std::int64_t hi = trials * (c + 1) / chunks;
        UniformSampler sampler(margins, cfg, static_cast<std::uint64_t>(c), z);
        for (std::int64_t t = lo; t < hi; ++t) parts[static_cast<std::size_t>(c)].absorb(sampler.next());
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
        return;
      }
    }
  };

  const int nworkers = std::min<std::int64_t>(resolve_threads(threads), chunks);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nworkers));
  for (int w = 0; w < nworkers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  A total = prototype;
  for (const A& p : parts) total.merge(p);
  if (parts_out) *parts_out = std::move(parts);
  return total;
}

// Between-stream (batch means) standard error of a per-trial mean.  For
// thinned MCMC streams the naive i.i.d. formula understates the error, so
// reported stderrs take the larger of the two.
template <typename A, typename F>
double batch_se(const std::vector<A>& parts, F&& moments_of) {
  std::vector<double> means;
  means.reserve(parts.size());
  for (const A& p : parts) {
    const auto& m = moments_of(p);
    if (m.count > 0) means.push_back(m.mean());
  }
  const auto K = static_cast<double>(means.size());
  if (means.size() < 2) return 0.0;
  double mu = 0.0;
  for (double v : means) mu += v;
  mu /= K;
  double s2 = 0.0;
  for (double v : means) s2 += (v - mu) * (v - mu);
  return std::sqrt(s2 / (K * (K - 1.0)));
}

// Exact integer running sums for a scalar per-trial statistic.
struct IntMoments {
  std::int64_t count = 0;
  std::int64_t sum = 0;
  __int128 sumsq = 0;

  void add(std::int64_t v) {
    ++count;
    sum += v;
    sumsq += static_cast<__int128>(v) * v;
  }
  void merge(const IntMoments& o) {
    count += o.count;
    sum += o.sum;
    sumsq += o.sumsq;
  }
  double mean() const { return static_cast<double>(sum) / static_cast<double>(count); }
  double variance() const {
    if (count < 2) return 0.0;
    const double mu = mean();
    return (static_cast<double>(sumsq) - mu * static_cast<double>(sum)) /
           static_cast<double>(count - 1);
  }
  double stderr_of_mean() const {
    return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
  }
};

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace detail

// Per-trial statistics shared by every block experiment: designated entries
// of the three distinct blocks, the SLLN row sums, and the mass-balance
// statistic k*X_tl + n*X_tr (an exact integer whose mean must equal the
// heavy margin).
struct BlockTrialStats {
  std::int64_t k = 0, n = 0;
  const Margins* margins = nullptr;

  EmpiricalDist tl, tr, br;
  detail::IntMoments m_tl, m_tr, m_br;
  detail::IntMoments mass_num;        // k*x(0,0) + n*x(0,k)
  detail::IntMoments first_row_sum;   // sum over light columns of row 0
  detail::IntMoments br_row_sum;      // sum over light columns of row k
  std::vector<std::int64_t> tr_row_series;  // per-trial first-row light sums, in order
  std::vector<std::int64_t> tl_series;      // per-trial x(0,0)
  bool keep_series = false;
  bool margins_exact = true;

  explicit BlockTrialStats(const BlockSpec& spec, const Margins& m, bool series = false)
      : k(spec.k()), n(spec.n), margins(&m), keep_series(series) {}

  void absorb(const ContingencyTable& t) {
    if (!matches_margins(t, *margins)) margins_exact = false;
    const auto ku = static_cast<std::size_t>(k);
    const std::int64_t x_tl = t(0, 0);
    const std::int64_t x_tr = t(0, ku);
    const std::int64_t x_br = t(ku, ku);
    tl.add(x_tl);
    tr.add(x_tr);
    br.add(x_br);
    m_tl.add(x_tl);
    m_tr.add(x_tr);
    m_br.add(x_br);
    mass_num.add(k * x_tl + n * x_tr);
    std::int64_t s0 = 0, sk = 0;
    for (std::size_t j = ku; j < ku + static_cast<std::size_t>(n); ++j) {
      s0 += t(0, j);
      sk += t(ku, j);
    }
    first_row_sum.add(s0);
    br_row_sum.add(sk);
    if (keep_series) {
      tr_row_series.push_back(s0);
      tl_series.push_back(x_tl);
    }
  }

  void merge(const BlockTrialStats& o) {
    tl.merge(o.tl);
    tr.merge(o.tr);
    br.merge(o.br);
    m_tl.merge(o.m_tl);
    m_tr.merge(o.m_tr);
    m_br.merge(o.m_br);
    mass_num.merge(o.mass_num);
    first_row_sum.merge(o.first_row_sum);
    br_row_sum.merge(o.br_row_sum);
    tr_row_series.insert(tr_row_series.end(), o.tr_row_series.begin(), o.tr_row_series.end());
    tl_series.insert(tl_series.end(), o.tl_series.begin(), o.tl_series.end());
    margins_exact = margins_exact && o.margins_exact;
  }
};

struct MassBalance {
  double mean = 0.0;       // mean of (k/n) X_tl + X_tr over trials
  double se = 0.0;
  double reference = 0.0;  // floor(BCn)/n, the exact expectation
  bool margins_exact = true;
};

inline MassBalance mass_balance_of(const BlockTrialStats& s,
                                   const std::vector<BlockTrialStats>& parts,
                                   const BlockSpec& spec) {
  MassBalance mb;
  const double inv_n = 1.0 / static_cast<double>(spec.n);
  mb.mean = s.mass_num.mean() * inv_n;
  mb.se = std::max(s.mass_num.stderr_of_mean(),
                   detail::batch_se(parts, [](const BlockTrialStats& p) -> const auto& {
                     return p.mass_num;
                   })) *
          inv_n;
  mb.reference = static_cast<double>(spec.heavy_sum()) * inv_n;
  mb.margins_exact = s.margins_exact;
  return mb;
}

// Robust stderr of one designated-entry mean: the larger of the i.i.d.
// estimate and the between-stream batch estimate.
inline double entry_se(const detail::IntMoments& merged,
                       const std::vector<BlockTrialStats>& parts,
                       detail::IntMoments BlockTrialStats::*field) {
  return std::max(merged.stderr_of_mean(),
                  detail::batch_se(parts, [field](const BlockTrialStats& p) -> const auto& {
                    return p.*field;
                  }));
}

// One entry class of an entry-law experiment.
struct EntryClassReport {
  std::string cls;
  EmpiricalDist dist;
  double mean = 0.0, se = 0.0;
  double z_ref = 0.0;        // finite-n typical entry
  double tv_geom_z = 0.0;    // TV(empirical, Geom(z_ref))
  double limit_ref = 0.0;    // regime-dependent asymptotic mean (NaN at B = B_c)
  double tv_geom_limit = 0.0;
  double eta = 0.0;          // paper rate exponent for this class
};

struct EntryLawResult {
  BlockSpec spec;
  std::int64_t trials = 0;
  SamplerConfig cfg;
  BlockTypical z;
  std::array<EntryClassReport, 3> classes;  // tl, tr, br
  MassBalance mass;

  nlohmann::json to_json() const {
    nlohmann::json cls = nlohmann::json::array();
    for (const auto& c : classes) {
      cls.push_back({{"class", c.cls},
                     {"mean", c.mean},
                     {"stderr", c.se},
                     {"z_ref", c.z_ref},
                     {"tv_geom_z", c.tv_geom_z},
                     {"limit_ref", c.limit_ref},
                     {"tv_geom_limit", c.tv_geom_limit},
                     {"eta", c.eta},
                     {"hist", c.dist.to_json()}});
    }
    return nlohmann::json{{"schema", kSchema},
                          {"kind", "entry_law"},
                          {"spec", spec.to_json()},
                          {"trials", trials},
                          {"sampler", cfg.to_json()},
                          {"version", kVersion},
                          {"classes", cls},
                          {"mass_balance",
                           {{"mean", mass.mean},
                            {"stderr", mass.se},
                            {"reference", mass.reference},
                            {"margins_exact", mass.margins_exact}}}};
  }

  static void csv_header(std::ostream& os) {
    os << "B,n,delta,C,class,mean,stderr,z_ref,tv_geom_z,limit_ref,tv_geom_limit,eta,"
          "trials,seed,sampler,version\n";
  }
  void write_csv(std::ostream& os, bool header = false) const {
    using detail::fmt_g;
    if (header) csv_header(os);
    for (const auto& c : classes) {
      os << fmt_g(spec.B) << ',' << spec.n << ',' << fmt_g(spec.delta) << ','
         << fmt_g(spec.C) << ',' << c.cls << ',' << fmt_g(c.mean) << ',' << fmt_g(c.se)
         << ',' << fmt_g(c.z_ref) << ',' << fmt_g(c.tv_geom_z) << ',' << fmt_g(c.limit_ref)
         << ',' << fmt_g(c.tv_geom_limit) << ',' << fmt_g(c.eta) << ',' << trials << ','
         << cfg.seed << ',' << to_string(cfg.method) << ',' << kVersion << '\n';
    }
  }
};

// Empirical law of the three designated entries (one per trial each), with
// TV distances to Geom at the finite-n typical value and at the asymptotic
// reference mean.
inline EntryLawResult entry_law_experiment(const TrialPlan& plan) {
  const BlockSpec& spec = plan.spec;
  const Margins margins = block_margins(spec);
  EntryLawResult out{spec, plan.trials, plan.sampler, solve_typical_block(spec), {}, {}};

  DMat z_full;
  const DMat* z_hint = nullptr;
  if (plan.sampler.method == SampleMethod::Rejection) {
    z_full = solve_typical(margins).z;
    z_hint = &z_full;
  }
  std::vector<BlockTrialStats> parts;
  BlockTrialStats stats = detail::run_trials(margins, z_hint, plan.sampler, plan.trials,
                                             plan.threads, BlockTrialStats(spec, margins),
                                             &parts);

  const double Bc = spec.critical();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const bool sub = spec.B < Bc, super = spec.B > Bc;
  const double tr_limit = (spec.B == Bc) ? nan : (sub ? spec.B * spec.C : Bc * spec.C);
  double tl_limit = nan;
  if (sub) tl_limit = subcritical_limit_z11(spec.B, spec.C);
  if (super)
    tl_limit = supercritical_scaled_z11(spec.B, spec.C) *
               std::pow(static_cast<double>(spec.n), 1.0 - spec.delta);

  auto make = [&](const char* name, const EmpiricalDist& d, const detail::IntMoments& m,
                  detail::IntMoments BlockTrialStats::*field, double z_ref,
                  double limit_ref, double eta) {
    EntryClassReport r;
    r.cls = name;
    r.dist = d;
    r.mean = m.mean();
    r.se = entry_se(m, parts, field);
    r.z_ref = z_ref;
    r.tv_geom_z = empirical_tv_to_geom(d, z_ref);
    r.limit_ref = limit_ref;
    r.tv_geom_limit = std::isnan(limit_ref) ? nan : empirical_tv_to_geom(d, limit_ref);
    r.eta = eta;
    return r;
  };
  out.classes[0] = make("top_left", stats.tl, stats.m_tl, &BlockTrialStats::m_tl,
                        out.z.z11, tl_limit, spec.delta - 0.5);
  out.classes[1] = make("top_right", stats.tr, stats.m_tr, &BlockTrialStats::m_tr,
                        out.z.z1n1, tr_limit, spec.delta / 2.0);
  out.classes[2] = make("bottom_right", stats.br, stats.m_br, &BlockTrialStats::m_br,
                        out.z.znn, spec.C, 0.5);
  out.mass = mass_balance_of(stats, parts, spec);
  return out;
}

// One row of a phase sweep over B.
struct SweepRow {
  double B = 0.0;
  std::int64_t n = 0;
  double delta = 0.0, C = 0.0;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  std::string sampler;
  double mean_x11 = 0.0, stderr_x11 = 0.0;
  double scaled_mean = 0.0, scaled_stderr = 0.0;  // n^{delta-1} * mean
  double mean_x1n1 = 0.0, stderr_x1n1 = 0.0;
  double mean_xnn = 0.0, stderr_xnn = 0.0;
  double z11 = 0.0, scaled_z11 = 0.0, z1n1 = 0.0, znn = 0.0;
  double tv_tl = 0.0, tv_tr = 0.0, tv_br = 0.0;  // TV to Geom(z class)
  double mass_mean = 0.0, mass_se = 0.0, mass_ref = 0.0;
  bool margins_exact = true;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<double> skipped_B;  // inside the near-critical window

  static void csv_header(std::ostream& os) {
    os << "B,n,delta,C,mean_x11,stderr_x11,scaled_mean,scaled_stderr,mean_x1n1,"
          "stderr_x1n1,mean_xnn,stderr_xnn,z11,scaled_z11,z1n1,znn,tv_tl,tv_tr,tv_br,"
          "mass_mean,mass_stderr,mass_ref,margins_exact,trials,seed,sampler,version\n";
  }
  void write_csv(std::ostream& os, bool header = true) const {
    using detail::fmt_g;
    if (header) csv_header(os);
    for (const auto& r : rows) {
      os << fmt_g(r.B) << ',' << r.n << ',' << fmt_g(r.delta) << ',' << fmt_g(r.C) << ','
         << fmt_g(r.mean_x11) << ',' << fmt_g(r.stderr_x11) << ',' << fmt_g(r.scaled_mean)
         << ',' << fmt_g(r.scaled_stderr) << ',' << fmt_g(r.mean_x1n1) << ','
         << fmt_g(r.stderr_x1n1) << ',' << fmt_g(r.mean_xnn) << ',' << fmt_g(r.stderr_xnn)
         << ',' << fmt_g(r.z11) << ',' << fmt_g(r.scaled_z11) << ',' << fmt_g(r.z1n1)
         << ',' << fmt_g(r.znn) << ',' << fmt_g(r.tv_tl) << ',' << fmt_g(r.tv_tr) << ','
         << fmt_g(r.tv_br) << ',' << fmt_g(r.mass_mean) << ',' << fmt_g(r.mass_se) << ','
         << fmt_g(r.mass_ref) << ',' << (r.margins_exact ? 1 : 0) << ',' << r.trials << ','
         << r.seed << ',' << r.sampler << ',' << kVersion << '\n';
    }
  }
  nlohmann::json to_json() const {
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& r : rows) {
      jr.push_back({{"B", r.B},
                    {"n", r.n},
                    {"mean_x11", r.mean_x11},
                    {"stderr_x11", r.stderr_x11},
                    {"scaled_mean", r.scaled_mean},
                    {"scaled_stderr", r.scaled_stderr},
                    {"mean_x1n1", r.mean_x1n1},
                    {"mean_xnn", r.mean_xnn},
                    {"z11", r.z11},
                    {"scaled_z11", r.scaled_z11},
                    {"z1n1", r.z1n1},
                    {"znn", r.znn},
                    {"tv_tl", r.tv_tl},
                    {"tv_tr", r.tv_tr},
                    {"tv_br", r.tv_br},
                    {"mass_mean", r.mass_mean},
                    {"mass_stderr", r.mass_se},
                    {"mass_ref", r.mass_ref},
                    {"margins_exact", r.margins_exact},
                    {"trials", r.trials},
                    {"seed", r.seed}});
    }
    return nlohmann::json{{"schema", kSchema},  {"kind", "phase_sweep"},
                          {"rows", jr},         {"skipped_B", skipped_B},
                          {"version", kVersion}};
  }
};

// Monte Carlo sweep of E[X11] and friends over a grid of B values, with the
// finite-n typical predictions side by side.  Grid points inside the
// near-critical window |B - B_c| < window are skipped unless
// include_critical is set (behavior at criticality is out of scope).
inline SweepResult phase_sweep(double C, double delta, std::int64_t n,
                               const std::vector<double>& B_grid, std::int64_t trials,
                               const SamplerConfig& cfg, int threads = 0,
                               bool include_critical = false, double window = 0.1) {
  if (B_grid.empty()) throw std::invalid_argument("phase_sweep: empty B grid");
  SweepResult out;
  const double Bc = critical_B(C);
  std::uint64_t idx = 0;
  for (double B : B_grid) {
    ++idx;
    if (!include_critical && std::abs(B - Bc) < window) {
      out.skipped_B.push_back(B);
      continue;
    }
    BlockSpec spec(n, delta, B, C);
    const Margins margins = block_margins(spec);
    const BlockTypical z = solve_typical_block(spec);
    SamplerConfig row_cfg = cfg;
    row_cfg.seed = derive_seed(cfg.seed, idx);

    DMat z_full;
    const DMat* z_hint = nullptr;
    if (row_cfg.method == SampleMethod::Rejection) {
      z_full = solve_typical(margins).z;
      z_hint = &z_full;
    }
    std::vector<BlockTrialStats> parts;
    BlockTrialStats stats = detail::run_trials(margins, z_hint, row_cfg, trials, threads,
                                               BlockTrialStats(spec, margins), &parts);

    const double scale = std::pow(static_cast<double>(n), delta - 1.0);
    SweepRow r;
    r.B = B;
    r.n = n;
    r.delta = delta;
    r.C = C;
    r.trials = trials;
    r.seed = row_cfg.seed;
    r.sampler = to_string(cfg.method);
    r.mean_x11 = stats.m_tl.mean();
    r.stderr_x11 = entry_se(stats.m_tl, parts, &BlockTrialStats::m_tl);
    r.scaled_mean = scale * r.mean_x11;
    r.scaled_stderr = scale * r.stderr_x11;
    r.mean_x1n1 = stats.m_tr.mean();
    r.stderr_x1n1 = entry_se(stats.m_tr, parts, &BlockTrialStats::m_tr);
    r.mean_xnn = stats.m_br.mean();
    r.stderr_xnn = entry_se(stats.m_br, parts, &BlockTrialStats::m_br);
    r.z11 = z.z11;
    r.scaled_z11 = scale * z.z11;
    r.z1n1 = z.z1n1;
    r.znn = z.znn;
    r.tv_tl = empirical_tv_to_geom(stats.tl, z.z11);
    r.tv_tr = empirical_tv_to_geom(stats.tr, z.z1n1);
    r.tv_br = empirical_tv_to_geom(stats.br, z.znn);
    const MassBalance mb = mass_balance_of(stats, parts, spec);
    r.mass_mean = mb.mean;
    r.mass_se = mb.se;
    r.mass_ref = mb.reference;
    r.margins_exact = mb.margins_exact;
    out.rows.push_back(std::move(r));
  }
  return out;
}

// One spec of an SLLN experiment: block-row averages vs their limits.
struct SllnRow {
  BlockSpec spec;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  std::string sampler;
  double first_row_mean = 0.0, first_row_sd = 0.0, first_row_se = 0.0;
  double first_row_ref = 0.0;   // BC below B_c, B_c C above
  bool first_row_in_hypothesis = false;  // theorem assumes 1/2 < delta < 1
  double br_row_mean = 0.0, br_row_sd = 0.0, br_row_se = 0.0;
  double br_row_ref = 0.0;      // C
  double mass_mean = 0.0, mass_se = 0.0, mass_ref = 0.0;
  bool margins_exact = true;

  static void csv_header(std::ostream& os) {
    os << "B,n,delta,C,stat,mean,sd,stderr,reference,in_hypothesis,trials,seed,sampler,"
          "version\n";
  }
  void write_csv(std::ostream& os) const {
    using detail::fmt_g;
    os << fmt_g(spec.B) << ',' << spec.n << ',' << fmt_g(spec.delta) << ','
       << fmt_g(spec.C) << ",first_row_avg," << fmt_g(first_row_mean) << ','
       << fmt_g(first_row_sd) << ',' << fmt_g(first_row_se) << ',' << fmt_g(first_row_ref)
       << ',' << (first_row_in_hypothesis ? 1 : 0) << ',' << trials << ',' << seed << ','
       << sampler << ',' << kVersion << '\n';
    os << fmt_g(spec.B) << ',' << spec.n << ',' << fmt_g(spec.delta) << ','
       << fmt_g(spec.C) << ",br_row_avg," << fmt_g(br_row_mean) << ',' << fmt_g(br_row_sd)
       << ',' << fmt_g(br_row_se) << ',' << fmt_g(br_row_ref) << ",1," << trials << ','
       << seed << ',' << sampler << ',' << kVersion << '\n';
  }
};

// Strong-law experiment: for each spec, the distribution across trials of
// the two block-row averages (1/n) sum_j X_{0,j} and (1/n) sum_j X_{k,j}
// over the light columns, against their almost-sure limits.
inline std::vector<SllnRow> slln_experiment(const std::vector<BlockSpec>& specs,
                                            std::int64_t trials, const SamplerConfig& cfg,
                                            int threads = 0) {
  std::vector<SllnRow> out;
  std::uint64_t idx = 0;
  for (const BlockSpec& spec : specs) {
    ++idx;
    const Margins margins = block_margins(spec);
    SamplerConfig row_cfg = cfg;
    row_cfg.seed = derive_seed(cfg.seed, 0x517f00 + idx);

    DMat z_full;
    const DMat* z_hint = nullptr;
    if (row_cfg.method == SampleMethod::Rejection) {
      z_full = solve_typical(margins).z;
      z_hint = &z_full;
    }
    std::vector<BlockTrialStats> parts;
    BlockTrialStats stats = detail::run_trials(margins, z_hint, row_cfg, trials, threads,
                                               BlockTrialStats(spec, margins), &parts);

    const double inv_n = 1.0 / static_cast<double>(spec.n);
    const double Bc = spec.critical();
    SllnRow r{spec};
    r.trials = trials;
    r.seed = row_cfg.seed;
    r.sampler = to_string(cfg.method);
    r.first_row_mean = stats.first_row_sum.mean() * inv_n;
    r.first_row_sd = std::sqrt(stats.first_row_sum.variance()) * inv_n;
    r.first_row_se =
        entry_se(stats.first_row_sum, parts, &BlockTrialStats::first_row_sum) * inv_n;
    r.first_row_ref = (spec.B < Bc) ? spec.B * spec.C : Bc * spec.C;
    r.first_row_in_hypothesis = spec.delta > 0.5 && spec.delta < 1.0;
    r.br_row_mean = stats.br_row_sum.mean() * inv_n;
    r.br_row_sd = std::sqrt(stats.br_row_sum.variance()) * inv_n;
    r.br_row_se = entry_se(stats.br_row_sum, parts, &BlockTrialStats::br_row_sum) * inv_n;
    r.br_row_ref = spec.C;
    const MassBalance mb = mass_balance_of(stats, parts, spec);
    r.mass_mean = mb.mean;
    r.mass_se = mb.se;
    r.mass_ref = mb.reference;
    r.margins_exact = mb.margins_exact;
    out.push_back(std::move(r));
  }
  return out;
}

// CLT diagnostic (conjectural; no pass/fail).  Standardizes the top-right
// first-row sum S by its conjectured center and scale, and for delta < 1/2
// also the corner entry X11.
struct CltDiagnostic {
  BlockSpec spec;
  std::int64_t trials = 0;
  bool diagnostic = true;  // conjecture-backed output, never an acceptance gate
  double center = 0.0, scale = 0.0;
  double skewness = 0.0, excess_kurtosis = 0.0;
  std::map<std::int64_t, std::int64_t> histogram;  // bins of width 0.25 in std units
  std::optional<double> x11_skewness, x11_excess_kurtosis;

  nlohmann::json to_json() const {
    nlohmann::json h = nlohmann::json::object();
    for (const auto& [b, c] : histogram) h[detail::fmt_g(0.25 * static_cast<double>(b))] = c;
    nlohmann::json j{{"schema", kSchema},
                     {"kind", "clt_diagnostic"},
                     {"diagnostic", true},
                     {"spec", spec.to_json()},
                     {"trials", trials},
                     {"center", center},
                     {"scale", scale},
                     {"skewness", skewness},
                     {"excess_kurtosis", excess_kurtosis},
                     {"histogram", h},
                     {"version", kVersion}};
    if (x11_skewness) j["x11_skewness"] = *x11_skewness;
    if (x11_excess_kurtosis) j["x11_excess_kurtosis"] = *x11_excess_kurtosis;
    return j;
  }
};

namespace detail {

inline void moments_of(const std::vector<double>& xs, double* skew, double* exkurt) {
  const double n = static_cast<double>(xs.size());
  double mu = 0.0;
  for (double x : xs) mu += x;
  mu /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - mu;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  *skew = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
  *exkurt = m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0;
}

}  // namespace detail

inline CltDiagnostic clt_diagnostic(const BlockSpec& spec, std::int64_t trials,
                                    const SamplerConfig& cfg, int threads = 0) {
  const double Bc = spec.critical();
  if (spec.B == Bc)
    throw std::invalid_argument("clt_diagnostic: B = B_c is out of scope");
  const Margins margins = block_margins(spec);
  DMat z_full;
  const DMat* z_hint = nullptr;
  if (cfg.method == SampleMethod::Rejection) {
    z_full = solve_typical(margins).z;
    z_hint = &z_full;
  }
  BlockTrialStats stats = detail::run_trials(margins, z_hint, cfg, trials, threads,
                                             BlockTrialStats(spec, margins, true));

  CltDiagnostic out{spec};
  out.trials = trials;
  const double BcC = Bc * spec.C;
  const double sigma0 = std::sqrt(BcC + BcC * BcC);
  const double R = (spec.B < Bc) ? spec.B * spec.C : BcC;
  out.center = R * static_cast<double>(spec.n);
  out.scale = std::sqrt(static_cast<double>(spec.n)) * sigma0;

  std::vector<double> std_s;
  std_s.reserve(stats.tr_row_series.size());
  for (std::int64_t s : stats.tr_row_series) {
    const double v = (static_cast<double>(s) - out.center) / out.scale;
    std_s.push_back(v);
    ++out.histogram[static_cast<std::int64_t>(std::floor(v / 0.25))];
  }
  detail::moments_of(std_s, &out.skewness, &out.excess_kurtosis);

  if (spec.delta < 0.5 && spec.B > Bc) {
    const double c11 = supercritical_scaled_z11(spec.B, spec.C) *
                       std::pow(static_cast<double>(spec.n), 1.0 - spec.delta);
    const double s11 = std::pow(static_cast<double>(spec.n), (1.0 - spec.delta) / 2.0) * sigma0;
    std::vector<double> std_x;
    std_x.reserve(stats.tl_series.size());
    for (std::int64_t x : stats.tl_series)
      std_x.push_back((static_cast<double>(x) - c11) / s11);
    double sk = 0.0, ek = 0.0;
    detail::moments_of(std_x, &sk, &ek);
    out.x11_skewness = sk;
    out.x11_excess_kurtosis = ek;
  }
  return out;
}

// Joint sup-discrepancy between two entries, with a matched synthetic
// independent-geometric null run for calibration.
struct IndependenceResult {
  BlockSpec spec;
  std::array<std::int64_t, 4> pair{};  // i1, j1, i2, j2 (0-based)
  std::int64_t trials = 0;
  double statistic = 0.0;       // sup_{a,b} |P(a,b) - P(a)P(b)|
  double se = 0.0;              // binomial stderr at the argmax cell
  double eta = 0.0;             // paper rate exponent for the block pair
  double null_statistic = 0.0;  // same statistic on synthetic independent draws

  nlohmann::json to_json() const {
    return nlohmann::json{{"schema", kSchema},
                          {"kind", "independence"},
                          {"spec", spec.to_json()},
                          {"pair", pair},
                          {"trials", trials},
                          {"statistic", statistic},
                          {"stderr", se},
                          {"eta", eta},
                          {"null_statistic", null_statistic},
                          {"version", kVersion}};
  }
};

namespace detail {

struct JointAccum {
  std::int64_t i1 = 0, j1 = 0, i2 = 0, j2 = 0;
  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> joint;
  EmpiricalDist d1, d2;
  std::int64_t trials = 0;

  void add_pair(std::int64_t a, std::int64_t b) {
    ++joint[{a, b}];
    d1.add(a);
    d2.add(b);
    ++trials;
  }
  void absorb(const ContingencyTable& t) {
    add_pair(t(static_cast<std::size_t>(i1), static_cast<std::size_t>(j1)),
             t(static_cast<std::size_t>(i2), static_cast<std::size_t>(j2)));
  }
  void merge(const JointAccum& o) {
    for (const auto& [k, c] : o.joint) joint[k] += c;
    d1.merge(o.d1);
    d2.merge(o.d2);
    trials += o.trials;
  }

  // sup over observed support boxes of |P(a,b) - P(a) P(b)|.
  std::pair<double, double> sup_discrepancy() const {
    const double T = static_cast<double>(trials);
    double best = 0.0, best_p = 0.0;
    for (std::int64_t a = 0; a <= d1.max_value(); ++a)
      for (std::int64_t b = 0; b <= d2.max_value(); ++b) {
        auto it = joint.find({a, b});
        const double pab = it == joint.end() ? 0.0 : static_cast<double>(it->second) / T;
        const double d = std::abs(pab - d1.prob(a) * d2.prob(b));
        if (d > best) {
          best = d;
          best_p = pab;
        }
      }
    const double se = std::sqrt(std::max(best_p * (1.0 - best_p), 1.0 / T) / T);
    return {best, se};
  }
};

}  // namespace detail

inline IndependenceResult independence_check(const BlockSpec& spec,
                                             const std::array<std::int64_t, 4>& pair,
                                             std::int64_t trials, const SamplerConfig& cfg,
                                             int threads = 0) {
  const auto [i1, j1, i2, j2] = pair;
  const BlockLabel b1 = block_of(spec, i1, j1);
  const BlockLabel b2 = block_of(spec, i2, j2);
  const Margins margins = block_margins(spec);

  detail::JointAccum proto;
  proto.i1 = i1;
  proto.j1 = j1;
  proto.i2 = i2;
  proto.j2 = j2;
  DMat z_full;
  const DMat* z_hint = nullptr;
  if (cfg.method == SampleMethod::Rejection) {
    z_full = solve_typical(margins).z;
    z_hint = &z_full;
  }
  detail::JointAccum acc =
      detail::run_trials(margins, z_hint, cfg, trials, threads, proto);

  IndependenceResult out{spec, pair};
  out.trials = trials;
  auto [stat, se] = acc.sup_discrepancy();
  out.statistic = stat;
  out.se = se;
  const bool br_only = b1 == BlockLabel::BottomRight && b2 == BlockLabel::BottomRight;
  const bool any_tl = b1 == BlockLabel::TopLeft || b2 == BlockLabel::TopLeft;
  out.eta = br_only ? 0.5 : (any_tl ? spec.delta - 0.5 : spec.delta / 2.0);

  // Synthetic null: independent geometric pair at the entries' typical
  // means, same trial count, derived stream.
  const BlockTypical z = solve_typical_block(spec);
  auto z_of = [&](BlockLabel b) {
    switch (b) {
      case BlockLabel::TopLeft: return z.z11;
      case BlockLabel::BottomRight: return z.znn;
      default: return z.z1n1;
    }
  };
  SplitMix64 rng = SplitMix64::substream(cfg.seed, 0x9ULL);
  const GeomDist g1(z_of(b1)), g2(z_of(b2));
  detail::JointAccum null_acc;
  for (std::int64_t t = 0; t < trials; ++t)
    null_acc.add_pair(g1.sample(rng), g2.sample(rng));
  out.null_statistic = null_acc.sup_discrepancy().first;
  return out;
}

// Truncated / excess moments of the designated entries at threshold n^alpha.
struct TruncatedMomentReport {
  BlockSpec spec;
  double alpha = 0.0, threshold = 0.0;
  std::int64_t trials = 0;
  struct ClassRow {
    std::string cls;
    double mean = 0.0, truncated = 0.0, excess = 0.0;
    double z_ref = 0.0;       // finite-n typical entry
    double limit_ref = 0.0;   // regime reference for the truncated mean (NaN if none)
    double identity_gap = 0.0;  // |mean - truncated - excess|
  };
  std::array<ClassRow, 3> classes;

  nlohmann::json to_json() const {
    nlohmann::json cls = nlohmann::json::array();
    for (const auto& c : classes)
      cls.push_back({{"class", c.cls},
                     {"mean", c.mean},
                     {"truncated_mean", c.truncated},
                     {"excess_mean", c.excess},
                     {"z_ref", c.z_ref},
                     {"limit_ref", c.limit_ref},
                     {"identity_gap", c.identity_gap}});
    return nlohmann::json{{"schema", kSchema},   {"kind", "truncated_moments"},
                          {"spec", spec.to_json()}, {"alpha", alpha},
                          {"threshold", threshold}, {"trials", trials},
                          {"classes", cls},         {"version", kVersion}};
  }
};

inline TruncatedMomentReport truncated_moment_experiment(const BlockSpec& spec,
                                                         double alpha, std::int64_t trials,
                                                         const SamplerConfig& cfg,
                                                         int threads = 0) {
  if (!(alpha > 0)) throw std::invalid_argument("truncated_moment_experiment: alpha > 0");
  const Margins margins = block_margins(spec);
  DMat z_full;
  const DMat* z_hint = nullptr;
  if (cfg.method == SampleMethod::Rejection) {
    z_full = solve_typical(margins).z;
    z_hint = &z_full;
  }
  BlockTrialStats stats = detail::run_trials(margins, z_hint, cfg, trials, threads,
                                             BlockTrialStats(spec, margins));
  const BlockTypical z = solve_typical_block(spec);
  const double M = std::pow(static_cast<double>(spec.n), alpha);
  const double Bc = spec.critical();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  TruncatedMomentReport out{spec};
  out.alpha = alpha;
  out.threshold = M;
  out.trials = trials;
  auto fill = [&](const char* name, const EmpiricalDist& d, double z_ref,
                  double limit_ref) {
    TruncatedMomentReport::ClassRow r;
    r.cls = name;
    r.mean = d.mean();
    r.truncated = d.truncated_mean(M);
    r.excess = d.excess_mean(M);
    r.z_ref = z_ref;
    r.limit_ref = limit_ref;
    r.identity_gap = std::abs(r.mean - r.truncated - r.excess);
    return r;
  };
  const double tr_limit = (spec.B == Bc) ? nan
                          : (spec.B < Bc ? spec.B * spec.C : Bc * spec.C);
  out.classes[0] = fill("top_left", stats.tl, z.z11, nan);
  out.classes[1] = fill("top_right", stats.tr, z.z1n1, tr_limit);
  out.classes[2] = fill("bottom_right", stats.br, z.znn, spec.C);
  return out;
}

}  // namespace margin_phase
