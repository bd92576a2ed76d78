// margin-phase: typical tables, exact counting, uniform sampling and phase
// transition experiments for block-margin contingency tables.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "margin_phase/acceptance.hpp"
#include "margin_phase/margin_phase.hpp"

namespace mp = margin_phase;
using nlohmann::json;

namespace {

struct MarginsArgs {
  std::string margins_file;
  std::int64_t n = 0;
  double delta = -1.0, B = 0.0, C = 0.0;

  void attach(CLI::App* cmd, bool block_only = false) {
    if (!block_only)
      cmd->add_option("--margins-file", margins_file,
                      "JSON file with {\"rows\":[...],\"cols\":[...]}");
    cmd->add_option("--n", n, "block parameter n");
    cmd->add_option("--delta", delta, "block parameter delta in [0,1]");
    cmd->add_option("--B", B, "block parameter B > 0");
    cmd->add_option("--C", C, "block parameter C > 0");
  }

  bool has_block() const { return n > 0; }
  mp::BlockSpec block() const { return mp::BlockSpec(n, delta, B, C); }

  mp::Margins resolve() const {
    if (!margins_file.empty()) {
      std::ifstream in(margins_file);
      if (!in) throw std::invalid_argument("cannot open margins file: " + margins_file);
      json j;
      in >> j;
      return mp::Margins::from_json(j);
    }
    if (has_block()) return mp::block_margins(block());
    throw std::invalid_argument("need either --margins-file or --n/--delta/--B/--C");
  }
};

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw std::invalid_argument("cannot open output file: " + path);
  return file;
}

void emit(const json& j, const std::string& out_path) {
  std::ofstream file;
  open_out(out_path, file) << j.dump(2) << '\n';
}

json table_to_json(const mp::ContingencyTable& t) {
  json rows = json::array();
  for (std::size_t i = 0; i < t.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < t.cols(); ++j) row.push_back(t(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json matrix_to_json(const mp::DMat& z) {
  json rows = json::array();
  for (std::size_t i = 0; i < z.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < z.cols(); ++j) row.push_back(z(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

const char* kSweepGnuplotHint =
    "# gnuplot recipe: scaled corner mean vs B\n"
    "# set datafile separator ','\n"
    "# plot 'sweep.csv' using 1:7 with linespoints title 'n^{d-1} E[X11]', \\\n"
    "#      '' using 1:14 with lines title 'n^{d-1} z11'\n";

const char* kEntrylawGnuplotHint =
    "# gnuplot recipe: histogram of one entry class\n"
    "# set datafile separator ','\n"
    "# plot 'entrylaw_hist.csv' using 1:3 with boxes title 'empirical pmf'\n";

int run(int argc, char** argv) {
  CLI::App app{"margin-phase: typical tables, counting, uniform sampling and "
               "phase-transition experiments for contingency tables"};
  app.require_subcommand(1);

  // ---- typical ----
  auto* cmd_typical = app.add_subcommand("typical", "solve for the typical table");
  MarginsArgs typical_args;
  typical_args.attach(cmd_typical);
  double typical_tol = 1e-10;
  std::int64_t typical_max_iter = 10000;
  bool typical_full = false;
  std::string typical_out;
  cmd_typical->add_option("--tol", typical_tol, "margin residual tolerance");
  cmd_typical->add_option("--max-iter", typical_max_iter, "max dual-ascent sweeps");
  cmd_typical->add_flag("--full", typical_full,
                        "run the general solver even for block margins");
  cmd_typical->add_option("--out", typical_out, "output path (default stdout)");

  // ---- count ----
  auto* cmd_count = app.add_subcommand("count", "exact count and Barvinok bounds");
  MarginsArgs count_args;
  count_args.attach(cmd_count);
  std::int64_t count_budget = 0;
  std::string count_out;
  cmd_count->add_option("--budget", count_budget,
                        "counting work budget (default 1e7 or MARGIN_PHASE_BUDGET)");
  cmd_count->add_option("--out", count_out, "output path (default stdout)");

  // ---- sample ----
  auto* cmd_sample = app.add_subcommand("sample", "draw uniform contingency tables");
  MarginsArgs sample_args;
  sample_args.attach(cmd_sample);
  std::string sample_method = "mcmc", sample_out, sample_format = "json";
  std::int64_t sample_count = 1, sample_burnin = 0, sample_thin = 0;
  std::int64_t sample_max_tries = 10'000'000;
  std::uint64_t sample_seed = 0;
  cmd_sample->add_option("--method", sample_method, "exact|rejection|mcmc")
      ->check(CLI::IsMember({"exact", "rejection", "mcmc"}));
  cmd_sample->add_option("--count", sample_count, "number of tables");
  cmd_sample->add_option("--seed", sample_seed, "RNG seed")->required();
  cmd_sample->add_option("--burnin", sample_burnin, "MCMC burn-in steps (0 = auto)");
  cmd_sample->add_option("--thin", sample_thin, "MCMC thinning steps (0 = auto)");
  cmd_sample->add_option("--max-tries", sample_max_tries, "rejection try cap");
  cmd_sample->add_option("--out", sample_out, "output path (default stdout)");
  cmd_sample->add_option("--format", sample_format, "json|csv")
      ->check(CLI::IsMember({"json", "csv"}));

  // ---- entrylaw ----
  auto* cmd_entrylaw =
      app.add_subcommand("entrylaw", "empirical entry laws vs geometric references");
  MarginsArgs entrylaw_args;
  entrylaw_args.attach(cmd_entrylaw, true);
  std::int64_t el_trials = 10000;
  std::uint64_t el_seed = 0;
  std::string el_method = "mcmc", el_out, el_format = "json";
  int el_threads = 0;
  std::int64_t el_burnin = 0, el_thin = 0, el_streams = 8;
  bool el_hint = false;
  cmd_entrylaw->add_option("--trials", el_trials, "Monte Carlo trials");
  cmd_entrylaw->add_option("--seed", el_seed, "RNG seed")->required();
  cmd_entrylaw->add_option("--method", el_method, "exact|rejection|mcmc")
      ->check(CLI::IsMember({"exact", "rejection", "mcmc"}));
  cmd_entrylaw->add_option("--threads", el_threads, "worker cap (0 = hardware)");
  cmd_entrylaw->add_option("--burnin", el_burnin, "MCMC burn-in steps (0 = auto)");
  cmd_entrylaw->add_option("--thin", el_thin, "MCMC thinning steps (0 = auto)");
  cmd_entrylaw->add_option("--streams", el_streams, "fixed trial substreams");
  cmd_entrylaw->add_option("--out", el_out, "output path (default stdout)");
  cmd_entrylaw->add_option("--format", el_format, "json|csv")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd_entrylaw->add_flag("--gnuplot-hint", el_hint, "print a plotting recipe");

  // ---- sweep ----
  auto* cmd_sweep = app.add_subcommand("sweep", "phase sweep of E[X11] over B");
  double sw_C = 1.0, sw_delta = 0.5, sw_window = 0.1;
  std::int64_t sw_n = 0, sw_trials = 2000;
  std::vector<double> sw_B;
  std::uint64_t sw_seed = 0;
  std::string sw_method = "mcmc", sw_out, sw_format = "csv";
  int sw_threads = 0;
  bool sw_critical = false, sw_hint = false;
  cmd_sweep->add_option("--C", sw_C, "block parameter C");
  cmd_sweep->add_option("--delta", sw_delta, "block parameter delta");
  cmd_sweep->add_option("--n", sw_n, "block parameter n")->required();
  cmd_sweep->add_option("--B", sw_B, "grid of B values")->required()->expected(-1);
  cmd_sweep->add_option("--trials", sw_trials, "trials per grid point");
  cmd_sweep->add_option("--seed", sw_seed, "RNG seed")->required();
  cmd_sweep->add_option("--method", sw_method, "exact|rejection|mcmc")
      ->check(CLI::IsMember({"exact", "rejection", "mcmc"}));
  cmd_sweep->add_option("--threads", sw_threads, "worker cap (0 = hardware)");
  cmd_sweep->add_flag("--include-critical-window", sw_critical,
                      "also run grid points with |B - B_c| < window");
  cmd_sweep->add_option("--window", sw_window, "near-critical exclusion half-width");
  cmd_sweep->add_option("--out", sw_out, "output path (default stdout)");
  cmd_sweep->add_option("--format", sw_format, "json|csv")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd_sweep->add_flag("--gnuplot-hint", sw_hint, "print a plotting recipe");

  // ---- slln ----
  auto* cmd_slln = app.add_subcommand("slln", "block row-sum averages vs limits");
  std::vector<std::int64_t> sl_n;
  double sl_delta = 0.75, sl_B = 2.0, sl_C = 1.0;
  std::int64_t sl_trials = 50;
  std::uint64_t sl_seed = 0;
  std::string sl_method = "mcmc", sl_out;
  int sl_threads = 0;
  cmd_slln->add_option("--n", sl_n, "grid of n values")->required()->expected(-1);
  cmd_slln->add_option("--delta", sl_delta, "block parameter delta");
  cmd_slln->add_option("--B", sl_B, "block parameter B");
  cmd_slln->add_option("--C", sl_C, "block parameter C");
  cmd_slln->add_option("--trials", sl_trials, "trials per n");
  cmd_slln->add_option("--seed", sl_seed, "RNG seed")->required();
  cmd_slln->add_option("--method", sl_method, "exact|rejection|mcmc")
      ->check(CLI::IsMember({"exact", "rejection", "mcmc"}));
  cmd_slln->add_option("--threads", sl_threads, "worker cap (0 = hardware)");
  cmd_slln->add_option("--out", sl_out, "output path (default stdout)");

  // ---- clt ----
  auto* cmd_clt = app.add_subcommand(
      "clt", "CLT diagnostic for the top-right row sum (conjectural; no pass/fail)");
  MarginsArgs clt_args;
  clt_args.attach(cmd_clt, true);
  std::int64_t clt_trials = 2000;
  std::uint64_t clt_seed = 0;
  std::string clt_method = "mcmc", clt_out;
  int clt_threads = 0;
  cmd_clt->add_option("--trials", clt_trials, "Monte Carlo trials");
  cmd_clt->add_option("--seed", clt_seed, "RNG seed")->required();
  cmd_clt->add_option("--method", clt_method, "exact|rejection|mcmc")
      ->check(CLI::IsMember({"exact", "rejection", "mcmc"}));
  cmd_clt->add_option("--threads", clt_threads, "worker cap (0 = hardware)");
  cmd_clt->add_option("--out", clt_out, "output path (default stdout)");

  // ---- indep ----
  auto* cmd_indep = app.add_subcommand("indep", "pairwise independence diagnostics");
  MarginsArgs in_args;
  in_args.attach(cmd_indep, true);
  std::vector<std::int64_t> in_e1, in_e2;
  std::int64_t in_trials = 50000;
  std::uint64_t in_seed = 0;
  std::string in_method = "mcmc", in_out;
  int in_threads = 0;
  cmd_indep->add_option("--e1", in_e1, "first entry as 0-based i j")
      ->required()
      ->expected(2);
  cmd_indep->add_option("--e2", in_e2, "second entry as 0-based i j")
      ->required()
      ->expected(2);
  cmd_indep->add_option("--trials", in_trials, "Monte Carlo trials");
  cmd_indep->add_option("--seed", in_seed, "RNG seed")->required();
  cmd_indep->add_option("--method", in_method, "exact|rejection|mcmc")
      ->check(CLI::IsMember({"exact", "rejection", "mcmc"}));
  cmd_indep->add_option("--threads", in_threads, "worker cap (0 = hardware)");
  cmd_indep->add_option("--out", in_out, "output path (default stdout)");

  // ---- accept ----
  auto* cmd_accept = app.add_subcommand("accept", "run the acceptance battery");
  std::uint64_t acc_seed = 20250811;
  int acc_threads = 0;
  std::string acc_out;
  cmd_accept->add_option("--seed", acc_seed, "master seed for the battery");
  cmd_accept->add_option("--threads", acc_threads, "worker cap (0 = hardware)");
  cmd_accept->add_option("--out", acc_out, "directory for CSV/JSON artifacts");

  app.set_version_flag("--version", std::string(mp::kVersion));
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  auto sampler_cfg = [](const std::string& method, std::uint64_t seed, std::int64_t burnin,
                        std::int64_t thin, std::int64_t streams) {
    mp::SamplerConfig cfg;
    cfg.method = mp::sample_method_from_string(method);
    cfg.seed = seed;
    cfg.mcmc_burnin = burnin;
    cfg.mcmc_thin = thin;
    if (streams > 0) cfg.streams = static_cast<int>(streams);
    return cfg;
  };

  if (cmd_typical->parsed()) {
    if (typical_args.has_block() && !typical_full) {
      auto bt = mp::solve_typical_block(typical_args.block(), typical_tol);
      emit(json{{"schema", mp::kSchema},
                {"kind", "typical_block"},
                {"spec", typical_args.block().to_json()},
                {"k", bt.k},
                {"P", bt.P},
                {"Q", bt.Q},
                {"z11", bt.z11},
                {"z1n1", bt.z1n1},
                {"znn", bt.znn},
                {"residual", bt.residual}},
           typical_out);
    } else {
      auto t = mp::solve_typical(typical_args.resolve(), typical_tol, typical_max_iter);
      emit(json{{"schema", mp::kSchema},
                {"kind", "typical"},
                {"z", matrix_to_json(t.z)},
                {"lambda", t.lambda},
                {"mu", t.mu},
                {"residual", t.residual},
                {"sweeps", t.sweeps}},
           typical_out);
    }
    return 0;
  }

  if (cmd_count->parsed()) {
    const mp::Margins m = count_args.resolve();
    auto r = mp::barvinok_log_bounds(
        m, 1e-10, count_budget > 0 ? count_budget : mp::default_counting_budget());
    json j = r.to_json();
    j["schema"] = mp::kSchema;
    j["kind"] = "count";
    emit(j, count_out);
    return 0;
  }

  if (cmd_sample->parsed()) {
    const mp::Margins m = sample_args.resolve();
    mp::SamplerConfig cfg =
        sampler_cfg(sample_method, sample_seed, sample_burnin, sample_thin, 0);
    cfg.rejection_max_tries = sample_max_tries;
    mp::UniformSampler sampler(m, cfg, 0);
    std::ofstream file;
    std::ostream& os = open_out(sample_out, file);
    if (sample_format == "csv") {
      os << "table";
      for (std::size_t i = 0; i < m.m(); ++i)
        for (std::size_t j = 0; j < m.n(); ++j) os << ",x" << i << "_" << j;
      os << '\n';
      for (std::int64_t t = 0; t < sample_count; ++t) {
        auto tab = sampler.next();
        os << t;
        for (auto v : tab.data()) os << ',' << v;
        os << '\n';
      }
    } else {
      for (std::int64_t t = 0; t < sample_count; ++t) {
        auto tab = sampler.next();
        os << json{{"schema", mp::kSchema},
                   {"kind", "table"},
                   {"table", t},
                   {"entries", table_to_json(tab)}}
                  .dump()
           << '\n';
      }
    }
    return 0;
  }

  if (cmd_entrylaw->parsed()) {
    if (el_hint) std::cout << kEntrylawGnuplotHint;
    mp::TrialPlan plan(entrylaw_args.block(), el_trials,
                       sampler_cfg(el_method, el_seed, el_burnin, el_thin, el_streams),
                       el_threads);
    auto r = mp::entry_law_experiment(plan);
    if (el_format == "csv") {
      std::ofstream file;
      r.write_csv(open_out(el_out, file), true);
    } else {
      emit(r.to_json(), el_out);
    }
    return 0;
  }

  if (cmd_sweep->parsed()) {
    if (sw_hint) std::cout << kSweepGnuplotHint;
    auto r = mp::phase_sweep(sw_C, sw_delta, sw_n, sw_B, sw_trials,
                             sampler_cfg(sw_method, sw_seed, 0, 0, 0), sw_threads,
                             sw_critical, sw_window);
    for (double b : r.skipped_B)
      std::cerr << "note: B=" << b
                << " inside the near-critical window; rerun with "
                   "--include-critical-window to force\n";
    if (sw_format == "json") {
      emit(r.to_json(), sw_out);
    } else {
      std::ofstream file;
      r.write_csv(open_out(sw_out, file));
    }
    return 0;
  }

  if (cmd_slln->parsed()) {
    std::vector<mp::BlockSpec> specs;
    specs.reserve(sl_n.size());
    for (auto n : sl_n) specs.emplace_back(n, sl_delta, sl_B, sl_C);
    auto rows = mp::slln_experiment(specs, sl_trials,
                                    sampler_cfg(sl_method, sl_seed, 0, 0, 0), sl_threads);
    std::ofstream file;
    std::ostream& os = open_out(sl_out, file);
    mp::SllnRow::csv_header(os);
    for (const auto& r : rows) r.write_csv(os);
    return 0;
  }

  if (cmd_clt->parsed()) {
    auto r = mp::clt_diagnostic(clt_args.block(), clt_trials,
                                sampler_cfg(clt_method, clt_seed, 0, 0, 0), clt_threads);
    emit(r.to_json(), clt_out);
    return 0;
  }

  if (cmd_indep->parsed()) {
    auto r = mp::independence_check(in_args.block(),
                                    {in_e1.at(0), in_e1.at(1), in_e2.at(0), in_e2.at(1)},
                                    in_trials, sampler_cfg(in_method, in_seed, 0, 0, 0),
                                    in_threads);
    emit(r.to_json(), in_out);
    return 0;
  }

  if (cmd_accept->parsed()) {
    mp::acceptance::Options opts;
    opts.seed = acc_seed;
    opts.threads = acc_threads;
    opts.out_dir = acc_out;
    auto results = mp::acceptance::run_all(opts, std::cout);
    int failures = 0;
    for (const auto& r : results) failures += r.pass ? 0 : 1;
    std::cout << (failures == 0 ? "ALL PASS" : "FAILURES: " + std::to_string(failures))
              << " (" << results.size() << " criteria)\n";
    return failures == 0 ? 0 : 1;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mp::ConvergenceError& e) {
    std::cerr << json{{"schema", mp::kSchema},
                      {"error", "convergence_error"},
                      {"message", e.what()},
                      {"residual", e.residual()}}
                     .dump()
              << '\n';
    return 1;
  } catch (const mp::BudgetExceededError& e) {
    std::cerr << json{{"schema", mp::kSchema},
                      {"error", "budget_exceeded"},
                      {"message", e.what()}}
                     .dump()
              << '\n';
    return 1;
  } catch (const mp::ExhaustedError& e) {
    std::cerr << json{{"schema", mp::kSchema},
                      {"error", "rejection_exhausted"},
                      {"message", e.what()},
                      {"tries", e.tries()}}
                     .dump()
              << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << json{{"schema", mp::kSchema},
                      {"error", "invalid_argument"},
                      {"message", e.what()}}
                     .dump()
              << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"schema", mp::kSchema},
                      {"error", "internal_error"},
                      {"message", e.what()}}
                     .dump()
              << '\n';
    return 1;
  }
}
