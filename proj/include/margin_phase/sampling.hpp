#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "margin_phase/core.hpp"
#include "margin_phase/counting.hpp"
#include "margin_phase/distributions.hpp"
#include "margin_phase/errors.hpp"
#include "margin_phase/matrix.hpp"
#include "margin_phase/rng.hpp"
#include "margin_phase/typical.hpp"

namespace margin_phase {

// A contingency table is a non-negative integer matrix; bound to a Margins
// it must reproduce the row and column sums exactly.
using ContingencyTable = IMat;

inline bool matches_margins(const ContingencyTable& t, const Margins& margins) {
  if (t.rows() != margins.m() || t.cols() != margins.n()) return false;
  for (auto v : t.data())
    if (v < 0) return false;
  return t.row_sums() == margins.rows() && t.col_sums() == margins.cols();
}

enum class SampleMethod { Exact, Rejection, Mcmc };

inline const char* to_string(SampleMethod m) {
  switch (m) {
    case SampleMethod::Exact: return "exact";
    case SampleMethod::Rejection: return "rejection";
    case SampleMethod::Mcmc: return "mcmc";
  }
  return "?";
}

inline SampleMethod sample_method_from_string(const std::string& s) {
  if (s == "exact") return SampleMethod::Exact;
  if (s == "rejection") return SampleMethod::Rejection;
  if (s == "mcmc") return SampleMethod::Mcmc;
  throw std::invalid_argument("unknown sample method: " + s);
}

// Sampler configuration.  mcmc_burnin/mcmc_thin of 0 mean "derive from the
// instance": burn-in 10*m*n*max(margin), thinning m*n.  `streams` is the
// fixed number of independent substreams experiments split their trials
// over; it is part of the result's identity (not a performance knob), so
// outputs do not depend on the worker-thread count.
struct SamplerConfig {
  SampleMethod method = SampleMethod::Mcmc;
  std::uint64_t seed = 0;
  std::int64_t mcmc_burnin = 0;
  std::int64_t mcmc_thin = 0;
  std::int64_t rejection_max_tries = 10'000'000;
  int streams = 8;

  void validate() const {
    if (mcmc_burnin < 0 || mcmc_thin < 0)
      throw std::invalid_argument("SamplerConfig: burnin/thin must be >= 0");
    if (rejection_max_tries < 1)
      throw std::invalid_argument("SamplerConfig: rejection_max_tries must be >= 1");
    if (streams < 1) throw std::invalid_argument("SamplerConfig: streams must be >= 1");
  }

  std::int64_t burnin_for(const Margins& m) const {
    if (mcmc_burnin > 0) return mcmc_burnin;
    std::int64_t mx = 1;
    for (auto v : m.rows()) mx = std::max(mx, v);
    for (auto v : m.cols()) mx = std::max(mx, v);
    return 10 * static_cast<std::int64_t>(m.m() * m.n()) * mx;
  }
  std::int64_t thin_for(const Margins& m) const {
    if (mcmc_thin > 0) return mcmc_thin;
    return static_cast<std::int64_t>(m.m() * m.n());
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"method", to_string(method)},
                          {"seed", seed},
                          {"mcmc_burnin", mcmc_burnin},
                          {"mcmc_thin", mcmc_thin},
                          {"rejection_max_tries", rejection_max_tries},
                          {"streams", streams}};
  }
};

// Matrix of independent Geom(z_ij) entries.
inline ContingencyTable sample_geom_matrix(const DMat& z, SplitMix64& rng) {
  ContingencyTable t(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) t(i, j) = GeomDist(z(i, j)).sample(rng);
  return t;
}

struct RejectionDraw {
  std::optional<ContingencyTable> table;  // empty = exhausted
  std::int64_t tries = 0;
};

// Rejection sampler: draw independent Geom(z_ij) matrices until one has the
// required margins; the accepted table is exactly uniform on M(r, c).  A try
// is abandoned as soon as a partial row or column sum rules it out, which
// does not change the accepted law (such a try is rejected under every
// completion).  z should be the typical table of the margins, which
// maximizes the acceptance probability.
inline RejectionDraw sample_uniform_rejection(const Margins& margins, const DMat& z,
                                              const SamplerConfig& cfg, SplitMix64& rng) {
  if (z.rows() != margins.m() || z.cols() != margins.n())
    throw std::invalid_argument("sample_uniform_rejection: z shape mismatch");
  const std::size_t m = margins.m(), n = margins.n();
  // Precomputed 1/ln(z/(1+z)) per entry; one log per draw in the hot loop.
  std::vector<double> inv_log_ratio(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!(z(i, j) > 0))
        throw std::invalid_argument("sample_uniform_rejection: z entries must be > 0");
      inv_log_ratio[i * n + j] = 1.0 / std::log(z(i, j) / (1.0 + z(i, j)));
    }

  ContingencyTable t(m, n);
  std::vector<std::int64_t> colsum(n);
  RejectionDraw out;
  for (std::int64_t attempt = 1; attempt <= cfg.rejection_max_tries; ++attempt) {
    out.tries = attempt;
    std::fill(colsum.begin(), colsum.end(), 0);
    bool ok = true;
    for (std::size_t i = 0; i < m && ok; ++i) {
      std::int64_t rowsum = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const auto v = static_cast<std::int64_t>(
            std::log(rng.next_unit()) * inv_log_ratio[i * n + j]);
        t(i, j) = v;
        rowsum += v;
        colsum[j] += v;
        if (rowsum > margins.rows()[i] || colsum[j] > margins.cols()[j]) {
          ok = false;
          break;
        }
      }
      if (ok && rowsum != margins.rows()[i]) ok = false;
    }
    if (ok && colsum == margins.cols()) {
      out.table = t;
      return out;
    }
  }
  return out;  // exhausted
}

// Exactly uniform sequential sampler: columns are filled one at a time, each
// entry vector drawn with probability proportional to the number of ways of
// completing the remaining columns (from the counting DP).
class ExactSampler {
 public:
  explicit ExactSampler(const Margins& margins,
                        std::int64_t budget = default_counting_budget())
      : dp_(margins, budget) {
    dp_.total();  // forces the full DP; throws if over budget
  }

  ContingencyTable sample(SplitMix64& rng) {
    const Margins& mg = dp_.margins();
    const std::size_t m = mg.m(), n = mg.n();
    ContingencyTable t(m, n);
    std::vector<std::int32_t> res(m);
    for (std::size_t i = 0; i < m; ++i) res[i] = static_cast<std::int32_t>(mg.rows()[i]);

    for (std::size_t pos = 0; pos < n; ++pos) {
      const std::size_t col = dp_.order()[pos];
      const std::int64_t c = mg.cols()[col];
      std::vector<std::int32_t> sorted(res);
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      const BigInt& total = dp_.completions(pos, sorted);
      if (total == 0) throw std::logic_error("ExactSampler: infeasible state");
      BigInt target = uniform_below(total, rng);

      // Walk the compositions of c in a fixed order, subtracting weights.
      std::vector<std::int64_t> suffix(m + 1, 0);
      for (std::size_t i = m; i-- > 0;) suffix[i] = suffix[i + 1] + res[i];
      std::vector<std::int32_t> child(res);
      bool placed = false;
      std::function<bool(std::size_t, std::int64_t)> walk = [&](std::size_t i,
                                                                std::int64_t rem) {
        if (i == m) {
          std::vector<std::int32_t> key(child);
          std::sort(key.begin(), key.end(), std::greater<>());
          const BigInt& w = dp_.completions(pos + 1, key);
          if (target < w) return true;
          target -= w;
          return false;
        }
        const std::int64_t hi = std::min<std::int64_t>(res[i], rem);
        const std::int64_t lo = std::max<std::int64_t>(0, rem - suffix[i + 1]);
        for (std::int64_t v = lo; v <= hi; ++v) {
          child[i] = static_cast<std::int32_t>(res[i] - v);
          t(i, col) = v;
          if (walk(i + 1, rem - v)) return true;
        }
        child[i] = res[i];
        return false;
      };
      placed = walk(0, c);
      if (!placed) throw std::logic_error("ExactSampler: weight walk exhausted");
      for (std::size_t i = 0; i < m; ++i)
        res[i] -= static_cast<std::int32_t>(t(i, col));
    }
    return t;
  }

 private:
  static BigInt uniform_below(const BigInt& bound, SplitMix64& rng) {
    if (bound <= 1) return 0;
    const unsigned bits = static_cast<unsigned>(boost::multiprecision::msb(bound)) + 1;
    while (true) {
      BigInt x = 0;
      for (unsigned got = 0; got < bits; got += 64) {
        x <<= 64;
        x |= BigInt(rng.next_u64());
      }
      x >>= (64 - bits % 64) % 64;
      if (x < bound) return x;
    }
  }

  CountingDp dp_;
};

inline ContingencyTable sample_uniform_exact(const Margins& margins, SplitMix64& rng,
                                             std::int64_t budget = default_counting_budget()) {
  ExactSampler s(margins, budget);
  return s.sample(rng);
}

// Greedy north-west corner fill; always lands in M(r, c).
inline ContingencyTable northwest_fill(const Margins& margins) {
  ContingencyTable t(margins.m(), margins.n(), 0);
  std::vector<std::int64_t> rres(margins.rows()), cres(margins.cols());
  for (std::size_t i = 0; i < margins.m(); ++i)
    for (std::size_t j = 0; j < margins.n(); ++j) {
      const std::int64_t v = std::min(rres[i], cres[j]);
      t(i, j) = v;
      rres[i] -= v;
      cres[j] -= v;
    }
  return t;
}

// One proposed 2x2 checkerboard move: rows i < i', columns j < j', sign s;
// applied only if all four entries stay non-negative, otherwise the chain
// holds (which keeps it aperiodic).  Margins are preserved exactly either
// way.  Returns whether the move was applied.
inline bool mcmc_swap_step_inplace(ContingencyTable& t, SplitMix64& rng) {
  const std::size_t m = t.rows(), n = t.cols();
  if (m < 2 || n < 2) return false;
  std::size_t i = rng.below(m);
  std::size_t i2 = rng.below(m - 1);
  if (i2 >= i) ++i2;
  std::size_t j = rng.below(n);
  std::size_t j2 = rng.below(n - 1);
  if (j2 >= j) ++j2;
  const std::int64_t s = rng.next_bool() ? 1 : -1;
  // +s at (i,j) and (i2,j2), -s at (i,j2) and (i2,j).
  if (t(i, j) + s < 0 || t(i2, j2) + s < 0 || t(i, j2) - s < 0 || t(i2, j) - s < 0)
    return false;
  t(i, j) += s;
  t(i2, j2) += s;
  t(i, j2) -= s;
  t(i2, j) -= s;
  return true;
}

inline ContingencyTable mcmc_swap_step(const ContingencyTable& t, SplitMix64& rng) {
  ContingencyTable out(t);
  mcmc_swap_step_inplace(out, rng);
  return out;
}

// Swap-move chain over M(r, c), started from the north-west fill.  The
// proposal is symmetric and rejected moves count as steps, so the stationary
// distribution is uniform.
class McmcChain {
 public:
  McmcChain(const Margins& margins, SplitMix64 rng)
      : state_(northwest_fill(margins)), rng_(std::move(rng)) {}

  void run(std::int64_t steps) {
    for (std::int64_t s = 0; s < steps; ++s) mcmc_swap_step_inplace(state_, rng_);
  }
  const ContingencyTable& state() const { return state_; }

 private:
  ContingencyTable state_;
  SplitMix64 rng_;
};

// Uniform sampler facade: one object per (margins, config, stream) with a
// common next() regardless of method.  Identical inputs give identical
// sample streams.
class UniformSampler {
 public:
  UniformSampler(const Margins& margins, const SamplerConfig& cfg, std::uint64_t stream,
                 const DMat* typical_z = nullptr)
      : margins_(margins), cfg_(cfg), rng_(SplitMix64::substream(cfg.seed, stream)) {
    cfg_.validate();
    switch (cfg_.method) {
      case SampleMethod::Exact:
        exact_ = std::make_unique<ExactSampler>(margins_);
        break;
      case SampleMethod::Rejection:
        z_ = typical_z ? *typical_z : solve_typical(margins_).z;
        break;
      case SampleMethod::Mcmc:
        chain_ = std::make_unique<McmcChain>(margins_, rng_);
        chain_->run(cfg_.burnin_for(margins_));
        thin_ = cfg_.thin_for(margins_);
        break;
    }
  }

  ContingencyTable next() {
    switch (cfg_.method) {
      case SampleMethod::Exact:
        return exact_->sample(rng_);
      case SampleMethod::Rejection: {
        RejectionDraw d = sample_uniform_rejection(margins_, z_, cfg_, rng_);
        tries_ += d.tries;
        if (!d.table)
          throw ExhaustedError("rejection sampler exhausted max tries", d.tries);
        ++accepted_;
        return *d.table;
      }
      case SampleMethod::Mcmc:
        chain_->run(thin_);
        return chain_->state();
    }
    throw std::logic_error("UniformSampler: bad method");
  }

  // Rejection bookkeeping (zero for other methods).
  std::int64_t tries() const { return tries_; }
  std::int64_t accepted() const { return accepted_; }

 private:
  Margins margins_;
  SamplerConfig cfg_;
  SplitMix64 rng_;
  std::unique_ptr<ExactSampler> exact_;
  std::unique_ptr<McmcChain> chain_;
  DMat z_;
  std::int64_t thin_ = 0;
  std::int64_t tries_ = 0;
  std::int64_t accepted_ = 0;
};

}  // namespace margin_phase
