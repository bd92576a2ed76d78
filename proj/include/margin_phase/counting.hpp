#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "margin_phase/core.hpp"
#include "margin_phase/errors.hpp"
#include "margin_phase/matrix.hpp"
#include "margin_phase/typical.hpp"

namespace margin_phase {

using BigInt = boost::multiprecision::cpp_int;

// Work budget for exact counting: memo entries plus expansion steps.  The
// MARGIN_PHASE_BUDGET environment variable overrides the default.
inline std::int64_t default_counting_budget() {
  if (const char* env = std::getenv("MARGIN_PHASE_BUDGET")) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::int64_t>(v);
  }
  return 10'000'000;
}

namespace detail {

struct ResidualHash {
  std::size_t operator()(const std::vector<std::int32_t>& v) const {
    std::size_t h = 0xcbf29ce484222325ull;
    for (std::int32_t x : v) {
      h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(x));
      h *= 0x100000001b3ull;
    }
    return h;
  }
};

}  // namespace detail

// Column-by-column counting DP over residual row sums.
//
// Columns are processed in descending-sum order; the memo key is the sorted
// residual vector, which is valid because permuting rows permutes the
// completions of the remaining columns bijectively.  Also drives the exact
// sequential sampler, which needs completion counts per prefix.
class CountingDp {
 public:
  explicit CountingDp(const Margins& margins,
                      std::int64_t budget = default_counting_budget())
      : margins_(margins), budget_(budget), memo_(margins.n() + 1) {
    order_.resize(margins.n());
    for (std::size_t j = 0; j < margins.n(); ++j) order_[j] = j;
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return margins.cols()[a] > margins.cols()[b];
    });
    sorted_cols_.reserve(margins.n());
    for (std::size_t j : order_) sorted_cols_.push_back(margins.cols()[j]);
    suffix_col_sum_.assign(margins.n() + 1, 0);
    for (std::size_t t = margins.n(); t-- > 0;)
      suffix_col_sum_[t] = suffix_col_sum_[t + 1] + sorted_cols_[t];
  }

  const Margins& margins() const { return margins_; }
  // Column order used internally: order()[t] is the original index of the
  // t-th processed column.
  const std::vector<std::size_t>& order() const { return order_; }
  std::int64_t work_used() const { return work_; }

  // |M(r, c)|.
  const BigInt& total() {
    std::vector<std::int32_t> res(margins_.m());
    for (std::size_t i = 0; i < margins_.m(); ++i)
      res[i] = static_cast<std::int32_t>(margins_.rows()[i]);
    std::sort(res.begin(), res.end(), std::greater<>());
    return completions(0, res);
  }

  // Number of ways to fill processed columns t..n-1 given the sorted
  // residual row vector `res` (descending).
  const BigInt& completions(std::size_t t, const std::vector<std::int32_t>& res) {
    auto [it, inserted] = memo_[t].try_emplace(res);
    if (!inserted) return it->second;
    charge();
    if (t == margins_.n()) {
      it->second = std::all_of(res.begin(), res.end(), [](auto r) { return r == 0; }) ? 1 : 0;
      return it->second;
    }
    const std::int64_t c = sorted_cols_[t];
    BigInt acc = 0;
    std::vector<std::int32_t> child(res);
    std::vector<std::int64_t> suffix(res.size() + 1, 0);
    for (std::size_t i = res.size(); i-- > 0;) suffix[i] = suffix[i + 1] + res[i];
    // Computing this entry only ever inserts at deeper levels, so `it`
    // stays valid across the recursion.
    distribute(t, 0, c, res, suffix, child, acc);
    it->second = std::move(acc);
    return it->second;
  }

 private:
  void charge() {
    if (++work_ > budget_)
      throw BudgetExceededError(
          "counting budget exceeded (" + std::to_string(budget_) +
          " work units); instance too large for exact counting");
  }

  // Enumerates all ways to take `rem` units from rows i.. within caps,
  // recursing into the memo for each completed column.
  void distribute(std::size_t t, std::size_t i, std::int64_t rem,
                  const std::vector<std::int32_t>& res,
                  const std::vector<std::int64_t>& suffix,
                  std::vector<std::int32_t>& child, BigInt& acc) {
    charge();
    if (i == res.size()) {
      std::vector<std::int32_t> key(child);
      std::sort(key.begin(), key.end(), std::greater<>());
      acc += completions(t + 1, key);
      return;
    }
    const std::int64_t hi = std::min<std::int64_t>(res[i], rem);
    const std::int64_t lo = std::max<std::int64_t>(0, rem - suffix[i + 1]);
    for (std::int64_t v = lo; v <= hi; ++v) {
      child[i] = static_cast<std::int32_t>(res[i] - v);
      distribute(t, i + 1, rem - v, res, suffix, child, acc);
    }
    child[i] = res[i];
  }

  Margins margins_;
  std::int64_t budget_;
  std::int64_t work_ = 0;
  std::vector<std::size_t> order_;
  std::vector<std::int64_t> sorted_cols_;
  std::vector<std::int64_t> suffix_col_sum_;
  std::vector<std::unordered_map<std::vector<std::int32_t>, BigInt, detail::ResidualHash>>
      memo_;
};

// |M(r, c)| exactly, or BudgetExceededError.
inline BigInt count_exact(const Margins& margins,
                          std::int64_t budget = default_counting_budget()) {
  CountingDp dp(margins, budget);
  return dp.total();
}

// Visits every table of M(r, c) exactly once in ascending row-major
// lexicographic order.  Independent of the counting DP on purpose: this is
// the brute-force oracle the DP is checked against.
inline void enumerate_tables(const Margins& margins,
                             const std::function<void(const IMat&)>& visit,
                             std::int64_t budget = default_counting_budget()) {
  const std::size_t m = margins.m(), n = margins.n();
  IMat tab(m, n, 0);
  std::vector<std::int64_t> rres(margins.rows()), cres(margins.cols());
  std::int64_t work = 0;
  auto charge = [&]() {
    if (++work > budget)
      throw BudgetExceededError("enumeration budget exceeded");
  };
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t j) {
    charge();
    if (i == m) {
      visit(tab);
      return;
    }
    const std::size_t ni = (j + 1 < n) ? i : i + 1;
    const std::size_t nj = (j + 1 < n) ? j + 1 : 0;
    std::int64_t suffix = 0;
    for (std::size_t jj = j + 1; jj < n; ++jj) suffix += cres[jj];
    const std::int64_t lo = std::max<std::int64_t>(0, rres[i] - suffix);
    const std::int64_t hi = std::min(rres[i], cres[j]);
    for (std::int64_t v = lo; v <= hi; ++v) {
      if (j + 1 == n && rres[i] != v) continue;
      if (i + 1 == m && cres[j] != v) continue;
      tab(i, j) = v;
      rres[i] -= v;
      cres[j] -= v;
      rec(ni, nj);
      rres[i] += v;
      cres[j] += v;
    }
    tab(i, j) = 0;
  };
  rec(0, 0);
}

inline std::vector<IMat> enumerate_tables(const Margins& margins,
                                          std::int64_t budget = default_counting_budget()) {
  std::vector<IMat> out;
  enumerate_tables(margins, [&](const IMat& t) { out.push_back(t); }, budget);
  return out;
}

// Barvinok count bounds: ln|M(r,c)| <= g(Z) with Z the typical table; the
// lower bound N^{-gamma(m+n)} e^{g(Z)} involves an unspecified absolute
// constant gamma, so it is reported symbolically as (log_upper, N, m+n).
struct CountResult {
  std::optional<BigInt> exact;
  double log_upper = 0.0;
  std::int64_t N = 0;
  std::int64_t m_plus_n = 0;

  nlohmann::json to_json() const {
    nlohmann::json j{{"log_upper", log_upper},
                     {"N", N},
                     {"m_plus_n", m_plus_n},
                     {"log_lower_symbolic", "log_upper - gamma*(m+n)*log(N)"}};
    if (exact) j["exact"] = exact->str();
    return j;
  }
};

inline CountResult barvinok_log_bounds(const Margins& margins, double tol = 1e-10,
                                       std::int64_t budget = default_counting_budget()) {
  CountResult out;
  out.N = margins.total();
  out.m_plus_n = static_cast<std::int64_t>(margins.m() + margins.n());
  out.log_upper = g_value(solve_typical(margins, tol).z);
  try {
    out.exact = count_exact(margins, budget);
  } catch (const BudgetExceededError&) {
    out.exact.reset();
  }
  return out;
}

// log of the Fisher-Yates (hypergeometric) pmf of `table` in M(r, c):
// ln phi(r,c) - sum ln(y_ij!), phi = (prod r_i!)(prod c_j!)/N!.
inline double fisher_yates_log_pmf(const IMat& table, const Margins& margins) {
  if (table.rows() != margins.m() || table.cols() != margins.n())
    throw std::invalid_argument("fisher_yates_log_pmf: shape mismatch");
  for (auto v : table.data())
    if (v < 0) throw std::invalid_argument("fisher_yates_log_pmf: negative entry");
  if (table.row_sums() != margins.rows() || table.col_sums() != margins.cols())
    throw std::invalid_argument("fisher_yates_log_pmf: table does not match margins");
  auto lfact = [](std::int64_t k) { return std::lgamma(static_cast<double>(k) + 1.0); };
  double lp = -lfact(margins.total());
  for (auto r : margins.rows()) lp += lfact(r);
  for (auto c : margins.cols()) lp += lfact(c);
  for (auto v : table.data()) lp -= lfact(v);
  return lp;
}

}  // namespace margin_phase
