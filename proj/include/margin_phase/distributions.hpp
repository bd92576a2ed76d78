#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "margin_phase/rng.hpp"

namespace margin_phase {

// Total variation in this library follows the paper convention
//     d_TV(p, q) = sum_x |p(x) - q(x)|,
// i.e. twice the usual definition, with range [0, 2].  Callers who need the
// standard convention halve the result themselves.

// Geometric distribution with mean lambda:
// P(X = k) = (1/(1+lambda)) (lambda/(1+lambda))^k on k = 0, 1, 2, ...
class GeomDist {
 public:
  explicit GeomDist(double lambda) : lambda_(lambda) {
    if (!(lambda > 0)) throw std::invalid_argument("GeomDist: lambda must be > 0");
  }

  double lambda() const { return lambda_; }
  double mean() const { return lambda_; }
  double variance() const { return lambda_ * (1.0 + lambda_); }
  double ratio() const { return lambda_ / (1.0 + lambda_); }  // q = P(X >= 1)

  double pmf(std::int64_t k) const {
    if (k < 0) return 0.0;
    return std::exp(static_cast<double>(k) * std::log(ratio())) / (1.0 + lambda_);
  }
  // P(X >= k).
  double tail(std::int64_t k) const {
    if (k <= 0) return 1.0;
    return std::exp(static_cast<double>(k) * std::log(ratio()));
  }

  // E[min(X, M)] for real M >= 0, in closed form.
  double truncated_mean(double M) const {
    if (!(M >= 0)) throw std::invalid_argument("truncated_mean: M must be >= 0");
    if (std::isinf(M)) return lambda_;
    const double q = ratio();
    const double m = std::floor(M);
    const double qm = std::pow(q, m);
    return lambda_ * (1.0 - qm) + (M - m) * qm * q;
  }
  // E[(X - M)^+] = mean - truncated_mean, in closed form.
  double excess_mean(double M) const {
    if (!(M >= 0)) throw std::invalid_argument("excess_mean: M must be >= 0");
    if (std::isinf(M)) return 0.0;
    const double q = ratio();
    const double m = std::floor(M);
    return std::pow(q, m + 1.0) * ((m + 1.0 - M) + lambda_);
  }

  // Inverse-CDF draw: floor(ln U / ln(lambda/(1+lambda))), U uniform (0,1).
  std::int64_t sample(SplitMix64& rng) const {
    const double u = rng.next_unit();
    return static_cast<std::int64_t>(std::floor(std::log(u) / std::log(ratio())));
  }

 private:
  double lambda_;
};

// Exact integer histogram over non-negative values; no binning.  Merging is
// associative, which the parallel experiment reducers rely on.
class EmpiricalDist {
 public:
  EmpiricalDist() = default;

  void add(std::int64_t value, std::int64_t count = 1) {
    if (value < 0) throw std::invalid_argument("EmpiricalDist: negative value");
    if (count <= 0) throw std::invalid_argument("EmpiricalDist: count must be positive");
    counts_[value] += count;
    total_ += count;
  }
  void merge(const EmpiricalDist& other) {
    for (const auto& [v, c] : other.counts_) {
      counts_[v] += c;
      total_ += c;
    }
  }

  const std::map<std::int64_t, std::int64_t>& counts() const { return counts_; }
  std::int64_t total() const { return total_; }
  bool empty() const { return total_ == 0; }
  std::int64_t max_value() const {
    return counts_.empty() ? -1 : counts_.rbegin()->first;
  }

  double prob(std::int64_t value) const {
    if (total_ == 0) return 0.0;
    auto it = counts_.find(value);
    return it == counts_.end()
               ? 0.0
               : static_cast<double>(it->second) / static_cast<double>(total_);
  }
  double mean() const {
    require_nonempty();
    double s = 0.0;
    for (const auto& [v, c] : counts_) s += static_cast<double>(v) * static_cast<double>(c);
    return s / static_cast<double>(total_);
  }
  double variance() const {
    require_nonempty();
    const double mu = mean();
    double s = 0.0;
    for (const auto& [v, c] : counts_) {
      const double d = static_cast<double>(v) - mu;
      s += d * d * static_cast<double>(c);
    }
    return s / static_cast<double>(total_);
  }
  double truncated_mean(double M) const {
    if (!(M >= 0)) throw std::invalid_argument("truncated_mean: M must be >= 0");
    require_nonempty();
    double s = 0.0;
    for (const auto& [v, c] : counts_)
      s += std::min(static_cast<double>(v), M) * static_cast<double>(c);
    return s / static_cast<double>(total_);
  }
  double excess_mean(double M) const {
    if (!(M >= 0)) throw std::invalid_argument("excess_mean: M must be >= 0");
    require_nonempty();
    double s = 0.0;
    for (const auto& [v, c] : counts_)
      s += std::max(static_cast<double>(v) - M, 0.0) * static_cast<double>(c);
    return s / static_cast<double>(total_);
  }

  // {"value": count} with string keys, plus the total.
  nlohmann::json to_json() const {
    nlohmann::json h = nlohmann::json::object();
    for (const auto& [v, c] : counts_) h[std::to_string(v)] = c;
    return nlohmann::json{{"counts", h}, {"total", total_}};
  }

 private:
  void require_nonempty() const {
    if (total_ == 0) throw std::invalid_argument("EmpiricalDist: empty histogram");
  }

  std::map<std::int64_t, std::int64_t> counts_;
  std::int64_t total_ = 0;
};

// TV between two geometric laws, summed until both tails fall below 1e-13;
// the remaining tails enter as |tail difference| (exact up to 2e-13).
inline double tv_distance(const GeomDist& p, const GeomDist& q) {
  double s = 0.0;
  std::int64_t k = 0;
  while (p.tail(k) + q.tail(k) >= 1e-13) {
    s += std::abs(p.pmf(k) - q.pmf(k));
    ++k;
    if (k > 100000000) break;  // unreachable for sane lambdas
  }
  return s + std::abs(p.tail(k) - q.tail(k));
}

inline double tv_distance(const EmpiricalDist& p, const EmpiricalDist& q) {
  if (p.empty() || q.empty())
    throw std::invalid_argument("tv_distance: empty histogram");
  double s = 0.0;
  auto it = p.counts().begin();
  auto jt = q.counts().begin();
  while (it != p.counts().end() || jt != q.counts().end()) {
    std::int64_t v;
    double pp = 0.0, qq = 0.0;
    if (jt == q.counts().end() || (it != p.counts().end() && it->first < jt->first)) {
      v = it->first;
    } else if (it == p.counts().end() || jt->first < it->first) {
      v = jt->first;
    } else {
      v = it->first;
    }
    if (it != p.counts().end() && it->first == v) {
      pp = static_cast<double>(it->second) / static_cast<double>(p.total());
      ++it;
    }
    if (jt != q.counts().end() && jt->first == v) {
      qq = static_cast<double>(jt->second) / static_cast<double>(q.total());
      ++jt;
    }
    s += std::abs(pp - qq);
  }
  return s;
}

// TV between an empirical histogram and Geom(lambda).  The geometric mass
// beyond the largest observed value is unmatched and counts in full.
inline double empirical_tv_to_geom(const EmpiricalDist& e, double lambda) {
  if (e.empty()) throw std::invalid_argument("empirical_tv_to_geom: empty histogram");
  const GeomDist g(lambda);
  const std::int64_t top = e.max_value();
  double s = 0.0;
  for (std::int64_t k = 0; k <= top; ++k) s += std::abs(e.prob(k) - g.pmf(k));
  return s + g.tail(top + 1);
}

// Upper bound on d_TV(Geom(l1), Geom(l2)):
//   2 |l1 - l2| min((1+l1)/(1+l2), (1+l2)/(1+l1)).
inline double tv_geom_bound(double lambda1, double lambda2) {
  if (!(lambda1 > 0) || !(lambda2 > 0))
    throw std::invalid_argument("tv_geom_bound: lambdas must be > 0");
  const double a = (1.0 + lambda1) / (1.0 + lambda2);
  return 2.0 * std::abs(lambda1 - lambda2) * std::min(a, 1.0 / a);
}

inline double truncated_mean(const GeomDist& d, double M) { return d.truncated_mean(M); }
inline double truncated_mean(const EmpiricalDist& d, double M) { return d.truncated_mean(M); }
inline double excess_mean(const GeomDist& d, double M) { return d.excess_mean(M); }
inline double excess_mean(const EmpiricalDist& d, double M) { return d.excess_mean(M); }

}  // namespace margin_phase
