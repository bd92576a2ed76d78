#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "margin_phase/core.hpp"
#include "margin_phase/errors.hpp"
#include "margin_phase/matrix.hpp"

namespace margin_phase {

// f(x) = (x+1) ln(x+1) - x ln x, extended continuously by f(0) = 0.
inline double f_barvinok(double x) {
  if (!(x >= 0)) throw std::invalid_argument("f_barvinok: x must be >= 0");
  if (x == 0.0) return 0.0;
  return (x + 1.0) * std::log1p(x) - x * std::log(x);
}

// g(X) = sum of f over all entries.
inline double g_value(const DMat& z) {
  double s = 0.0;
  for (double v : z.data()) s += f_barvinok(v);
  return s;
}

// Independence table w_ij = r_i c_j / N; reproduces the margins exactly.
inline DMat independence_table(const Margins& margins) {
  if (margins.total() <= 0) throw std::invalid_argument("independence_table: N must be > 0");
  DMat w(margins.m(), margins.n());
  const double N = static_cast<double>(margins.total());
  for (std::size_t i = 0; i < margins.m(); ++i)
    for (std::size_t j = 0; j < margins.n(); ++j)
      w(i, j) = static_cast<double>(margins.rows()[i]) *
                static_cast<double>(margins.cols()[j]) / N;
  return w;
}

// H(W) = sum_{ij} (w_ij/N) ln(N/w_ij); zero entries contribute 0.
inline double entropy_H(const DMat& w, double N) {
  if (!(N > 0)) throw std::invalid_argument("entropy_H: N must be > 0");
  double h = 0.0;
  for (double v : w.data()) {
    if (v < 0) throw std::invalid_argument("entropy_H: negative entry");
    if (v > 0) h += (v / N) * std::log(N / v);
  }
  return h;
}

namespace detail {

// 1 / (e^s - 1) for s > 0, stable at both ends.
inline double inv_expm1(double s) {
  if (s < 1.0) return 1.0 / std::expm1(s);
  const double e = std::exp(-s);
  return e / (1.0 - e);
}

// Kahan-compensated sum of inv_expm1(x + off_j); keeps the evaluation noise
// near one ulp of the total so tight margin tolerances stay reachable.
inline double dual_row_sum(const std::vector<double>& off, double x, double* deriv) {
  double s = 0.0, comp = 0.0, d = 0.0;
  for (double o : off) {
    const double z = inv_expm1(x + o);
    const double y = z - comp;
    const double t = s + y;
    comp = (t - s) - y;
    s = t;
    d -= z * (1.0 + z);
  }
  if (deriv) *deriv = d;
  return s;
}

// Solves sum_j 1/(exp(x + off_j) - 1) = target for x on (-min off, inf).
// The left side is strictly decreasing and convex in x, so a Newton step
// from the high side converges fast; a maintained bracket guards it.
inline double solve_dual_coordinate(const std::vector<double>& off, double target,
                                    double x0, double tol1d) {
  double floor_x = -*std::min_element(off.begin(), off.end());
  auto eval = [&](double x, double* deriv) {
    return dual_row_sum(off, x, deriv) - target;
  };

  // Establish a bracket [lo, hi] with F(lo) > 0 > F(hi).
  double lo = floor_x, hi;
  double x = std::max(x0, floor_x + 1e-12);
  double d = 0.0;
  double fx = eval(x, &d);
  if (fx > 0.0) {
    lo = x;
    double step = std::max(1.0, std::abs(x));
    hi = x + step;
    while (eval(hi, nullptr) > 0.0) {
      lo = hi;
      step *= 2.0;
      hi += step;
      if (hi > 1e12) throw ConvergenceError("dual solve: no upper bracket", fx);
    }
  } else {
    hi = x;
    double gap = std::max((x - floor_x) * 0.5, 1e-18);
    double cand = x - gap;
    while (eval(cand, nullptr) < 0.0) {
      hi = cand;
      gap *= 0.5;
      cand = floor_x + (cand - floor_x) * 0.5;
      if (cand - floor_x < 1e-300)
        throw ConvergenceError("dual solve: no lower bracket", fx);
    }
    lo = cand;
    x = cand;
    fx = eval(x, &d);
  }

  for (int it = 0; it < 200; ++it) {
    if (std::abs(fx) <= tol1d) break;
    double step = (d != 0.0) ? -fx / d : 0.0;
    double xn = x + step;
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);  // bisection fallback
    x = xn;
    fx = eval(x, &d);
    if (fx > 0.0)
      lo = x;
    else
      hi = x;
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

}  // namespace detail

// Typical table of a margin pair: the maximizer of g over the transportation
// polytope, stored through its dual variables.  z_ij = 1/(exp(lambda_i +
// mu_j) - 1) holds by construction; `residual` is the largest margin
// violation of z.
struct TypicalTable {
  DMat z;
  std::vector<double> lambda;
  std::vector<double> mu;
  double residual = 0.0;
  std::int64_t sweeps = 0;
};

// Alternating dual coordinate ascent for the typical table.
//
// Starting from the independence-table split of the duals, each sweep solves
// every row equation exactly in lambda_i, then every column equation in
// mu_j, then re-gauges so lambda_1 = mu_1 (the duals are only determined up
// to a (+t, -t) shift).  Margins must be strictly positive: a zero margin
// has no finite dual solution.
inline TypicalTable solve_typical(const Margins& margins, double tol = 1e-10,
                                  std::int64_t max_iter = 10000) {
  if (!margins.all_positive())
    throw std::invalid_argument("solve_typical: margins must be strictly positive");
  const std::size_t m = margins.m(), n = margins.n();
  const double N = static_cast<double>(margins.total());
  const double rbar = N / static_cast<double>(m);

  std::vector<double> lambda(m, 0.0), mu(n);
  for (std::size_t j = 0; j < n; ++j)
    mu[j] = 0.5 * std::log1p(N / (static_cast<double>(margins.cols()[j]) * rbar));

  TypicalTable out;
  out.z = DMat(m, n);
  auto residual_of = [&]() {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        out.z(i, j) = detail::inv_expm1(lambda[i] + mu[j]);
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      worst = std::max(worst, std::abs(detail::dual_row_sum(mu, lambda[i], nullptr) -
                                       static_cast<double>(margins.rows()[i])));
    for (std::size_t j = 0; j < n; ++j)
      worst = std::max(worst, std::abs(detail::dual_row_sum(lambda, mu[j], nullptr) -
                                       static_cast<double>(margins.cols()[j])));
    return worst;
  };

  // The scalar solves must land below the margin tolerance; 1e-13 absolute
  // is the documented default, relaxed only when the residual target allows.
  auto tol1d = [&](double target) {
    return std::min(1e-13 * std::max(1.0, std::abs(target)),
                    std::max(0.05 * tol, 4e-15 * std::abs(target)));
  };
  for (std::int64_t sweep = 1; sweep <= max_iter; ++sweep) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = static_cast<double>(margins.rows()[i]);
      lambda[i] = detail::solve_dual_coordinate(mu, r, lambda[i], tol1d(r));
    }
    for (std::size_t j = 0; j < n; ++j) {
      const auto c = static_cast<double>(margins.cols()[j]);
      mu[j] = detail::solve_dual_coordinate(lambda, c, mu[j], tol1d(c));
    }
    const double shift = 0.5 * (mu[0] - lambda[0]);
    for (double& v : lambda) v += shift;
    for (double& v : mu) v -= shift;

    out.sweeps = sweep;
    out.residual = residual_of();
    if (out.residual <= tol) {
      out.lambda = lambda;
      out.mu = mu;
      return out;
    }
  }
  throw ConvergenceError("solve_typical: residual above tolerance after max_iter sweeps",
                         out.residual);
}

// Typical table of a BlockSpec through the reduced two-variable system.  With
// kappa = k/n and the floored per-row sums R = heavy/n, S = light/n, the
// margin conditions collapse to
//     kappa*z11 + z1n1 = R,    kappa*z1n1 + znn = S,
// where z11 = 1/(P^2-1), z1n1 = 1/(PQ-1), znn = 1/(Q^2-1).
struct BlockTypical {
  double P = 0.0, Q = 0.0;
  double z11 = 0.0, z1n1 = 0.0, znn = 0.0;
  double residual = 0.0;
  std::int64_t k = 0;
};

inline BlockTypical solve_typical_block(const BlockSpec& spec, double tol = 1e-10) {
  if (spec.heavy_sum() <= 0 || spec.light_sum() <= 0)
    throw std::invalid_argument("solve_typical_block: floored margins must be positive");
  const double kappa =
      static_cast<double>(spec.k()) / static_cast<double>(spec.n);
  const double R = static_cast<double>(spec.heavy_sum()) / static_cast<double>(spec.n);
  const double S = static_cast<double>(spec.light_sum()) / static_cast<double>(spec.n);

  // Inner solve: P(Q) from the heavy-row equation, strictly decreasing in P.
  auto solve_P = [&](double Q) {
    const double floor_P = std::max(1.0, 1.0 / Q);
    auto F = [&](double P) {
      return kappa / (P * P - 1.0) + 1.0 / (P * Q - 1.0) - R;
    };
    double lo = floor_P, hi = floor_P + 1.0;
    while (F(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e18) throw ConvergenceError("solve_typical_block: P bracket failed", R);
    }
    for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= floor_P || F(mid) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  // Outer solve: the light-column equation, strictly decreasing in Q.
  auto G = [&](double Q) {
    const double P = solve_P(Q);
    return kappa / (P * Q - 1.0) + 1.0 / (Q * Q - 1.0) - S;
  };

  double qlo = 1.0 + 1e-12, qhi = 2.0;
  while (G(qhi) > 0.0) {
    qlo = qhi;
    qhi *= 2.0;
    if (qhi > 1e18) throw ConvergenceError("solve_typical_block: Q bracket failed", S);
  }
  for (int it = 0; it < 220 && qhi - qlo > 1e-16 * qhi; ++it) {
    const double mid = 0.5 * (qlo + qhi);
    if (G(mid) > 0.0)
      qlo = mid;
    else
      qhi = mid;
  }

  BlockTypical bt;
  bt.k = spec.k();
  bt.Q = 0.5 * (qlo + qhi);
  bt.P = solve_P(bt.Q);
  bt.z11 = 1.0 / (bt.P * bt.P - 1.0);
  bt.z1n1 = 1.0 / (bt.P * bt.Q - 1.0);
  bt.znn = 1.0 / (bt.Q * bt.Q - 1.0);
  bt.residual = std::max(std::abs(kappa * bt.z11 + bt.z1n1 - R),
                         std::abs(kappa * bt.z1n1 + bt.znn - S));
  if (!(bt.residual <= tol))
    throw ConvergenceError("solve_typical_block: residual above tolerance", bt.residual);
  return bt;
}

// Limit of z11 as n -> inf in the subcritical regime B < B_c.  Written via
// B_c; algebraically equal to B^2 C (C+1) / (2BC + 1 - B^2 C) scaled so the
// denominator is (B_c - B)(B_c + B - 2).
inline double subcritical_limit_z11(double B, double C) {
  const double Bc = critical_B(C);
  if (!(B > 0) || !(B < Bc))
    throw std::invalid_argument("subcritical_limit_z11: need 0 < B < B_c");
  return B * B * (1.0 + C) / ((Bc - B) * (Bc + B - 2.0));
}

// Limit of n^{delta-1} z11 as n -> inf in the supercritical regime B > B_c.
inline double supercritical_scaled_z11(double B, double C) {
  const double Bc = critical_B(C);
  if (!(B > Bc))
    throw std::invalid_argument("supercritical_scaled_z11: need B > B_c");
  return C * (B - Bc);
}

}  // namespace margin_phase
