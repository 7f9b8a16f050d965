#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "manistat/errors.hpp"
#include "manistat/rng.hpp"

namespace manistat {

inline constexpr double kPi = 3.14159265358979323846;

// log of the binomial coefficient C(n, k).
inline double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Area of the unit sphere S^{n-1} in R^n, omega_{n-1} = 2 pi^{n/2} / Gamma(n/2).
inline double log_sphere_area(int n) {
  return std::log(2.0) + 0.5 * n * std::log(kPi) - std::lgamma(0.5 * n);
}
inline double sphere_area(int n) { return std::exp(log_sphere_area(n)); }

// n-th absolute moment of a standard normal variable,
// A_n = pi^{-1/2} 2^{n/2} Gamma((n+1)/2).
inline double normal_abs_moment(int n) {
  return std::exp(-0.5 * std::log(kPi) + 0.5 * n * std::log(2.0) + std::lgamma(0.5 * (n + 1)));
}

// Scaled complementary error function erfcx(z) = exp(z^2) erfc(z) for z >= 0,
// evaluated without overflow.
inline double erfcx_positive(double z) {
  if (z < 2.5) return std::exp(z * z) * std::erfc(z);
  // Continued fraction (Laplace): erfcx(z) = 1/sqrt(pi) * 1/(z + 1/(2z + 2/(z + 3/(2z + ...))))
  double cf = 0.0;
  for (int k = 60; k >= 1; --k) {
    double num = 0.5 * k;
    cf = num / (z + cf);
  }
  return 1.0 / std::sqrt(kPi) / (z + cf);
}

// log of the Mills-type ratio Phi(a) / phi(a), where Phi and phi are the
// standard normal distribution and density functions. Stable for any a.
inline double log_gauss_cdf_over_pdf(double a) {
  const double half_log_2pi = 0.5 * std::log(2.0 * kPi);
  if (a >= 0.0) {
    // Phi(a) = 1 - erfc(a/sqrt2)/2 in [1/2, 1]
    double cdf = 1.0 - 0.5 * std::erfc(a / std::sqrt(2.0));
    return half_log_2pi + 0.5 * a * a + std::log(cdf);
  }
  // Phi(a) = erfc(-a/sqrt2)/2 = erfcx(-a/sqrt2) exp(-a^2/2) / 2
  return half_log_2pi - std::log(2.0) + std::log(erfcx_positive(-a / std::sqrt(2.0)));
}

// Standard normal CDF.
inline double gauss_cdf(double a) { return 0.5 * std::erfc(-a / std::sqrt(2.0)); }

// log(sum_i s_i exp(l_i)) for signs s_i in {-1,+1}. Returns {log|sum|, sign}.
// Throws NumericalError if the signed sum is zero or negative when a strictly
// positive result is required by the caller.
inline std::pair<double, int> signed_log_sum_exp(const std::vector<double>& logs,
                                                 const std::vector<int>& signs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double l : logs) m = std::max(m, l);
  if (!std::isfinite(m)) return {m, 1};
  double acc = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) acc += signs[i] * std::exp(logs[i] - m);
  if (acc == 0.0) return {-std::numeric_limits<double>::infinity(), 1};
  return {m + std::log(std::abs(acc)), acc > 0.0 ? 1 : -1};
}

inline double log_sum_exp(const std::vector<double>& logs) {
  std::vector<int> signs(logs.size(), 1);
  return signed_log_sum_exp(logs, signs).first;
}

namespace detail {

// Gauss-Kronrod 7-15 nodes/weights on [-1, 1].
inline const double kGK15Nodes[15] = {
    -0.991455371120813, -0.949107912342759, -0.864864423359769, -0.741531185599394,
    -0.586087235467691, -0.405845151377397, -0.207784955007898, 0.0,
    0.207784955007898,  0.405845151377397,  0.586087235467691,  0.741531185599394,
    0.864864423359769,  0.949107912342759,  0.991455371120813};
inline const double kGK15Weights[15] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529};
inline const double kG7Weights[7] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469,
    0.381830050505119, 0.279705391489277, 0.129484966168870};

template <class F>
std::pair<double, double> gk15(const F& f, double a, double b) {
  const double h = 0.5 * (b - a);
  const double c = 0.5 * (a + b);
  double k = 0.0, g = 0.0;
  for (int i = 0; i < 15; ++i) {
    double v = f(c + h * kGK15Nodes[i]);
    k += kGK15Weights[i] * v;
    if (i % 2 == 1) g += kG7Weights[i / 2] * v;
  }
  return {k * h, std::abs((k - g) * h)};
}

}  // namespace detail

// Adaptive Gauss-Kronrod quadrature of f over the finite interval [a, b]:
// greedy bisection of the segment carrying the largest error estimate until
// the summed error meets the relative tolerance (or a refinement cap).
template <class F>
double integrate(const F& f, double a, double b, double rel_tol = 1e-10) {
  struct Seg {
    double a, b, val, err;
  };
  auto [v0, e0] = detail::gk15(f, a, b);
  std::vector<Seg> segs{{a, b, v0, e0}};
  double total = v0;
  double total_err = e0;
  for (int iter = 0; iter < 8000; ++iter) {
    double tol = std::max(std::abs(total) * rel_tol, 1e-300);
    if (total_err <= tol) break;
    std::size_t worst = 0;
    for (std::size_t i = 1; i < segs.size(); ++i)
      if (segs[i].err > segs[worst].err) worst = i;
    Seg s = segs[worst];
    double mid = 0.5 * (s.a + s.b);
    if (!(mid > s.a && mid < s.b)) break;  // interval exhausted in double precision
    auto [v1, e1] = detail::gk15(f, s.a, mid);
    auto [v2, e2] = detail::gk15(f, mid, s.b);
    total += v1 + v2 - s.val;
    total_err += e1 + e2 - s.err;
    segs[worst] = {s.a, mid, v1, e1};
    segs.push_back({mid, s.b, v2, e2});
  }
  return total;
}

// Quadrature of f over [a, inf) through the substitution r = a + t/(1-t).
template <class F>
double integrate_to_infinity(const F& f, double a, double rel_tol = 1e-10) {
  auto g = [&](double t) {
    double om = 1.0 - t;
    double r = a + t / om;
    return f(r) / (om * om);
  };
  return integrate(g, 0.0, 1.0, rel_tol);
}

// Draws from a standard normal truncated to (lo, inf). Uses plain rejection
// when the cut is mild and Robert's exponential proposal in the deep tail.
inline double truncated_standard_normal(Rng& rng, double lo) {
  if (lo < 2.0) {
    for (;;) {
      double z = rng.normal();
      if (z > lo) return z;
    }
  }
  const double alpha = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
  for (;;) {
    double z = lo - std::log(rng.uniform()) / alpha;
    double rho = std::exp(-0.5 * (z - alpha) * (z - alpha));
    if (rng.uniform() <= rho) return z;
  }
}

// zeta(3) from partial sums of sum 1/k^3 with an Euler-Maclaurin tail
// correction; no hard-coded constant.
inline double zeta3() {
  static const double value = [] {
    const int K = 20000;
    double s = 0.0;
    for (int k = K; k >= 1; --k) s += 1.0 / (static_cast<double>(k) * k * k);
    const double Kd = K;
    // sum_{k>K} k^-3 = 1/(2K^2) - 1/(2K^3) + 1/(4K^4) - 1/(12 K^6) + ...
    s += 0.5 / (Kd * Kd) - 0.5 / (Kd * Kd * Kd) + 0.25 / (Kd * Kd * Kd * Kd);
    return s;
  }();
  return value;
}

}  // namespace manistat
