#pragma once

// Riemannian barycentres: the empirical variance function and its gradient,
// Riemannian gradient descent with an automatically selected safe step size
// and an exponential-rate guarantee, the robust barycentre, and the critical
// temperatures for the uniqueness of Gibbs-distribution barycentres on
// compact symmetric spaces.

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "manistat/errors.hpp"
#include "manistat/manifold.hpp"
#include "manistat/special.hpp"

namespace manistat {

// E_N(y) = (1/2N) sum_n d^2(y, x_n).
inline double empirical_variance(const std::vector<Point>& points, const Point& y) {
  if (points.empty()) throw DomainError("empirical_variance: empty point list");
  double acc = 0.0;
  for (const Point& x : points) {
    detail::require_same_manifold(x, y, "empirical_variance");
    double d = dist(y, x);
    acc += d * d;
  }
  return 0.5 * acc / points.size();
}

// grad E_N(y) = -(1/N) sum_n Log_y(x_n).
inline Tangent variance_gradient(const std::vector<Point>& points, const Point& y) {
  if (points.empty()) throw DomainError("variance_gradient: empty point list");
  Tangent g = zero_tangent(y);
  for (const Point& x : points) g = add(g, log_map(y, x));
  return scaled(g, -1.0 / points.size());
}

struct GradientDescentConfig {
  double step = 0.0;  // 0 selects the safe step from the Hessian bounds
  int max_iters = 2000;
  double grad_tol = 1e-10;
  // When set together with rate_target, every iterate is checked against
  // d^2(x_t, x*) <= (1 - step * strong_convexity)^t d^2(x_0, x*).
  std::optional<double> strong_convexity;
  std::optional<Point> rate_target;
};

struct DescentTrace {
  struct Row {
    int iter;
    double grad_norm;
    double objective;  // NaN when no objective callback was supplied
  };
  std::vector<Row> rows;
  double step = 0.0;
  bool converged = false;
  bool rate_bound_ok = true;  // only meaningful when the rate check is armed
};

struct DescentResult {
  Point minimizer;
  DescentTrace trace;
};

using GradientFn = std::function<Tangent(const Point&)>;
using ObjectiveFn = std::function<double(const Point&)>;

// x_{t+1} = Exp_{x_t}(-mu grad f(x_t)) until the gradient norm falls below
// grad_tol or max_iters is reached.
inline DescentResult gradient_descent(const GradientFn& grad, const Point& x0,
                                      const GradientDescentConfig& cfg,
                                      const ObjectiveFn& objective = nullptr) {
  if (cfg.step <= 0.0) throw DomainError("gradient_descent: positive step required");
  if (cfg.grad_tol <= 0.0) throw DomainError("gradient_descent: positive grad_tol required");
  DescentResult out{x0, {}};
  out.trace.step = cfg.step;
  const bool check_rate = cfg.strong_convexity.has_value() && cfg.rate_target.has_value();
  double d0_sq = 0.0;
  double contraction = 1.0;
  if (check_rate) {
    double d0 = dist(x0, *cfg.rate_target);
    d0_sq = d0 * d0;
    contraction = 1.0 - cfg.step * (*cfg.strong_convexity);
  }
  Point x = x0;
  double rate_envelope = d0_sq;
  for (int it = 0; it < cfg.max_iters; ++it) {
    Tangent g = grad(x);
    double gn = norm(g);
    if (!std::isfinite(gn))
      throw NumericalError("gradient_descent: non-finite gradient at iteration " +
                           std::to_string(it));
    out.trace.rows.push_back(
        {it, gn, objective ? objective(x) : std::numeric_limits<double>::quiet_NaN()});
    if (gn <= cfg.grad_tol) {
      out.trace.converged = true;
      break;
    }
    x = exp_map(x, scaled(g, -cfg.step));
    if (check_rate) {
      rate_envelope *= contraction;
      double dt = dist(x, *cfg.rate_target);
      if (dt * dt > rate_envelope * (1.0 + 1e-9) + 1e-300) out.trace.rate_bound_ok = false;
    }
  }
  out.minimizer = x;
  return out;
}

namespace detail {

// Safe step for minimising E_N, realised from the closed-form Hessian bounds:
// mu = min{ 1 / (Hbar'_0 C_0), 1/alpha, 1 } where H'_0 and C_0 are suprema of
// Hess E_N and of c R coth(c R) over the ball the iterates cannot leave.
inline double barycentre_safe_step(const std::vector<Point>& points, const Point& x0,
                                   double alpha) {
  const double c = std::sqrt(-x0.manifold.curvature_bounds().first);
  const double e0 = empirical_variance(points, x0);
  const double radius = std::sqrt(2.0 * e0);  // f(x) - f(x*) >= d^2/2
  double mean_d0 = 0.0;
  for (const Point& p : points) mean_d0 += dist(x0, p);
  mean_d0 /= points.size();
  const double grad_sup = mean_d0 + 2.0 * radius;
  double hess_sup = 0.0;
  for (const Point& p : points) {
    double dmx = dist(x0, p) + 2.0 * radius + grad_sup;
    double arg = c * dmx;
    hess_sup += arg < 1e-12 ? 1.0 : arg / std::tanh(arg);
  }
  hess_sup = std::max(hess_sup / points.size(), 1.0);
  double arg = c * radius;
  const double c0 = arg < 1e-12 ? 1.0 : arg / std::tanh(arg);
  return std::min({1.0 / (hess_sup * c0), 1.0 / alpha, 1.0});
}

}  // namespace detail

// Global minimiser of E_N on a Hadamard manifold (unique by strong convexity).
inline Point empirical_barycentre(const std::vector<Point>& points,
                                  GradientDescentConfig cfg = {}) {
  if (points.empty()) throw DomainError("empirical_barycentre: empty point list");
  if (!points.front().manifold.is_hadamard())
    throw UnsupportedError("empirical_barycentre: Hadamard manifolds only");
  const Point& x0 = points.front();
  bool all_equal = true;
  for (const Point& p : points)
    if (detail::coords_distance(p.coords, x0.coords) > 0) {
      all_equal = false;
      break;
    }
  if (all_equal) return x0;  // degenerate input short-circuits
  const double alpha = cfg.strong_convexity.value_or(0.5);
  if (cfg.step <= 0.0) cfg.step = detail::barycentre_safe_step(points, x0, alpha);
  auto grad = [&points](const Point& y) { return variance_gradient(points, y); };
  return gradient_descent(grad, x0, cfg).minimizer;
}

// Robust barycentre: minimises V_pi(y) = (1/N) sum_n V_{x_n}(y) where
// V_x(y) = delta^2 [ (1 + (d/delta)^2)^{1/2} - 1 ]; the gradient divides each
// -Log_y(x_n) by (1 + (d/delta)^2)^{1/2}, and Hess V_x <= 1 + delta c fixes
// the default step.
inline Tangent robust_variance_gradient(const std::vector<Point>& points, const Point& y,
                                        double delta) {
  Tangent g = zero_tangent(y);
  for (const Point& x : points) {
    double d = dist(y, x);
    double w = 1.0 / std::sqrt(1.0 + (d / delta) * (d / delta));
    g = add(g, scaled(log_map(y, x), -w));
  }
  return scaled(g, 1.0 / points.size());
}

inline double robust_variance(const std::vector<Point>& points, const Point& y, double delta) {
  double acc = 0.0;
  for (const Point& x : points) {
    double d = dist(y, x);
    acc += delta * delta * (std::sqrt(1.0 + (d / delta) * (d / delta)) - 1.0);
  }
  return acc / points.size();
}

inline Point robust_barycentre(const std::vector<Point>& points, double delta,
                               GradientDescentConfig cfg = {}) {
  if (points.empty()) throw DomainError("robust_barycentre: empty point list");
  if (delta <= 0.0) throw DomainError("robust_barycentre: delta > 0 required");
  if (!points.front().manifold.is_hadamard())
    throw UnsupportedError("robust_barycentre: Hadamard manifolds only");
  const Point& x0 = points.front();
  bool all_equal = true;
  for (const Point& p : points)
    if (detail::coords_distance(p.coords, x0.coords) > 0) {
      all_equal = false;
      break;
    }
  if (all_equal) return x0;
  const double c = std::sqrt(-x0.manifold.curvature_bounds().first);
  if (cfg.step <= 0.0) cfg.step = 1.0 / (1.0 + delta * c);
  auto grad = [&points, delta](const Point& y) {
    return robust_variance_gradient(points, y, delta);
  };
  return gradient_descent(grad, x0, cfg).minimizer;
}

// ---------------------------------------------------------------------------
// Critical temperatures for Gibbs barycentres on compact symmetric spaces
// ---------------------------------------------------------------------------

struct GibbsTemperatureInputs {
  int n = 2;              // manifold dimension
  double mu_min = 1.0;    // lower Hessian bound of the potential at x*
  double mu_max = 1.0;    // upper Hessian bound
  double rho = 0.5;       // radius where the two-sided bound holds
  double delta = 0.25;    // target concentration radius, < diam/2
  double U_rho = 0.0;     // potential gap outside B(x*, rho)
  double U_delta = 0.0;   // potential gap outside B(x*, delta)
  double diam_M = kPi;    // diameter of M
  double vol_M = 1.0;     // Riemannian volume of M
  double A_M = 1.0;       // symmetric-space constant of the Hessian estimate
  double Ct2delta = 1.0;  // Ct(2 delta) = 2 c delta cot(2 c delta)

  void validate() const {
    if (n < 1 || mu_min <= 0.0 || mu_max < mu_min || rho <= 0.0 || delta <= 0.0 ||
        U_rho < 0.0 || U_delta < 0.0 || diam_M <= 0.0 || vol_M <= 0.0 || A_M <= 0.0 ||
        Ct2delta <= 0.0)
      throw DomainError("GibbsTemperatureInputs: inconsistent or non-positive inputs");
    if (delta >= 0.5 * diam_M)
      throw DomainError("GibbsTemperatureInputs: delta < diam_M / 2 required");
  }
};

namespace detail {

// f(T, m, rho) = (2/pi)^{1/2} (mu_max / T)^{m/2} exp(-U_rho / T)
inline double gibbs_f(double T, double m, double mu_max, double gap) {
  return std::sqrt(2.0 / kPi) * std::pow(mu_max / T, 0.5 * m) * std::exp(-gap / T);
}

// f(T) = (2/pi) (pi/8)^{n-1} (mu_max / T)^{n/2} exp(-U_delta / T)
inline double gibbs_f_delta(double T, int n, double mu_max, double gap) {
  return (2.0 / kPi) * std::pow(kPi / 8.0, n - 1.0) * std::pow(mu_max / T, 0.5 * n) *
         std::exp(-gap / T);
}

// Infimum of {T in (0, T_hi] : cond(T)} located by first scanning a geometric
// grid for a bracket and then bisecting to relative tolerance 1e-10. The grid
// is escalated (finer, wider) before giving up.
inline double first_crossing(const std::function<bool(double)>& cond, double t_hi) {
  double lo_bound = 1e-12 * t_hi;
  for (int attempt = 0; attempt < 4; ++attempt) {
    const int cells = 256 << (2 * attempt);
    double prev = lo_bound;
    bool prev_holds = cond(prev);
    if (prev_holds) return prev;  // holds arbitrarily close to zero
    for (int i = 1; i <= cells; ++i) {
      double T = lo_bound * std::pow(t_hi / lo_bound, static_cast<double>(i) / cells);
      if (cond(T)) {
        double a = prev, b = T;
        for (int it = 0; it < 200 && (b - a) > 1e-10 * b; ++it) {
          double m = 0.5 * (a + b);
          (cond(m) ? b : a) = m;
        }
        return 0.5 * (a + b);
      }
      prev = T;
    }
    lo_bound *= 1e-6;
  }
  return -1.0;  // condition never satisfied
}

}  // namespace detail

struct CriticalTemperatures {
  double T_W;
  double T_delta;
};

// T_W = min{T_W^1, T_W^2} and T_delta = min{T_delta^1, T_delta^2}, each piece
// the infimum of the temperatures at which the associated strict inequality
// first holds. A_n and omega_{n-1} come from their Gamma-function formulas.
inline CriticalTemperatures critical_temperatures(const GibbsTemperatureInputs& in) {
  in.validate();
  const int n = in.n;
  const double An = normal_abs_moment(n);
  const double Anm1 = normal_abs_moment(n - 1);
  const double omega = sphere_area(n);  // area of S^{n-1}
  const double Cn = omega * An / (in.diam_M * in.vol_M);
  const double Bn = std::exp(std::lgamma(0.5) + std::lgamma(0.5 * n) - std::lgamma(0.5 + 0.5 * n));
  const double Dn = std::pow(2.0 / kPi, n - 1.0) * Bn / (4.0 * in.diam_M);

  // a generous upper end for the search; f peaks at T = 2 gap / m
  const double t_hi =
      std::max({1.0, 4.0 * in.U_rho, 4.0 * in.U_delta, 4.0 * in.mu_max});

  double t1w = detail::first_crossing(
      [&](double T) {
        return detail::gibbs_f(T, n - 2.0, in.mu_max, in.U_rho) >
               std::pow(in.rho, 2.0 - n) * Anm1;
      },
      t_hi);
  double t2w = detail::first_crossing(
      [&](double T) {
        return detail::gibbs_f(T, n + 1.0, in.mu_max, in.U_rho) >
               std::pow(in.mu_max / in.mu_min, 0.5 * n) * Cn;
      },
      t_hi);
  if (t1w < 0.0 || t2w < 0.0)
    throw NumericalError("critical_temperatures: concentration inequality never satisfied");
  const double tw = std::min(t1w, t2w);

  double t1d = detail::first_crossing(
      [&](double T) {
        return std::sqrt(2.0 * kPi * T / in.mu_min) >
               in.delta * in.delta * std::pow(in.mu_min / in.mu_max, 0.5 * n) * Dn;
      },
      tw);
  double t2d = detail::first_crossing(
      [&](double T) {
        return detail::gibbs_f_delta(T, n, in.mu_max, in.U_delta) >
               in.Ct2delta / (in.Ct2delta * in.vol_M + kPi * in.A_M);
      },
      tw);
  // a piece whose inequality never triggers below T_W is capped at T_W
  if (t1d < 0.0) t1d = tw;
  if (t2d < 0.0) t2d = tw;
  return {tw, std::min(t1d, t2d)};
}

}  // namespace manistat
