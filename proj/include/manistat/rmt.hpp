#pragma once

// Random-matrix machinery behind the Gaussian ensembles on H(N): the
// Weyl-integral volume constant omega_2(N), leading coefficients of the
// Stieltjes-Wigert and Rogers-Szego orthogonal polynomial families, the
// trilogarithm, and the large-N equilibrium spectral measure nu_t together
// with empirical-spectrum comparison utilities.

#include <algorithm>
#include <cmath>
#include <vector>

#include "manistat/errors.hpp"
#include "manistat/special.hpp"

namespace manistat {

struct EnsembleParams {
  int N = 1;
  double sigma = 1.0;
  double t() const { return N * sigma * sigma; }
};

struct SpectralSample {
  std::vector<double> eigenvalues;  // sorted ascending, all > 0
  EnsembleParams params;
};

// log omega_2(N) = ((N^2-N)/2) log(2 pi) - log G(N), G(N) = 1! 2! ... (N-1)!.
inline double log_omega2(int N) {
  if (N < 1) throw DomainError("log_omega2: N >= 1 required");
  double log_barnes = 0.0;
  for (int k = 2; k < N; ++k) log_barnes += std::lgamma(k + 1.0);
  return 0.5 * (static_cast<double>(N) * N - N) * std::log(2.0 * kPi) - log_barnes;
}
inline double omega2(int N) { return std::exp(log_omega2(N)); }

// log of p_nn^-2 for the orthonormal polynomials with respect to the
// log-normal weight rho(u, 2 sigma^2) on (0, inf):
// p_nn^-2 = (2 pi sigma^2)^(1/2) exp[(2n+1)^2 sigma^2 / 2] prod_{m<=n} (1 - e^{-m sigma^2}).
inline double log_sw_leading_coeff_invsq(int n, double sigma) {
  if (n < 0 || sigma <= 0.0) throw DomainError("sw_leading_coeff_invsq: n >= 0, sigma > 0");
  const double s2 = sigma * sigma;
  double acc = 0.5 * std::log(2.0 * kPi * s2) + 0.5 * (2.0 * n + 1.0) * (2.0 * n + 1.0) * s2;
  for (int m = 1; m <= n; ++m) acc += std::log1p(-std::exp(-m * s2));
  return acc;
}
inline double sw_leading_coeff_invsq(int n, double sigma) {
  return std::exp(log_sw_leading_coeff_invsq(n, sigma));
}

// log of p_nn^-2 for the Rogers-Szego family on the unit circle:
// p_nn^-2 = prod_{m<=n} (1 - e^{-m sigma^2}).
inline double log_rogers_szego_leading_invsq(int n, double sigma) {
  if (n < 0 || sigma <= 0.0) throw DomainError("rogers_szego_leading_invsq: n >= 0, sigma > 0");
  const double s2 = sigma * sigma;
  double acc = 0.0;
  for (int m = 1; m <= n; ++m) acc += std::log1p(-std::exp(-m * s2));
  return acc;
}
inline double rogers_szego_leading_invsq(int n, double sigma) {
  return std::exp(log_rogers_szego_leading_invsq(n, sigma));
}

// Trilogarithm Li_3(x) = sum_k x^k / k^3 on [0, 1); the series is summed to
// machine precision with tail bound x^{K+1} / ((K+1)^3 (1 - x)).
inline double trilog(double x) {
  if (x < 0.0 || x >= 1.0) throw DomainError("trilog: argument must lie in [0, 1)");
  if (x == 0.0) return 0.0;
  double acc = 0.0;
  double xk = 1.0;
  for (int k = 1; k < 100000000; ++k) {
    xk *= x;
    double term = xk / (static_cast<double>(k) * k * k);
    acc += term;
    double kk = k + 1.0;
    double tail = xk * x / (kk * kk * kk * (1.0 - x));
    if (tail < 1e-17 * acc) break;
  }
  return acc;
}

// Support [a(t), b(t)] of the equilibrium measure nu_t:
// a = c (1 + sqrt(1-c))^-2, b = c (1 - sqrt(1-c))^-2 with c = e^-t.
inline std::pair<double, double> equilibrium_support(double t) {
  if (t <= 0.0) throw DomainError("equilibrium_support: t > 0 required");
  double c = std::exp(-t);
  double s = std::sqrt(1.0 - c);
  double a = c / ((1.0 + s) * (1.0 + s));
  double b = c / ((1.0 - s) * (1.0 - s));
  return {a, b};
}

// Density of nu_t: (1/(pi t x)) arctan( sqrt(4 e^t x - (x+1)^2) / (x+1) ) on
// [a(t), b(t)], zero outside. The discriminant is clipped at zero within
// rounding tolerance; larger negative values inside the support are an error.
inline double equilibrium_density(double t, double x) {
  auto [a, b] = equilibrium_support(t);
  if (x < a || x > b) return 0.0;
  double disc = 4.0 * std::exp(t) * x - (x + 1.0) * (x + 1.0);
  if (disc < 0.0) {
    if (disc < -1e-9 * (1.0 + 4.0 * std::exp(t) * x))
      throw NumericalError("equilibrium_density: negative discriminant inside the support");
    disc = 0.0;
  }
  return std::atan(std::sqrt(disc) / (x + 1.0)) / (kPi * t * x);
}

// Distribution function of nu_t evaluated by cumulative quadrature, with the
// square-root substitution x = a + s^2 (resp. b - s^2) near the endpoints.
class EquilibriumCdf {
 public:
  explicit EquilibriumCdf(double t, int grid = 8192) : t_(t) {
    auto [a, b] = equilibrium_support(t);
    a_ = a;
    b_ = b;
    const double mid = 0.5 * (a + b);
    xs_.reserve(2 * grid + 1);
    // left half through x = a + s^2, right half through x = b - s^2
    double smax_l = std::sqrt(mid - a);
    for (int i = 0; i <= grid; ++i) {
      double s = smax_l * i / grid;
      xs_.push_back(a + s * s);
    }
    double smax_r = std::sqrt(b - mid);
    for (int i = grid - 1; i >= 0; --i) {
      double s = smax_r * i / grid;
      xs_.push_back(b - s * s);
    }
    cdf_.assign(xs_.size(), 0.0);
    for (std::size_t i = 1; i < xs_.size(); ++i) {
      double lo = xs_[i - 1], hi = xs_[i];
      double m = 0.5 * (lo + hi);
      double h = hi - lo;
      // Simpson on the fine grid
      cdf_[i] = cdf_[i - 1] + h / 6.0 *
                                  (equilibrium_density(t, lo) + 4.0 * equilibrium_density(t, m) +
                                   equilibrium_density(t, hi));
    }
  }

  double total_mass() const { return cdf_.back(); }
  double support_lo() const { return a_; }
  double support_hi() const { return b_; }

  double operator()(double x) const {
    if (x <= a_) return 0.0;
    if (x >= b_) return cdf_.back();
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    std::size_t i = it - xs_.begin();
    double w = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
    return cdf_[i - 1] + w * (cdf_[i] - cdf_[i - 1]);
  }

  // inverse distribution function (for u in (0,1), relative to total mass)
  double quantile(double u) const {
    double target = u * cdf_.back();
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), target);
    if (it == cdf_.begin()) return xs_.front();
    if (it == cdf_.end()) return xs_.back();
    std::size_t i = it - cdf_.begin();
    double w = (target - cdf_[i - 1]) / (cdf_[i] - cdf_[i - 1]);
    return xs_[i - 1] + w * (xs_[i] - xs_[i - 1]);
  }

  // mean of nu_t by quadrature on the same grid
  double mean() const {
    double acc = 0.0;
    for (std::size_t i = 1; i < xs_.size(); ++i) {
      double lo = xs_[i - 1], hi = xs_[i];
      double m = 0.5 * (lo + hi);
      acc += (hi - lo) / 6.0 *
             (lo * equilibrium_density(t_, lo) + 4.0 * m * equilibrium_density(t_, m) +
              hi * equilibrium_density(t_, hi));
    }
    return acc;
  }

 private:
  double t_, a_, b_;
  std::vector<double> xs_;
  std::vector<double> cdf_;
};

// Kolmogorov-Smirnov distance between the pooled empirical spectrum and the
// CDF of nu_t. When t_override is negative the common ensemble t is used.
inline double spectral_histogram_distance(const std::vector<SpectralSample>& samples,
                                          double t_override = -1.0) {
  if (samples.empty()) throw DomainError("spectral_histogram_distance: no samples");
  const double t0 = samples.front().params.t();
  std::vector<double> pooled;
  for (const auto& s : samples) {
    if (std::abs(s.params.t() - t0) > 1e-12 * (1.0 + t0))
      throw DomainError("spectral_histogram_distance: samples have mismatched ensemble t");
    pooled.insert(pooled.end(), s.eigenvalues.begin(), s.eigenvalues.end());
  }
  std::sort(pooled.begin(), pooled.end());
  EquilibriumCdf cdf(t_override > 0.0 ? t_override : t0);
  const double n = static_cast<double>(pooled.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    double f = cdf(pooled[i]) / cdf.total_mass();
    ks = std::max(ks, std::abs((i + 1) / n - f));
    ks = std::max(ks, std::abs(i / n - f));
  }
  return ks;
}

struct HistogramRow {
  double bin_left;
  double bin_right;
  double empirical_mass;
  double nu_t_mass;
};

inline std::vector<HistogramRow> spectral_histogram(const std::vector<SpectralSample>& samples,
                                                    int bins) {
  if (samples.empty() || bins < 1) throw DomainError("spectral_histogram: bad inputs");
  const double t0 = samples.front().params.t();
  std::vector<double> pooled;
  for (const auto& s : samples)
    pooled.insert(pooled.end(), s.eigenvalues.begin(), s.eigenvalues.end());
  EquilibriumCdf cdf(t0);
  double lo = std::min(cdf.support_lo(), *std::min_element(pooled.begin(), pooled.end()));
  double hi = std::max(cdf.support_hi(), *std::max_element(pooled.begin(), pooled.end()));
  std::vector<HistogramRow> rows(bins);
  const double w = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) {
    rows[b].bin_left = lo + b * w;
    rows[b].bin_right = lo + (b + 1) * w;
    rows[b].nu_t_mass = (cdf(rows[b].bin_right) - cdf(rows[b].bin_left)) / cdf.total_mass();
    rows[b].empirical_mass = 0.0;
  }
  for (double x : pooled) {
    int b = std::clamp(static_cast<int>((x - lo) / w), 0, bins - 1);
    rows[b].empirical_mass += 1.0 / pooled.size();
  }
  return rows;
}

}  // namespace manistat
