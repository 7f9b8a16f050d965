#pragma once

// Riemannian Gaussian distributions P(xbar, sigma) with density proportional
// to exp(-d^2(x, xbar) / 2 sigma^2): normalizing factors in closed form
// (Euclidean, hyperbolic, Hermitian positive-definite), by Monte Carlo over
// the flat coordinates of the symmetric space, and asymptotically for large
// N; the cumulant function psi(eta) = log Z(sigma) with its derivative and
// inverse for maximum-likelihood estimation; exact samplers; covariance
// coefficients; and the dual Theta distributions on the unitary group.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "manistat/barycentre.hpp"
#include "manistat/errors.hpp"
#include "manistat/manifold.hpp"
#include "manistat/rmt.hpp"
#include "manistat/rng.hpp"
#include "manistat/special.hpp"

namespace manistat {

struct GaussianParams {
  Point xbar;
  double sigma = 1.0;
  double eta() const { return -1.0 / (2.0 * sigma * sigma); }
};

inline double sigma_from_eta(double eta) {
  if (eta >= 0.0) throw DomainError("sigma_from_eta: eta < 0 required");
  return std::sqrt(-0.5 / eta);
}

// ---------------------------------------------------------------------------
// Closed-form normalizing factors (log-space first, linear on demand)
// ---------------------------------------------------------------------------

inline double log_z_euclidean(int n, double sigma) {
  if (n < 1 || sigma <= 0.0) throw DomainError("z_euclidean: n >= 1, sigma > 0");
  return 0.5 * n * std::log(2.0 * kPi * sigma * sigma);
}
inline double z_euclidean(int n, double sigma) { return std::exp(log_z_euclidean(n, sigma)); }

namespace detail {

// log(1 + a g(a)) with g(a) = Phi(a)/phi(a); the product a g(a) lies in
// (-1, 0] for a <= 0 and grows like a^2 for large a.
inline double log_one_plus_a_g(double a) {
  double lg = log_gauss_cdf_over_pdf(a);
  if (a > 0.0) return log_sum_exp({0.0, std::log(a) + lg});
  if (a == 0.0) return 0.0;
  return std::log1p(a * std::exp(lg));
}

struct HyperbolicZ {
  double log_z;
  double dlogz_dsigma;
};

// Z_c(sigma) = omega_{n-1} sigma (2c)^{1-n}
//              sum_k (-1)^k C(n-1,k) Phi(a_k)/phi(a_k),  a_k = (n-1-2k) sigma c
// together with the analytic sigma-derivative of its logarithm, which uses
// (Phi/phi)'(a) = 1 + a Phi(a)/phi(a).
inline HyperbolicZ log_z_hyperbolic_full(int n, double c, double sigma) {
  if (n < 1 || c <= 0.0 || sigma <= 0.0)
    throw DomainError("z_hyperbolic: n >= 1, c > 0, sigma > 0");
  std::vector<double> l0, l1;
  std::vector<int> s0, s1;
  for (int k = 0; k <= n - 1; ++k) {
    const double m = n - 1.0 - 2.0 * k;
    const double a = m * sigma * c;
    const int sgn = (k % 2 == 0) ? 1 : -1;
    l0.push_back(log_binomial(n - 1, k) + log_gauss_cdf_over_pdf(a));
    s0.push_back(sgn);
    if (m != 0.0) {
      l1.push_back(log_binomial(n - 1, k) + std::log(std::abs(m) * c) + log_one_plus_a_g(a));
      s1.push_back(sgn * (m > 0 ? 1 : -1));
    }
  }
  auto [ls0, sg0] = signed_log_sum_exp(l0, s0);
  if (sg0 <= 0 || !std::isfinite(ls0))
    throw NumericalError("z_hyperbolic: binomial sum lost all precision");
  HyperbolicZ out;
  out.log_z = log_sphere_area(n) + std::log(sigma) + (1.0 - n) * std::log(2.0 * c) + ls0;
  if (l1.empty()) {
    out.dlogz_dsigma = 1.0 / sigma;
  } else {
    auto [ls1, sg1] = signed_log_sum_exp(l1, s1);
    out.dlogz_dsigma = 1.0 / sigma + sg1 * std::exp(ls1 - ls0);
  }
  return out;
}

}  // namespace detail

inline double log_z_hyperbolic(int n, double c, double sigma) {
  return detail::log_z_hyperbolic_full(n, c, sigma).log_z;
}
inline double z_hyperbolic(int n, double c, double sigma) {
  return std::exp(log_z_hyperbolic(n, c, sigma));
}

// Z(sigma) on H(N): the Stieltjes-Wigert product formula
// Z = omega_2(N) 2^{-N^2} (2 pi sigma^2)^{N/2} exp[(N^3-N) sigma^2 / 6]
//     prod_{n<N} (1 - e^{-n sigma^2})^{N-n}.
inline double log_z_spd_hermitian(int N, double sigma) {
  if (N < 1 || sigma <= 0.0) throw DomainError("z_spd_hermitian: N >= 1, sigma > 0");
  const double s2 = sigma * sigma;
  double acc = log_omega2(N) - static_cast<double>(N) * N * std::log(2.0) +
               0.5 * N * std::log(2.0 * kPi * s2) +
               (std::pow(static_cast<double>(N), 3) - N) * s2 / 6.0;
  for (int k = 1; k < N; ++k) acc += (N - k) * std::log1p(-std::exp(-k * s2));
  return acc;
}
inline double z_spd_hermitian(int N, double sigma) {
  return std::exp(log_z_spd_hermitian(N, sigma));
}

// d/dsigma log Z on H(N), analytic.
inline double dlogz_dsigma_spd_hermitian(int N, double sigma) {
  const double s2 = sigma * sigma;
  double acc = N / sigma + (std::pow(static_cast<double>(N), 3) - N) * sigma / 3.0;
  for (int k = 1; k < N; ++k) acc += (N - k) * 2.0 * k * sigma / std::expm1(k * s2);
  return acc;
}

// ---------------------------------------------------------------------------
// Monte-Carlo normalizing factor over the flat coordinates
// ---------------------------------------------------------------------------

struct RootSystem {
  int N = 2;
  int beta = 2;  // 1, 2, or 4
};

struct McZEstimate {
  double estimate = 0.0;
  double std_err = 0.0;
  // false for beta in {1, 4}: the Weyl-chamber volume omega_beta(N) is not
  // known here, so the estimate excludes that prefactor.
  bool includes_weyl_normalization = true;
  long samples = 0;
};

// Z(sigma) = (omega_beta(N)/N!) (2 pi sigma^2/4)^{N/2}
//            E[ prod_{i<j} sinh^beta |a_i - a_j| ],  a ~ N(0, (sigma^2/4) I_N).
inline McZEstimate z_montecarlo(RootSystem rs, double sigma, long samples, std::uint64_t seed) {
  if (rs.beta != 1 && rs.beta != 2 && rs.beta != 4)
    throw UnsupportedError("z_montecarlo: beta must be 1, 2, or 4");
  if (rs.N < 1 || sigma <= 0.0) throw DomainError("z_montecarlo: N >= 1, sigma > 0");
  if (samples < 1000) throw DomainError("z_montecarlo: at least 10^3 samples required");
  Rng rng(seed);
  const double half_sigma = 0.5 * sigma;
  double mean = 0.0, m2 = 0.0;
  std::vector<double> a(rs.N);
  for (long s = 1; s <= samples; ++s) {
    for (int i = 0; i < rs.N; ++i) a[i] = half_sigma * rng.normal();
    double logprod = 0.0;
    for (int i = 0; i < rs.N; ++i)
      for (int j = i + 1; j < rs.N; ++j)
        logprod += rs.beta * std::log(std::abs(std::sinh(a[i] - a[j])));
    double w = rs.N > 1 ? std::exp(logprod) : 1.0;
    double delta = w - mean;
    mean += delta / s;
    m2 += delta * (w - mean);
  }
  double var = samples > 1 ? m2 / (samples - 1) : 0.0;
  double log_pref = 0.5 * rs.N * std::log(2.0 * kPi * sigma * sigma / 4.0) -
                    std::lgamma(rs.N + 1.0);
  McZEstimate out;
  out.includes_weyl_normalization = (rs.beta == 2);
  if (rs.beta == 2) log_pref += log_omega2(rs.N);
  out.estimate = std::exp(log_pref) * mean;
  out.std_err = std::exp(log_pref) * std::sqrt(var / samples);
  out.samples = samples;
  return out;
}

// ---------------------------------------------------------------------------
// Large-N asymptotics
// ---------------------------------------------------------------------------

// Limit value of (1/N^2) sum_{n<N} (N-n) log(1 - e^{-n t / N}), the integral
// int_0^1 (1-x) log(1 - e^{-t x}) dx. Expanding the logarithm termwise with
// int_0^1 (1-x) e^{-s x} dx = (s - 1 + e^{-s}) / s^2 gives
//   -(Li3(e^-t) - zeta(3)) / t^2 - zeta(2) / t.
inline double log_q_product_limit(double t) {
  const double zeta2 = kPi * kPi / 6.0;
  return -(trilog(std::exp(-t)) - zeta3()) / (t * t) - zeta2 / t;
}

// Right-hand side of the large-N equivalence
// (1/N^2) log Z ~ -(1/2) log(2N/pi) + 3/4 + t/6 + lim of the q-product term.
inline double z_asymptotic(int N, double t) {
  if (t <= 0.0) throw DomainError("z_asymptotic: t > 0 required");
  return -0.5 * std::log(2.0 * N / kPi) + 0.75 + t / 6.0 + log_q_product_limit(t);
}

// The omega_2-normalized limit: lim (1/N^2) log[Z/omega_2(N)].
inline double asymptotic_cgf(double t) {
  if (t <= 0.0) throw DomainError("asymptotic_cgf: t > 0 required");
  return -0.5 * std::log(2.0) + 0.75 + t / 6.0 + log_q_product_limit(t);
}

// ---------------------------------------------------------------------------
// psi tables: Schumaker shape-preserving quadratic spline in (eta, psi)
// ---------------------------------------------------------------------------

namespace detail {

// C^1 quadratic spline interpolation that preserves monotonicity and
// convexity of convex increasing data; one interior knot is inserted per
// interval where a single quadratic cannot match both endpoint slopes.
class ConvexSpline {
 public:
  ConvexSpline() = default;
  ConvexSpline(std::vector<double> x, std::vector<double> y) {
    if (x.size() != y.size() || x.size() < 3)
      throw DomainError("ConvexSpline: need at least 3 nodes");
    const std::size_t n = x.size() - 1;
    // convexify noisy data: pool-adjacent-violators on the divided
    // differences (h-weighted), then rebuild the ordinates
    std::vector<double> h(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = x[i + 1] - x[i];
      if (h[i] <= 0.0) throw DomainError("ConvexSpline: abscissae must increase");
      d[i] = (y[i + 1] - y[i]) / h[i];
    }
    pav_increasing(d, h);
    for (std::size_t i = 0; i < n; ++i) y[i + 1] = y[i] + d[i] * h[i];
    // interleaving slopes m_i <= d_i <= m_{i+1}
    std::vector<double> m(n + 1);
    for (std::size_t i = 1; i < n; ++i) m[i] = 0.5 * (d[i - 1] + d[i]);
    m[0] = std::max(d[0] - 0.5 * (m[1] - d[0]), 0.25 * d[0]);
    m[0] = std::min(m[0], d[0]);
    m[n] = std::max(d[n - 1] + 0.5 * (d[n - 1] - m[n - 1]), d[n - 1]);
    build(x, y, m, d);
    x_min_ = x.front();
    x_max_ = x.back();
  }

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }

  double value(double xq) const {
    const Piece& p = locate(xq);
    double t = xq - p.x0;
    return p.a + p.b * t + 0.5 * p.c * t * t;
  }

  double derivative(double xq) const {
    const Piece& p = locate(xq);
    return p.b + p.c * (xq - p.x0);
  }

 private:
  struct Piece {
    double x0, x1;
    double a, b, c;  // a + b t + c t^2 / 2
  };
  std::vector<Piece> pieces_;
  double x_min_ = 0.0, x_max_ = 0.0;

  static void pav_increasing(std::vector<double>& v, const std::vector<double>& w) {
    struct Block {
      double val, weight;
      std::size_t len;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < v.size(); ++i) {
      blocks.push_back({v[i], w[i], 1});
      while (blocks.size() > 1 && blocks[blocks.size() - 2].val >= blocks.back().val) {
        Block b = blocks.back();
        blocks.pop_back();
        Block& a = blocks.back();
        double tw = a.weight + b.weight;
        a.val = (a.val * a.weight + b.val * b.weight) / tw;
        a.weight = tw;
        a.len += b.len;
      }
    }
    std::size_t k = 0;
    for (const Block& b : blocks)
      for (std::size_t i = 0; i < b.len; ++i) v[k++] = b.val;
  }

  void build(const std::vector<double>& x, const std::vector<double>& y,
             const std::vector<double>& m, const std::vector<double>& d) {
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      double h = x[i + 1] - x[i];
      if (std::abs(m[i] + m[i + 1] - 2.0 * d[i]) <= 1e-14 * std::abs(d[i])) {
        pieces_.push_back({x[i], x[i + 1], y[i], m[i], (m[i + 1] - m[i]) / h});
        continue;
      }
      // knot insertion (Schumaker): split at xi and join two quadratics
      double a = m[i] - d[i], b = m[i + 1] - d[i];
      double xi;
      if (a * b >= 0.0)
        xi = 0.5 * (x[i] + x[i + 1]);
      else if (std::abs(a) > std::abs(b))
        xi = x[i + 1] + a * h / (m[i + 1] - m[i]);
      else
        xi = x[i] + b * h / (m[i + 1] - m[i]);
      xi = std::clamp(xi, x[i] + 1e-12 * h, x[i + 1] - 1e-12 * h);
      double alpha = xi - x[i], beta = x[i + 1] - xi;
      double sbar = (2.0 * (y[i + 1] - y[i]) - (alpha * m[i] + beta * m[i + 1])) / h;
      double y_xi = y[i] + m[i] * alpha + 0.5 * (sbar - m[i]) / alpha * alpha * alpha;
      pieces_.push_back({x[i], xi, y[i], m[i], (sbar - m[i]) / alpha});
      pieces_.push_back({xi, x[i + 1], y_xi, sbar, (m[i + 1] - sbar) / beta});
    }
  }

  const Piece& locate(double xq) const {
    if (xq < x_min_ - 1e-12 || xq > x_max_ + 1e-12)
      throw ExtrapolationError("ConvexSpline: query outside the covered range");
    std::size_t lo = 0, hi = pieces_.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (xq > pieces_[mid].x1)
        lo = mid + 1;
      else
        hi = mid;
    }
    return pieces_[lo];
  }
};

}  // namespace detail

struct PsiTable {
  ManifoldDescriptor manifold;
  std::vector<double> sigma_nodes;  // ascending
  std::vector<double> log_z;        // psi at eta(sigma_node)
};

// Tabulates log Z on a geometric sigma grid (64 nodes per decade by default).
inline PsiTable build_psi_table(const ManifoldDescriptor& m, double sigma_lo, double sigma_hi,
                                const std::function<double(double)>& log_z_fn,
                                int nodes_per_decade = 64) {
  if (sigma_lo <= 0.0 || sigma_hi <= sigma_lo)
    throw DomainError("build_psi_table: need 0 < sigma_lo < sigma_hi");
  PsiTable t;
  t.manifold = m;
  const double decades = std::log10(sigma_hi / sigma_lo);
  const int n = std::max(8, static_cast<int>(std::ceil(decades * nodes_per_decade)));
  for (int i = 0; i <= n; ++i) {
    double s = sigma_lo * std::pow(sigma_hi / sigma_lo, static_cast<double>(i) / n);
    t.sigma_nodes.push_back(s);
    t.log_z.push_back(log_z_fn(s));
  }
  return t;
}

// Dispenses psi(eta) = log Z(sigma), its derivative, and the inverse of the
// derivative, backed either by a closed form or by an interpolation table.
class NormalizingFactor {
 public:
  static NormalizingFactor closed_form(const ManifoldDescriptor& m) {
    if (!m.is_hadamard())
      throw ConfigError(std::string("no closed-form normalizing factor for ") +
                        kind_name(m.kind));
    NormalizingFactor nf;
    nf.manifold_ = m;
    return nf;
  }

  static NormalizingFactor from_table(PsiTable table) {
    NormalizingFactor nf;
    nf.manifold_ = table.manifold;
    std::vector<double> etas;
    for (double s : table.sigma_nodes) etas.push_back(-0.5 / (s * s));
    nf.spline_ = detail::ConvexSpline(etas, table.log_z);
    nf.table_ = std::move(table);
    return nf;
  }

  const ManifoldDescriptor& manifold() const { return manifold_; }
  bool table_backed() const { return table_.has_value(); }
  const PsiTable& table() const { return *table_; }

  double log_z(double sigma) const {
    if (!table_) return closed_log_z(sigma);
    return spline_.value(-0.5 / (sigma * sigma));
  }

  double psi(double eta) const { return log_z(sigma_from_eta(eta)); }

  double psi_prime(double eta) const {
    if (table_) return spline_.derivative(eta);
    double sigma = sigma_from_eta(eta);
    return sigma * sigma * sigma * closed_dlogz_dsigma(sigma);
  }

  // Solves psi'(eta) = dispersion by bisection on the monotone psi'.
  double psi_prime_inverse(double dispersion) const {
    if (dispersion <= 0.0) throw DomainError("psi_prime_inverse: dispersion must be positive");
    double lo, hi;
    if (table_) {
      lo = spline_.x_min();
      hi = spline_.x_max();
      if (dispersion < psi_prime(lo) || dispersion > psi_prime(hi))
        throw ExtrapolationError("psi_prime_inverse: dispersion outside the table range");
    } else {
      double sig = 1.0;
      for (int i = 0; i < 400 && psi_prime(-0.5 / (sig * sig)) < dispersion; ++i) sig *= 2.0;
      hi = -0.5 / (sig * sig);
      sig = 1.0;
      for (int i = 0; i < 400 && psi_prime(-0.5 / (sig * sig)) > dispersion; ++i) sig *= 0.5;
      lo = -0.5 / (sig * sig);
      if (psi_prime(lo) > dispersion || psi_prime(hi) < dispersion)
        throw NumericalError("psi_prime_inverse: failed to bracket the dispersion");
    }
    for (int it = 0; it < 80; ++it) {
      double mid = 0.5 * (lo + hi);
      (psi_prime(mid) < dispersion ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  ManifoldDescriptor manifold_;
  std::optional<PsiTable> table_;
  detail::ConvexSpline spline_;

  double closed_log_z(double sigma) const {
    switch (manifold_.kind) {
      case ManifoldKind::Euclidean: return log_z_euclidean(manifold_.n, sigma);
      case ManifoldKind::Hyperbolic: return log_z_hyperbolic(manifold_.n, manifold_.c, sigma);
      case ManifoldKind::SpdHermitian: return log_z_spd_hermitian(manifold_.n, sigma);
      default: throw ConfigError("normalizing factor unavailable");
    }
  }

  double closed_dlogz_dsigma(double sigma) const {
    switch (manifold_.kind) {
      case ManifoldKind::Euclidean: return manifold_.n / sigma;
      case ManifoldKind::Hyperbolic:
        return detail::log_z_hyperbolic_full(manifold_.n, manifold_.c, sigma).dlogz_dsigma;
      case ManifoldKind::SpdHermitian:
        return dlogz_dsigma_spd_hermitian(manifold_.n, sigma);
      default: throw ConfigError("normalizing factor unavailable");
    }
  }
};

inline std::pair<double, double> psi_and_derivative(const NormalizingFactor& nf, double eta) {
  return {nf.psi(eta), nf.psi_prime(eta)};
}

// log density of P(xbar, sigma) at x: -psi(eta) - d^2(x, xbar) / (2 sigma^2).
inline double log_density(const GaussianParams& p, const Point& x,
                          const NormalizingFactor& nf) {
  double d = dist(p.xbar, x);
  return -nf.psi(p.eta()) - d * d / (2.0 * p.sigma * p.sigma);
}

// ---------------------------------------------------------------------------
// Maximum likelihood
// ---------------------------------------------------------------------------

// xhat = empirical barycentre, etahat = (psi')^{-1}(mean squared distance).
inline GaussianParams mle(const std::vector<Point>& samples, const NormalizingFactor& nf,
                          GradientDescentConfig cfg = {}) {
  if (samples.empty()) throw DomainError("mle: at least one sample required");
  Point xhat = empirical_barycentre(samples, cfg);
  double disp = 0.0;
  for (const Point& s : samples) {
    double d = dist(s, xhat);
    disp += d * d;
  }
  disp /= samples.size();
  if (disp <= 0.0)
    throw DomainError("mle: degenerate dispersion, all samples coincide");
  double eta = nf.psi_prime_inverse(disp);
  return {xhat, sigma_from_eta(eta)};
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

struct SpdSamplerOptions {
  double proposal_scale_factor = 0.25;  // proposal stddev = factor * sigma
  int burn_in_sweeps = 1000;
  int thinning = 10;
};

// Draws from P(xbar, sigma) on Euclidean space, hyperbolic space (radial
// rejection against a binomially expanded Gaussian-mixture envelope), and
// H(N) (Metropolis chain over the flat eigen-coordinates, Haar rotation).
class GaussianSampler {
 public:
  explicit GaussianSampler(GaussianParams params, SpdSamplerOptions spd_opts = {})
      : p_(std::move(params)), spd_opts_(spd_opts) {
    const auto& m = p_.xbar.manifold;
    if (p_.sigma <= 0.0) throw DomainError("GaussianSampler: sigma > 0 required");
    switch (m.kind) {
      case ManifoldKind::Euclidean: break;
      case ManifoldKind::Hyperbolic: {
        basis_ = tangent_basis(p_.xbar);
        prepare_hyperbolic_envelope();
        break;
      }
      case ManifoldKind::SpdHermitian: {
        auto f = detail::spd_factors(p_.xbar.cmat(), "GaussianSampler");
        sqrt_xbar_ = f.sqrt;
        a_state_ = Eigen::VectorXd::Zero(m.n);
        break;
      }
      default:
        throw UnsupportedError("GaussianSampler: Euclidean, hyperbolic, or H(N) only");
    }
  }

  const GaussianParams& params() const { return p_; }

  Point sample(Rng& rng) {
    switch (p_.xbar.manifold.kind) {
      case ManifoldKind::Euclidean: {
        Eigen::VectorXd x = p_.xbar.vec();
        for (int i = 0; i < x.size(); ++i) x(i) += p_.sigma * rng.normal();
        return {p_.xbar.manifold, x};
      }
      case ManifoldKind::Hyperbolic: {
        double r = sample_radius(rng);
        Tangent v = uniform_direction(rng, r);
        return exp_map(p_.xbar, v);
      }
      case ManifoldKind::SpdHermitian: {
        Eigen::VectorXd a = sample_flat_coordinates(rng);
        Eigen::MatrixXcd s = haar_unitary(p_.xbar.manifold.n, rng);
        Eigen::VectorXd ev = (2.0 * a).array().exp();
        Eigen::MatrixXcd y = s * ev.cast<std::complex<double>>().asDiagonal() * s.adjoint();
        Eigen::MatrixXcd x = sqrt_xbar_ * detail::hermitize(y) * sqrt_xbar_;
        return {p_.xbar.manifold, detail::hermitize(x)};
      }
      default: throw UnsupportedError("GaussianSampler: unsupported manifold");
    }
  }

  // Flat coordinates a of the H(N) draw; the matrix eigenvalues are e^{2 a_i}.
  Eigen::VectorXd sample_flat_coordinates(Rng& rng) {
    if (p_.xbar.manifold.kind != ManifoldKind::SpdHermitian)
      throw UnsupportedError("sample_flat_coordinates: H(N) sampler only");
    if (!burned_in_) {
      for (int s = 0; s < spd_opts_.burn_in_sweeps; ++s) metropolis_sweep(rng);
      burned_in_ = true;
    }
    for (int s = 0; s < spd_opts_.thinning; ++s) metropolis_sweep(rng);
    return a_state_;
  }

 private:
  GaussianParams p_;
  SpdSamplerOptions spd_opts_;
  std::vector<Tangent> basis_;
  std::vector<double> env_logw_;  // envelope component log-weights
  std::vector<double> env_mean_;  // component means
  Eigen::MatrixXcd sqrt_xbar_;
  Eigen::VectorXd a_state_;
  bool burned_in_ = false;

  void prepare_hyperbolic_envelope() {
    const int n = p_.xbar.manifold.n;
    const double c = p_.xbar.manifold.c;
    for (int k = 0; k <= n - 1; ++k) {
      double mk = n - 1.0 - 2.0 * k;
      double ak = mk * p_.sigma * c;
      env_logw_.push_back(log_binomial(n - 1, k) + log_gauss_cdf_over_pdf(ak));
      env_mean_.push_back(mk * p_.sigma * p_.sigma * c);
    }
    double mx = *std::max_element(env_logw_.begin(), env_logw_.end());
    double tot = 0.0;
    for (double& w : env_logw_) {
      w = std::exp(w - mx);
      tot += w;
    }
    for (double& w : env_logw_) w /= tot;  // now linear probabilities
  }

  // radial density on (0, inf) proportional to e^{-r^2/2 sigma^2} sinh^{n-1}(c r).
  // For small sigma c the Gaussian-mixture envelope accepts at rate
  // ~(sigma c)^{n-1}, so that regime instead bounds sinh(x) <= x e^{x^2/6}
  // and proposes from the chi law the bound induces.
  double sample_radius(Rng& rng) {
    const int n = p_.xbar.manifold.n;
    const double c = p_.xbar.manifold.c;
    const double sc2 = (n - 1) * c * c * p_.sigma * p_.sigma;
    if (n > 1 && sc2 < 1.5) return sample_radius_chi(rng);
    for (long attempt = 0; attempt < 10000; ++attempt) {
      double u = rng.uniform();
      std::size_t k = 0;
      for (; k + 1 < env_logw_.size() && u > env_logw_[k]; ++k) u -= env_logw_[k];
      double lo = -env_mean_[k] / p_.sigma;
      double r = env_mean_[k] + p_.sigma * truncated_standard_normal(rng, lo);
      double acc = n > 1 ? std::pow(std::tanh(c * r), n - 1.0) : 1.0;
      if (rng.uniform() < acc) return r;
    }
    throw NumericalError(
        "GaussianSampler: envelope acceptance below 1e-3, sigma * c too large");
  }

  double sample_radius_chi(Rng& rng) {
    const int n = p_.xbar.manifold.n;
    const double c = p_.xbar.manifold.c;
    // envelope r^{n-1} exp(-r^2 / 2 s'^2), 1/s'^2 = 1/sigma^2 - (n-1) c^2 / 3
    const double sprime =
        1.0 / std::sqrt(1.0 / (p_.sigma * p_.sigma) - (n - 1) * c * c / 3.0);
    for (long attempt = 0; attempt < 10000; ++attempt) {
      double r2 = 0.0;
      for (int i = 0; i < n; ++i) {
        double z = rng.normal();
        r2 += z * z;
      }
      double r = sprime * std::sqrt(r2);
      double x = c * r;
      // acceptance [sinh(x) / (x exp(x^2/6))]^{n-1} in (0, 1]
      double log_acc =
          x < 1e-5 ? 0.0 : (n - 1) * (std::log(std::sinh(x) / x) - x * x / 6.0);
      if (std::log(rng.uniform()) < log_acc) return r;
    }
    throw NumericalError("GaussianSampler: chi-envelope acceptance collapsed");
  }

  Tangent uniform_direction(Rng& rng, double r) {
    Eigen::VectorXd theta(basis_.size());
    for (int i = 0; i < theta.size(); ++i) theta(i) = rng.normal();
    theta.normalize();
    Tangent v = zero_tangent(p_.xbar);
    for (std::size_t i = 0; i < basis_.size(); ++i) v = add(v, scaled(basis_[i], r * theta(i)));
    return v;
  }

  // One Metropolis sweep over the flat coordinates with per-coordinate
  // Gaussian proposals; target exp(-2 |a|^2/sigma^2) prod sinh^2 |a_i - a_j|.
  void metropolis_sweep(Rng& rng) {
    const int N = static_cast<int>(a_state_.size());
    const double prop = spd_opts_.proposal_scale_factor * p_.sigma;
    for (int i = 0; i < N; ++i) {
      double old = a_state_(i);
      double cand = old + prop * rng.normal();
      double dlog = -2.0 * (cand * cand - old * old) / (p_.sigma * p_.sigma);
      bool reject = false;
      for (int j = 0; j < N && !reject; ++j) {
        if (j == i) continue;
        double snew = std::abs(std::sinh(cand - a_state_(j)));
        double sold = std::abs(std::sinh(old - a_state_(j)));
        if (snew == 0.0) {
          reject = true;
          break;
        }
        dlog += 2.0 * (std::log(snew) - std::log(sold));
      }
      if (!reject && (dlog >= 0.0 || rng.uniform() < std::exp(dlog))) a_state_(i) = cand;
    }
  }
};

inline Point sample_gaussian(const GaussianParams& p, Rng& rng) {
  GaussianSampler s(p);
  return s.sample(rng);
}

// Spectral samples of the Gaussian ensemble on H(N) at xbar = I.
inline std::vector<SpectralSample> sample_spectra(int N, double sigma, int matrices,
                                                  std::uint64_t seed,
                                                  SpdSamplerOptions opts = {}) {
  GaussianParams p{origin(ManifoldDescriptor::spd_hermitian(N)), sigma};
  GaussianSampler sampler(p, opts);
  Rng rng(seed);
  std::vector<SpectralSample> out;
  out.reserve(matrices);
  for (int k = 0; k < matrices; ++k) {
    Eigen::VectorXd a = sampler.sample_flat_coordinates(rng);
    SpectralSample s;
    s.params = {N, sigma};
    for (int i = 0; i < N; ++i) s.eigenvalues.push_back(std::exp(2.0 * a(i)));
    std::sort(s.eigenvalues.begin(), s.eigenvalues.end());
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Covariance coefficients on H(N)
// ---------------------------------------------------------------------------

// The covariance tensor of P(xbar, sigma) on H(N) splits along the de Rham
// decomposition into c1 tr^2(xbar^-1 u) / N-part and c2 times the traceless
// part: c1 = psi_1'(eta) = sigma^2, c2 = psi_2'(eta) / (N^2 - 1).
inline std::pair<double, double> covariance_coefficients(int N, double sigma) {
  if (N < 2) throw DomainError("covariance_coefficients: N >= 2 required");
  double psi_prime_full =
      sigma * sigma * sigma * dlogz_dsigma_spd_hermitian(N, sigma);
  double c1 = sigma * sigma;
  double c2 = (psi_prime_full - c1) / (static_cast<double>(N) * N - 1.0);
  return {c1, c2};
}

// ---------------------------------------------------------------------------
// Theta distributions on U(N)
// ---------------------------------------------------------------------------

struct ThetaParams {
  Point xbar;  // unitary
  double sigma = 1.0;
  double truncation_eps = 1e-15;
  double q() const { return std::exp(-sigma * sigma); }
};

// Jacobi theta value theta(e^{i phi} | s) = sum_m exp(-m^2 s + 2 m i phi),
// truncated when the next term falls below eps times the partial sum.
inline double jacobi_theta(double phi, double s, double eps = 1e-15) {
  if (s <= 0.0) throw DomainError("jacobi_theta: series parameter must satisfy q < 1");
  double acc = 1.0;
  for (int m = 1; m < 100000; ++m) {
    double mag = 2.0 * std::exp(-static_cast<double>(m) * m * s);
    acc += mag * std::cos(2.0 * m * phi);
    if (mag < eps * std::abs(acc)) break;
  }
  return acc;
}

// log f*(x | xbar, sigma) = sum_i log[(2 pi sigma^2)^{1/2} theta(e^{i th_i} | sigma^2/2)]
// over the eigen-phases th_i of x xbar^dag.
inline double theta_log_density_unnorm(const ThetaParams& tp, const Point& x) {
  if (x.manifold.kind != ManifoldKind::Unitary || tp.xbar.manifold != x.manifold)
    throw DomainError("theta_log_density: unitary points required");
  Eigen::MatrixXcd rel = x.cmat() * tp.xbar.cmat().adjoint();
  Eigen::ComplexSchur<Eigen::MatrixXcd> schur(rel);
  double acc = 0.0;
  const double s2 = tp.sigma * tp.sigma;
  for (int i = 0; i < rel.rows(); ++i) {
    double phase = std::arg(schur.matrixT()(i, i));
    acc += 0.5 * std::log(2.0 * kPi * s2) +
           std::log(jacobi_theta(phase, 0.5 * s2, tp.truncation_eps));
  }
  return acc;
}

// Z_{M*}(sigma) = omega_2(N) 2^{-N^2} (2 pi sigma^2)^{N/2}
//                 prod_{n<N} (1 - e^{-n sigma^2})^{N-n}.
inline double log_z_theta_unitary(int N, double sigma) {
  if (N < 1 || sigma <= 0.0) throw DomainError("z_theta: N >= 1, sigma > 0");
  const double s2 = sigma * sigma;
  double acc = log_omega2(N) - static_cast<double>(N) * N * std::log(2.0) +
               0.5 * N * std::log(2.0 * kPi * s2);
  for (int k = 1; k < N; ++k) acc += (N - k) * std::log1p(-std::exp(-k * s2));
  return acc;
}
inline double z_theta(int N, double sigma) { return std::exp(log_z_theta_unitary(N, sigma)); }

inline double theta_log_density(const ThetaParams& tp, const Point& x) {
  return theta_log_density_unnorm(tp, x) - log_z_theta_unitary(tp.xbar.manifold.n, tp.sigma);
}

// Z_M / Z_{M*} = exp[(N^3 - N) sigma^2 / 6]; evaluated through the two log
// normalizing factors.
inline double log_duality_ratio(int N, double sigma) {
  return log_z_spd_hermitian(N, sigma) - log_z_theta_unitary(N, sigma);
}
inline double duality_ratio(int N, double sigma) {
  return std::exp(log_duality_ratio(N, sigma));
}

}  // namespace manistat
