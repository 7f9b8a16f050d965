#pragma once

// Bayesian estimation with a Gaussian likelihood and a Gaussian prior on a
// symmetric space of the non-compact type: the MAP in closed form (a geodesic
// convex combination), posterior sampling by an isotropic Metropolis-Hastings
// chain with Gaussian proposals, the MMS through the empirical barycentre of
// the chain, and the Kantorovich upper bound on the distance between the two
// estimators.

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "manistat/barycentre.hpp"
#include "manistat/errors.hpp"
#include "manistat/gaussian.hpp"
#include "manistat/manifold.hpp"
#include "manistat/rng.hpp"

namespace manistat {

struct PosteriorSpec {
  Point y;       // observation
  Point z;       // prior barycentre
  double sigma;  // likelihood dispersion
  double tau;    // prior dispersion

  double rho() const { return tau * tau / (sigma * sigma + tau * tau); }

  void validate() const {
    if (sigma <= 0.0 || tau <= 0.0) throw DomainError("PosteriorSpec: sigma, tau > 0");
    detail::require_same_manifold(y, z, "PosteriorSpec");
  }
};

// x_MAP = z #_rho y with rho = tau^2 / (sigma^2 + tau^2).
inline Point map_estimate(const PosteriorSpec& spec) {
  spec.validate();
  return geodesic_combine(spec.z, spec.y, spec.rho());
}

// log pi(x) up to the normalizing factor:
// -d^2(y, x)/(2 sigma^2) - d^2(x, z)/(2 tau^2).
inline double posterior_log_density_unnorm(const PosteriorSpec& spec, const Point& x) {
  double dy = dist(spec.y, x);
  double dz = dist(spec.z, x);
  return -dy * dy / (2.0 * spec.sigma * spec.sigma) - dz * dz / (2.0 * spec.tau * spec.tau);
}

struct MhConfig {
  double proposal_tau_q = 0.0;  // 0 selects max(sigma, tau)/2
  long n_samples = 10000;
  long burn_in = -1;  // negative selects 10% of n_samples
  std::uint64_t seed = 0;

  long effective_burn_in() const { return burn_in >= 0 ? burn_in : n_samples / 10; }

  void validate() const {
    if (n_samples <= effective_burn_in())
      throw DomainError("MhConfig: n_samples > burn_in >= 0 required");
  }
};

struct ChainTrace {
  std::vector<Point> states;  // post burn-in
  double accept_rate = 0.0;
  std::uint64_t seed = 0;
  bool stuck_warning = false;  // 10^4 consecutive rejections observed
};

using LogDensityFn = std::function<double(const Point&)>;
using ProposalFn = std::function<Point(Rng&, const Point&)>;

// Isotropic Metropolis-Hastings: proposals q(x, y) = q(d(x, y)) are drawn by
// `proposal` (symmetric by isotropy, so the acceptance ratio needs no
// Hastings correction), acceptance alpha = min{1, pi(y)/pi(x)}.
inline ChainTrace mh_sample(const LogDensityFn& log_density, const Point& x0,
                            const MhConfig& cfg, const ProposalFn& proposal) {
  cfg.validate();
  Rng rng(cfg.seed);
  Point x = x0;
  double lx = log_density(x);
  if (!std::isfinite(lx)) throw DomainError("mh_sample: log density not finite at x0");
  ChainTrace trace;
  trace.seed = cfg.seed;
  trace.states.reserve(cfg.n_samples - cfg.effective_burn_in());
  long accepted = 0;
  long consecutive_rejections = 0;
  for (long s = 0; s < cfg.n_samples; ++s) {
    Point cand = proposal(rng, x);
    double lc = log_density(cand);
    double log_alpha = lc - lx;
    if (log_alpha >= 0.0 || std::log(rng.uniform()) < log_alpha) {
      x = std::move(cand);
      lx = lc;
      ++accepted;
      consecutive_rejections = 0;
    } else if (++consecutive_rejections >= 10000) {
      trace.stuck_warning = true;
    }
    if (s >= cfg.effective_burn_in()) trace.states.push_back(x);
  }
  trace.accept_rate = static_cast<double>(accepted) / cfg.n_samples;
  return trace;
}

// Gaussian proposal kernel of dispersion tau_q centred at the current state.
inline ProposalFn gaussian_proposal(double tau_q) {
  if (tau_q <= 0.0) throw DomainError("gaussian_proposal: tau_q > 0 required");
  return [tau_q](Rng& rng, const Point& x) {
    GaussianSampler sampler({x, tau_q});
    return sampler.sample(rng);
  };
}

// Samples the posterior of `spec` starting from the MAP.
inline ChainTrace sample_posterior(const PosteriorSpec& spec, MhConfig cfg) {
  spec.validate();
  if (cfg.proposal_tau_q <= 0.0) cfg.proposal_tau_q = 0.5 * std::max(spec.sigma, spec.tau);
  Point start = map_estimate(spec);
  auto log_density = [&spec](const Point& x) {
    return posterior_log_density_unnorm(spec, x);
  };
  return mh_sample(log_density, start, cfg, gaussian_proposal(cfg.proposal_tau_q));
}

// MMS estimate: the empirical barycentre of the chain states.
inline Point mms_estimate(const ChainTrace& trace, GradientDescentConfig cfg = {}) {
  if (trace.states.empty()) throw DomainError("mms_estimate: empty trace");
  return empirical_barycentre(trace.states, cfg);
}

// Empirical first-order moment m1_bar = (1/N) sum d(map_point, x_n); by the
// contraction property d(x_MMS, x_MAP) <= W(pi, delta_MAP) ~= m1_bar.
inline double wasserstein_bound(const ChainTrace& trace, const Point& map_point) {
  if (trace.states.empty()) throw DomainError("wasserstein_bound: empty trace");
  double acc = 0.0;
  for (const Point& x : trace.states) acc += dist(map_point, x);
  return acc / trace.states.size();
}

// One row of the reproduction tables: hyperbolic space of curvature -1 and
// dimension n_dim, prior barycentre at the origin, observation at geodesic
// distance `separation` along the first frame direction.
struct BayesTableRow {
  int n_dim;
  double sigma2;
  double tau2;
  double m1_bar;
  double d_mms_map;
  std::uint64_t seed;
  long n_samples;
};

inline BayesTableRow bayes_table_row(int n_dim, double sigma2, double tau2, long n_samples,
                                     std::uint64_t seed, double separation = 1.0,
                                     double proposal_tau_q = 0.0) {
  auto m = ManifoldDescriptor::hyperbolic(n_dim, 1.0);
  Point z = origin(m);
  Tangent dir = scaled(tangent_basis(z).front(), separation);
  Point y = exp_map(z, dir);
  PosteriorSpec spec{y, z, std::sqrt(sigma2), std::sqrt(tau2)};
  MhConfig cfg;
  cfg.n_samples = n_samples;
  cfg.seed = seed;
  cfg.proposal_tau_q = proposal_tau_q;
  ChainTrace trace = sample_posterior(spec, cfg);
  Point map = map_estimate(spec);
  Point mms = mms_estimate(trace);
  return {n_dim,  sigma2, tau2, wasserstein_bound(trace, map), dist(mms, map),
          seed,   n_samples};
}

}  // namespace manistat
