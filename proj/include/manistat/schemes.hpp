#pragma once

// Stochastic approximation on manifolds: exponential and retraction update
// schemes with their non-asymptotic bound statistics, random sampling of
// iterates, mixture-estimation stochastic gradient, streaming PCA on the
// Grassmannian, the Riemannian AR(1) model, the Lyapunov equation of the
// small-step diffusion limit, and the stationary-covariance check of the
// central limit theorem.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "manistat/barycentre.hpp"
#include "manistat/errors.hpp"
#include "manistat/gaussian.hpp"
#include "manistat/manifold.hpp"
#include "manistat/rng.hpp"
#include "manistat/special.hpp"

namespace manistat {

// ---------------------------------------------------------------------------
// Step schedules
// ---------------------------------------------------------------------------

class StepSchedule {
 public:
  static StepSchedule constant(double mu) {
    if (mu <= 0.0) throw DomainError("StepSchedule: mu > 0 required");
    StepSchedule s;
    s.constant_ = mu;
    return s;
  }
  static StepSchedule sequence(std::function<double(long)> mu_of_t) {
    StepSchedule s;
    s.fn_ = std::move(mu_of_t);
    return s;
  }

  // mu_t for t >= 1 (the step applied in the update from x_{t-1} to x_t)
  double at(long t) const {
    double mu = fn_ ? fn_(t) : constant_;
    if (!(mu > 0.0)) throw DomainError("StepSchedule: steps must stay positive");
    return mu;
  }

  bool is_constant() const { return !fn_; }

 private:
  double constant_ = 0.0;
  std::function<double(long)> fn_;
};

// {mu^p}_t = sum_{s=1..t} mu_{s+1}^{p+1} / sum_{s=1..t} mu_{s+1}.
inline double weighted_step_moment(const StepSchedule& sched, long t, int p) {
  if (t < 1) throw DomainError("weighted_step_moment: t >= 1 required");
  long double num = 0.0L, den = 0.0L;
  for (long s = 1; s <= t; ++s) {
    long double mu = sched.at(s + 1);
    num += std::pow(mu, static_cast<long double>(p + 1));
    den += mu;
  }
  return static_cast<double>(num / den);
}

// ---------------------------------------------------------------------------
// Random fields and scheme runners
// ---------------------------------------------------------------------------

template <class State, class Tan>
struct RandomField {
  std::function<Tan(Rng&, const State&)> sample;
  std::function<Tan(const State&)> mean;  // optional, enables diagnostics
};

using PointField = RandomField<Point, Tangent>;
using MixtureState = std::vector<Point>;
using MixtureTangent = std::vector<Tangent>;
using MixtureField = RandomField<MixtureState, MixtureTangent>;

namespace detail {

inline double field_norm_sq(const Tangent& t) { return inner(t, t); }
inline double field_norm_sq(const MixtureTangent& t) {
  double acc = 0.0;
  for (const Tangent& c : t) acc += inner(c, c);
  return acc;
}

inline Point exp_update(const Point& x, const Tangent& v, double mu) {
  return exp_map(x, scaled(v, mu));
}
inline MixtureState exp_update(const MixtureState& x, const MixtureTangent& v, double mu) {
  MixtureState out;
  out.reserve(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out.push_back(exp_map(x[k], scaled(v[k], mu)));
  return out;
}

inline Point ret_update(const Point& x, const Tangent& v, double mu) {
  return retract(x, scaled(v, mu));
}

}  // namespace detail

template <class State>
struct SchemeRunT {
  std::vector<State> iterates;        // x_0 .. x_T
  std::vector<double> grad_norm_sq;   // |X(x_s)|^2 when the mean field is known
  StepSchedule schedule = StepSchedule::constant(1.0);
  std::uint64_t seed = 0;
  bool aborted = false;  // non-finite tangent encountered; partial run kept
};

using SchemeRun = SchemeRunT<Point>;
using MixtureSchemeRun = SchemeRunT<MixtureState>;

namespace detail {

template <class State, class Tan, class Update>
SchemeRunT<State> run_scheme(const RandomField<State, Tan>& field, const State& x0,
                             const StepSchedule& sched, long T, std::uint64_t seed,
                             const Update& update) {
  Rng rng(seed);
  SchemeRunT<State> run;
  run.schedule = sched;
  run.seed = seed;
  run.iterates.reserve(T + 1);
  run.iterates.push_back(x0);
  if (field.mean) run.grad_norm_sq.push_back(field_norm_sq(field.mean(x0)));
  for (long t = 1; t <= T; ++t) {
    const State& x = run.iterates.back();
    Tan v = field.sample(rng, x);
    if (!std::isfinite(field_norm_sq(v))) {
      run.aborted = true;
      break;
    }
    run.iterates.push_back(update(x, v, sched.at(t)));
    if (field.mean) run.grad_norm_sq.push_back(field_norm_sq(field.mean(run.iterates.back())));
  }
  return run;
}

}  // namespace detail

// x_{t+1} = Exp_{x_t}(mu_{t+1} X_{y_{t+1}}(x_t))
template <class State, class Tan>
SchemeRunT<State> run_exponential_scheme(const RandomField<State, Tan>& field, const State& x0,
                                         const StepSchedule& sched, long T,
                                         std::uint64_t seed) {
  return detail::run_scheme(field, x0, sched, T, seed,
                            [](const State& x, const Tan& v, double mu) {
                              return detail::exp_update(x, v, mu);
                            });
}

// x_{t+1} = Ret_{x_t}(mu_{t+1} X_{y_{t+1}}(x_t))
inline SchemeRun run_retraction_scheme(const PointField& field, const Point& x0,
                                       const StepSchedule& sched, long T, std::uint64_t seed) {
  return detail::run_scheme(field, x0, sched, T, seed,
                            [](const Point& x, const Tangent& v, double mu) {
                              return detail::ret_update(x, v, mu);
                            });
}

// Random iterate index: P(tau_t = s) = mu_{s+1} / sum_{s=1..t} mu_{s+1},
// s = 1..t; cumulative weights accumulated in extended precision.
template <class State>
std::pair<long, State> sample_iterate(const SchemeRunT<State>& run, Rng& rng) {
  const long t = static_cast<long>(run.iterates.size()) - 1;
  if (t < 1) throw DomainError("sample_iterate: run has no iterates");
  long double total = 0.0L;
  for (long s = 1; s <= t; ++s) total += run.schedule.at(s + 1);
  long double target = static_cast<long double>(rng.uniform()) * total;
  long double acc = 0.0L;
  for (long s = 1; s <= t; ++s) {
    acc += run.schedule.at(s + 1);
    if (target <= acc || s == t) return {s, run.iterates[s]};
  }
  return {t, run.iterates[t]};
}

// ---------------------------------------------------------------------------
// Non-asymptotic bound right-hand sides
// ---------------------------------------------------------------------------

struct SchemeBoundConstants {
  double lyapunov_c = 1.0;     // c |X|^2 <= -<grad V, X>
  double ell = 1.0;            // Lipschitz constant of grad V
  double sigma0_sq = 0.0;      // noise variance constant
  double v_x0 = 0.0;           // V at the initial point
  double delta_tau3_vnorm = 0.0;  // delta tau_3 |V|_{1,inf}; zero for exp schemes
};

// (2/c) [ V(x0)/t {mu^-1}_t + ell sigma0^2 {mu}_t (+ delta tau_3 |V| {mu^2}_t) ]
inline double scheme_bound_rhs(const SchemeBoundConstants& k, const StepSchedule& sched,
                               long t) {
  double rhs = (k.v_x0 / t) * weighted_step_moment(sched, t, -1) +
               k.ell * k.sigma0_sq * weighted_step_moment(sched, t, 1);
  if (k.delta_tau3_vnorm > 0.0) rhs += k.delta_tau3_vnorm * weighted_step_moment(sched, t, 2);
  return 2.0 / k.lyapunov_c * rhs;
}

// Running averages (1/t) sum_{s=1..t} g[s] of per-iterate statistics that have
// been averaged across seeds; index 0 of g corresponds to the initial point.
inline std::vector<double> running_average_from_first(const std::vector<double>& g) {
  std::vector<double> out;
  double acc = 0.0;
  for (std::size_t s = 1; s < g.size(); ++s) {
    acc += g[s];
    out.push_back(acc / s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mixture estimation
// ---------------------------------------------------------------------------

// Posterior component weights omega_k(y) proportional to exp(-d^2(y,x_k)/2).
inline std::vector<double> mixture_weights(const MixtureState& centers, const Point& y) {
  std::vector<double> logw(centers.size());
  for (std::size_t k = 0; k < centers.size(); ++k) {
    double d = dist(y, centers[k]);
    logw[k] = -0.5 * d * d;
  }
  double lse = log_sum_exp(logw);
  std::vector<double> w(centers.size());
  for (std::size_t k = 0; k < centers.size(); ++k) w[k] = std::exp(logw[k] - lse);
  return w;
}

// Stochastic gradient field of the mixture likelihood on the K-fold product
// manifold: a uniformly drawn data point y contributes the per-component
// tangents omega_k(y) Log_{x_k}(y); the mean field is the full-batch version.
inline MixtureField mixture_field(const std::vector<Point>& data) {
  if (data.empty()) throw DomainError("mixture_field: empty data");
  MixtureField f;
  f.sample = [data](Rng& rng, const MixtureState& centers) {
    const Point& y = data[rng.integer(data.size())];
    auto w = mixture_weights(centers, y);
    MixtureTangent out;
    out.reserve(centers.size());
    for (std::size_t k = 0; k < centers.size(); ++k)
      out.push_back(scaled(log_map(centers[k], y), w[k]));
    return out;
  };
  f.mean = [data](const MixtureState& centers) {
    MixtureTangent out;
    for (const Point& c : centers) out.push_back(zero_tangent(c));
    for (const Point& y : data) {
      auto w = mixture_weights(centers, y);
      for (std::size_t k = 0; k < centers.size(); ++k)
        out[k] = add(out[k], scaled(log_map(centers[k], y), w[k] / data.size()));
    }
    return out;
  };
  return f;
}

// f(x) = -log Z(1) - (1/N) sum_n log m(y_n | x) with
// m(y|x) = (1/K) sum_k Z(1)^-1 exp(-d^2(y, x_k)/2); nonnegative.
inline double mixture_neg_log_lik(const MixtureState& centers, const std::vector<Point>& data,
                                  const NormalizingFactor& nf) {
  if (centers.empty() || data.empty()) throw DomainError("mixture_neg_log_lik: empty input");
  const double log_z1 = nf.log_z(1.0);
  double acc = 0.0;
  for (const Point& y : data) {
    std::vector<double> logs(centers.size());
    for (std::size_t k = 0; k < centers.size(); ++k) {
      double d = dist(y, centers[k]);
      logs[k] = -0.5 * d * d;
    }
    double log_m = -std::log(static_cast<double>(centers.size())) - log_z1 + log_sum_exp(logs);
    acc += log_m;
  }
  return -log_z1 - acc / data.size();
}

// ---------------------------------------------------------------------------
// Streaming PCA on the Grassmannian
// ---------------------------------------------------------------------------

// X_y(x) = [(I - x)(y y^T) b] in projector coordinates; when the covariance
// Delta of y is supplied the mean field [(I - x) Delta b] is exposed too.
inline PointField pca_field(std::function<Eigen::VectorXd(Rng&)> y_sampler,
                            std::optional<Eigen::MatrixXd> delta = {}) {
  PointField f;
  auto lift = [](const Point& x, const Eigen::MatrixXd& mat) {
    auto fr = detail::grassmann_frame(x.rmat(), x.manifold.p);
    const int d = x.manifold.p + x.manifold.q;
    Eigen::MatrixXd h = (Eigen::MatrixXd::Identity(d, d) - x.rmat()) * mat * fr.b;
    return Tangent{x, Eigen::MatrixXd(detail::grassmann_embed(h, fr.b))};
  };
  f.sample = [y_sampler, lift](Rng& rng, const Point& x) {
    Eigen::VectorXd y = y_sampler(rng);
    return lift(x, (y * y.transpose()).eval());
  };
  if (delta) {
    Eigen::MatrixXd dm = *delta;
    f.mean = [dm, lift](const Point& x) { return lift(x, dm); };
  }
  return f;
}

// ---------------------------------------------------------------------------
// Riemannian AR(1)
// ---------------------------------------------------------------------------

// x_{t+1} = x_t #_mu y_{t+1} with y ~ P; equivalent to the exponential scheme
// with field X_y(x) = Log_x(y). mu in (0, 1].
inline SchemeRun ar1_run(const std::function<Point(Rng&)>& p_sampler, const Point& x0,
                         double mu, long T, std::uint64_t seed) {
  if (!(mu > 0.0 && mu <= 1.0)) throw DomainError("ar1_run: mu in (0, 1] required");
  PointField field;
  field.sample = [p_sampler](Rng& rng, const Point& x) {
    return log_map(x, p_sampler(rng));
  };
  return run_exponential_scheme(field, x0, StepSchedule::constant(mu), T, seed);
}

// Time average of V(x_t) = d^2(x_star, x_t)/2 over the stationary half of an
// AR(1) run; bounded by E(x_star) mu / (2 - mu) in the invariant regime.
inline double ar1_stationary_v_mean(const SchemeRun& run, const Point& x_star) {
  const std::size_t n = run.iterates.size();
  if (n < 4) throw DomainError("ar1_stationary_v_mean: run too short");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t s = n / 2; s < n; ++s) {
    double d = dist(x_star, run.iterates[s]);
    acc += 0.5 * d * d;
    ++count;
  }
  return acc / count;
}

// ---------------------------------------------------------------------------
// Lyapunov equation and the CLT covariance check
// ---------------------------------------------------------------------------

// Stationary covariance V of the linear diffusion dU = A U dt + B dW with
// Sigma* = B B^T: solves A V + V A^T + Sigma* = 0. A must be Hurwitz.
inline Eigen::MatrixXd lyapunov_solve(const Eigen::MatrixXd& a,
                                      const Eigen::MatrixXd& sigma_star) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || sigma_star.rows() != n || sigma_star.cols() != n)
    throw DomainError("lyapunov_solve: dimension mismatch");
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  for (int i = 0; i < n; ++i)
    if (es.eigenvalues()(i).real() >= 0.0)
      throw NumericalError("lyapunov_solve: A is not Hurwitz, eigenvalue " +
                           std::to_string(es.eigenvalues()(i).real()) + " + " +
                           std::to_string(es.eigenvalues()(i).imag()) + "i");
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd kron = Eigen::MatrixXd::Zero(n * n, n * n);
  // (I (x) A + A (x) I) vec(V) = -vec(Sigma*), column-major vec
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        kron(j * n + i, j * n + k) += a(i, k);  // I (x) A
        kron(j * n + i, k * n + i) += a(j, k);  // A (x) I
      }
  Eigen::VectorXd rhs(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) rhs(j * n + i) = -sigma_star(i, j);
  Eigen::VectorXd vvec = kron.colPivHouseholderQr().solve(rhs);
  Eigen::MatrixXd v(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) v(i, j) = vvec(j * n + i);
  v = detail::symmetrize(v);
  double resid = (a * v + v * a.transpose() + sigma_star).norm();
  if (resid > 1e-10 * std::max(1.0, sigma_star.norm()))
    throw NumericalError("lyapunov_solve: residual above tolerance");
  return v;
}

struct CltSpec {
  Eigen::MatrixXd A;
  Eigen::MatrixXd Sigma_star;
};

struct CltReport {
  std::vector<double> mu;
  std::vector<Eigen::MatrixXd> covariance;  // stationary covariance of u_t
  std::vector<double> frobenius_distance;   // | cov - V |_F
  Eigen::MatrixXd v_theory;
  CltSpec spec_used;
};

namespace detail {

// Least-squares linearization of the mean field around x_star in normal
// coordinates over a ball of radius 0.1.
inline CltSpec estimate_clt_spec(const PointField& field, const Point& x_star, Rng& rng,
                                 const std::vector<Tangent>& basis) {
  if (!field.mean)
    throw DomainError("clt_check: the mean field is required to estimate A");
  const int n = static_cast<int>(basis.size());
  const int probes = std::max(40, 10 * n);
  Eigen::MatrixXd u(n, probes), w(n, probes);
  for (int i = 0; i < probes; ++i) {
    Tangent du = random_tangent(x_star, rng, 0.1 * std::cbrt(rng.uniform()));
    Point x = exp_map(x_star, du);
    Tangent mean_x = field.mean(x);
    Tangent back = parallel_transport(x, log_map(x, x_star), mean_x);
    u.col(i) = tangent_coordinates(du, basis);
    w.col(i) = tangent_coordinates(Tangent{x_star, back.vec}, basis);
  }
  CltSpec spec;
  spec.A = w * u.transpose() * (u * u.transpose()).inverse();
  const int draws = 4000;
  Tangent mean0 = field.mean(x_star);
  Eigen::VectorXd m0 = tangent_coordinates(mean0, basis);
  spec.Sigma_star = Eigen::MatrixXd::Zero(n, n);
  Rng rng2(rng.engine()());
  for (int i = 0; i < draws; ++i) {
    Eigen::VectorXd e = tangent_coordinates(field.sample(rng2, x_star), basis) - m0;
    spec.Sigma_star += e * e.transpose() / draws;
  }
  return spec;
}

}  // namespace detail

// For each step size, runs the constant-step scheme, rescales the post
// burn-in iterates by mu^{-1/2} in normal coordinates at x_star, and compares
// their stationary covariance with the Lyapunov solution.
inline CltReport clt_check(const PointField& field, const Point& x_star,
                           const std::vector<double>& mu_list, long T, std::uint64_t seed,
                           std::optional<CltSpec> spec = {}) {
  auto basis = tangent_basis(x_star);
  Rng rng(seed);
  CltSpec used = spec ? *spec : detail::estimate_clt_spec(field, x_star, rng, basis);
  CltReport report;
  report.spec_used = used;
  report.v_theory = lyapunov_solve(used.A, used.Sigma_star);
  std::uint64_t sub_seed = seed;
  for (double mu : mu_list) {
    SchemeRun run = run_exponential_scheme(field, x_star, StepSchedule::constant(mu), T,
                                           ++sub_seed);
    const std::size_t n = run.iterates.size();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(basis.size(), basis.size());
    std::size_t count = 0;
    for (std::size_t s = n / 2; s < n; ++s) {
      Eigen::VectorXd u =
          tangent_coordinates(log_map(x_star, run.iterates[s]), basis) / std::sqrt(mu);
      cov += u * u.transpose();
      ++count;
    }
    cov /= count;
    report.mu.push_back(mu);
    report.covariance.push_back(cov);
    report.frobenius_distance.push_back((cov - report.v_theory).norm());
  }
  return report;
}

}  // namespace manistat
