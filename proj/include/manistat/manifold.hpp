#pragma once

// Exact geometry primitives (Exp, Log, distance, parallel transport,
// retractions and their tangent-space comparison maps, convex combinations)
// for six concrete manifolds:
//
//   Euclidean(n)       R^n with the flat metric
//   Hyperbolic(n, c)   hyperboloid model, constant curvature -c^2
//   SpdHermitian(N)    Hermitian positive-definite matrices, affine-invariant
//                      metric <u,v>_x = tr(x^-1 u x^-1 v)
//   Grassmann(p, q)    real Grassmannian as (p+q)x(p+q) orthogonal
//                      projectors of rank p, metric <u,v>_x = tr(uv)
//   Sphere(n)          unit sphere in R^{n+1}, round metric
//   Unitary(N)         unitary group, bi-invariant metric
//                      <u,v>_x = -scale tr((x^dag u)(x^dag v))
//
// All operations are pure functions of their inputs. Matrix functions of
// Hermitian arguments are computed through the spectral decomposition.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "manistat/errors.hpp"
#include "manistat/rng.hpp"
#include "manistat/special.hpp"

namespace manistat {

enum class ManifoldKind { Euclidean, Hyperbolic, SpdHermitian, Grassmann, Sphere, Unitary };

inline const char* kind_name(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::Euclidean: return "euclidean";
    case ManifoldKind::Hyperbolic: return "hyperbolic";
    case ManifoldKind::SpdHermitian: return "spd_hermitian";
    case ManifoldKind::Grassmann: return "grassmann";
    case ManifoldKind::Sphere: return "sphere";
    case ManifoldKind::Unitary: return "unitary";
  }
  return "?";
}

struct ManifoldDescriptor {
  ManifoldKind kind = ManifoldKind::Euclidean;
  int n = 1;       // n for Euclidean/Hyperbolic/Sphere, N for SpdHermitian/Unitary
  int p = 0;       // Grassmann rank
  int q = 0;       // Grassmann corank
  double c = 0.0;  // Hyperbolic curvature scale, kappa = -c^2
  // Bi-invariant metric scale on U(N): <u,v>_x = -scale tr((x^dag u)(x^dag v)).
  // The sources use both 1/2 and 1; the scale is exposed here instead of fixed.
  double unitary_scale = 0.5;

  static ManifoldDescriptor euclidean(int n) {
    if (n < 1) throw DomainError("euclidean: n >= 1 required");
    return {ManifoldKind::Euclidean, n, 0, 0, 0.0, 0.5};
  }
  static ManifoldDescriptor hyperbolic(int n, double c) {
    if (n < 1 || c <= 0.0) throw DomainError("hyperbolic: n >= 1 and c > 0 required");
    return {ManifoldKind::Hyperbolic, n, 0, 0, c, 0.5};
  }
  static ManifoldDescriptor spd_hermitian(int N) {
    if (N < 1) throw DomainError("spd_hermitian: N >= 1 required");
    return {ManifoldKind::SpdHermitian, N, 0, 0, 0.0, 0.5};
  }
  static ManifoldDescriptor grassmann(int p, int q) {
    if (p < 1 || p > q) throw DomainError("grassmann: 1 <= p <= q required");
    return {ManifoldKind::Grassmann, 0, p, q, 0.0, 0.5};
  }
  static ManifoldDescriptor sphere(int n) {
    if (n < 1) throw DomainError("sphere: n >= 1 required");
    return {ManifoldKind::Sphere, n, 0, 0, 0.0, 0.5};
  }
  static ManifoldDescriptor unitary(int N, double scale = 0.5) {
    if (N < 1 || scale <= 0.0) throw DomainError("unitary: N >= 1 and scale > 0 required");
    return {ManifoldKind::Unitary, N, 0, 0, 0.0, scale};
  }

  int dim() const {
    switch (kind) {
      case ManifoldKind::Euclidean:
      case ManifoldKind::Hyperbolic:
      case ManifoldKind::Sphere: return n;
      case ManifoldKind::SpdHermitian:
      case ManifoldKind::Unitary: return n * n;
      case ManifoldKind::Grassmann: return p * q;
    }
    return 0;
  }

  // (kappa_min, kappa_max) for the fixed metric normalisations above.
  std::pair<double, double> curvature_bounds() const {
    switch (kind) {
      case ManifoldKind::Euclidean: return {0.0, 0.0};
      case ManifoldKind::Hyperbolic: return {-c * c, -c * c};
      case ManifoldKind::SpdHermitian: return {-0.5, 0.0};
      case ManifoldKind::Grassmann: return {0.0, 2.0};
      case ManifoldKind::Sphere: return {1.0, 1.0};
      case ManifoldKind::Unitary: return {0.0, 0.5 / unitary_scale};
    }
    return {0.0, 0.0};
  }

  bool is_hadamard() const {
    return kind == ManifoldKind::Euclidean || kind == ManifoldKind::Hyperbolic ||
           kind == ManifoldKind::SpdHermitian;
  }

  bool operator==(const ManifoldDescriptor& o) const {
    return kind == o.kind && n == o.n && p == o.p && q == o.q && c == o.c &&
           unitary_scale == o.unitary_scale;
  }
  bool operator!=(const ManifoldDescriptor& o) const { return !(*this == o); }
};

using Coords = std::variant<Eigen::VectorXd, Eigen::MatrixXd, Eigen::MatrixXcd>;

struct Point {
  ManifoldDescriptor manifold;
  Coords coords;

  const Eigen::VectorXd& vec() const { return std::get<Eigen::VectorXd>(coords); }
  const Eigen::MatrixXd& rmat() const { return std::get<Eigen::MatrixXd>(coords); }
  const Eigen::MatrixXcd& cmat() const { return std::get<Eigen::MatrixXcd>(coords); }
  Eigen::VectorXd& vec() { return std::get<Eigen::VectorXd>(coords); }
  Eigen::MatrixXd& rmat() { return std::get<Eigen::MatrixXd>(coords); }
  Eigen::MatrixXcd& cmat() { return std::get<Eigen::MatrixXcd>(coords); }
};

struct Tangent {
  Point base;
  Coords vec;

  const Eigen::VectorXd& v() const { return std::get<Eigen::VectorXd>(vec); }
  const Eigen::MatrixXd& rm() const { return std::get<Eigen::MatrixXd>(vec); }
  const Eigen::MatrixXcd& cm() const { return std::get<Eigen::MatrixXcd>(vec); }
};

// Absolute Frobenius tolerance for membership and tangency checks.
inline constexpr double kTangencyTol = 1e-9;
// Conservative margins for cut-locus detection (ties break toward the error).
inline constexpr double kCutLocusMargin = 1e-6;

namespace detail {

inline Eigen::MatrixXcd hermitize(const Eigen::MatrixXcd& a) {
  return 0.5 * (a + a.adjoint()).eval();
}
inline Eigen::MatrixXcd skew_hermitize(const Eigen::MatrixXcd& a) {
  return 0.5 * (a - a.adjoint()).eval();
}
inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose()).eval();
}

inline double coords_distance(const Coords& a, const Coords& b) {
  if (a.index() != b.index()) return std::numeric_limits<double>::infinity();
  if (std::holds_alternative<Eigen::VectorXd>(a))
    return (std::get<Eigen::VectorXd>(a) - std::get<Eigen::VectorXd>(b)).norm();
  if (std::holds_alternative<Eigen::MatrixXd>(a))
    return (std::get<Eigen::MatrixXd>(a) - std::get<Eigen::MatrixXd>(b)).norm();
  return (std::get<Eigen::MatrixXcd>(a) - std::get<Eigen::MatrixXcd>(b)).norm();
}

// f applied to the spectrum of a Hermitian matrix.
template <class F>
Eigen::MatrixXcd hermitian_apply(const Eigen::MatrixXcd& h, const F& f) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  Eigen::VectorXd lam = es.eigenvalues();
  Eigen::VectorXcd flam(lam.size());
  for (int i = 0; i < lam.size(); ++i) flam(i) = f(lam(i));
  return es.eigenvectors() * flam.asDiagonal() * es.eigenvectors().adjoint();
}

inline void require_positive_spectrum(const Eigen::VectorXd& lam, const char* who) {
  for (int i = 0; i < lam.size(); ++i)
    if (lam(i) < 1e-14)
      throw DomainError(std::string(who) + ": eigenvalue " + std::to_string(lam(i)) +
                        " below positive-definiteness tolerance 1e-14");
}

struct SpdFactors {
  Eigen::MatrixXcd sqrt;
  Eigen::MatrixXcd inv_sqrt;
};

inline SpdFactors spd_factors(const Eigen::MatrixXcd& x, const char* who) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(x);
  require_positive_spectrum(es.eigenvalues(), who);
  Eigen::VectorXd s = es.eigenvalues().cwiseSqrt();
  Eigen::MatrixXcd u = es.eigenvectors();
  SpdFactors f;
  f.sqrt = u * s.asDiagonal() * u.adjoint();
  f.inv_sqrt = u * s.cwiseInverse().asDiagonal() * u.adjoint();
  return f;
}

inline Eigen::MatrixXcd spd_log(const Eigen::MatrixXcd& x, const char* who) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(x);
  require_positive_spectrum(es.eigenvalues(), who);
  Eigen::VectorXcd l = es.eigenvalues().array().log().cast<std::complex<double>>();
  return es.eigenvectors() * l.asDiagonal() * es.eigenvectors().adjoint();
}

inline Eigen::MatrixXcd herm_exp(const Eigen::MatrixXcd& h) {
  return hermitian_apply(h, [](double t) { return std::exp(t); });
}

// Minkowski form <x,y> = -x0 y0 + sum_i xi yi.
inline double lorentz(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = -a(0) * b(0);
  for (int i = 1; i < a.size(); ++i) s += a(i) * b(i);
  return s;
}

// Orthonormal basis of the range (columns p..d-1) and its complement
// (columns 0..q-1) of a rank-p projector.
struct GrassmannFrame {
  Eigen::MatrixXd b;      // d x p
  Eigen::MatrixXd bperp;  // d x q
};

inline GrassmannFrame grassmann_frame(const Eigen::MatrixXd& x, int p) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x);
  const int d = static_cast<int>(x.rows());
  GrassmannFrame f;
  f.b = es.eigenvectors().rightCols(p);
  f.bperp = es.eigenvectors().leftCols(d - p);
  return f;
}

// Horizontal coordinate of a tangent v at x: omega = bperp^T v b (q x p).
inline Eigen::MatrixXd grassmann_omega(const GrassmannFrame& f, const Eigen::MatrixXd& v) {
  return f.bperp.transpose() * v * f.b;
}

// Tangent in projector coordinates from its horizontal lift h = bperp omega.
inline Eigen::MatrixXd grassmann_embed(const Eigen::MatrixXd& h, const Eigen::MatrixXd& b) {
  return h * b.transpose() + b * h.transpose();
}

// Principal angles between the subspaces of two frames, ascending. The cosine
// route loses digits at small angles, so those are recomputed from the sine
// route (singular values of bperp_x^T b_y).
inline Eigen::VectorXd grassmann_principal_angles(const GrassmannFrame& fx,
                                                  const GrassmannFrame& fy) {
  const int p = static_cast<int>(fx.b.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svc(fx.b.transpose() * fy.b);
  Eigen::JacobiSVD<Eigen::MatrixXd> svs(fx.bperp.transpose() * fy.b);
  Eigen::VectorXd theta(p);
  for (int i = 0; i < p; ++i) {
    double cth = std::clamp(svc.singularValues()(i), 0.0, 1.0);
    double sth = std::clamp(svs.singularValues()(p - 1 - i), 0.0, 1.0);
    theta(i) = cth * cth > 0.5 ? std::asin(sth) : std::acos(cth);
  }
  return theta;
}

// The orthogonal matrix Q = exp(w_hat) whose action y = Q x Q^T realises the
// geodesic through x with tangent v; built block-wise from the SVD of omega,
// no dense matrix exponential involved.
inline Eigen::MatrixXd grassmann_geodesic_rotation(const GrassmannFrame& f,
                                                   const Eigen::MatrixXd& omega) {
  const int p = static_cast<int>(omega.cols());
  const int q = static_cast<int>(omega.rows());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(omega, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd a = svd.singularValues();
  const Eigen::MatrixXd r = svd.matrixU();  // q x q
  const Eigen::MatrixXd s = svd.matrixV();  // p x p
  // exp of [[0, -a^T],[a, 0]] with a = (diag, 0) of size q x p.
  Eigen::MatrixXd e = Eigen::MatrixXd::Identity(p + q, p + q);
  for (int i = 0; i < p; ++i) {
    e(i, i) = std::cos(a(i));
    e(p + i, p + i) = std::cos(a(i));
    e(i, p + i) = -std::sin(a(i));
    e(p + i, i) = std::sin(a(i));
  }
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(p + q, p + q);
  k.topLeftCorner(p, p) = s;
  k.bottomRightCorner(q, q) = r;
  Eigen::MatrixXd g(p + q, p + q);
  g.leftCols(p) = f.b;
  g.rightCols(q) = f.bperp;
  return g * k * e * k.transpose() * g.transpose();
}

// Principal matrix logarithm of a unitary through its Schur form; returns the
// skew-Hermitian log and the largest eigen-phase magnitude.
inline std::pair<Eigen::MatrixXcd, double> unitary_log(const Eigen::MatrixXcd& u) {
  Eigen::ComplexSchur<Eigen::MatrixXcd> schur(u);
  const Eigen::MatrixXcd& t = schur.matrixT();
  const Eigen::MatrixXcd& qmat = schur.matrixU();
  const int n = static_cast<int>(u.rows());
  Eigen::VectorXcd phases(n);
  double max_phase = 0.0;
  for (int i = 0; i < n; ++i) {
    double th = std::arg(t(i, i));
    max_phase = std::max(max_phase, std::abs(th));
    phases(i) = std::complex<double>(0.0, th);
  }
  return {qmat * phases.asDiagonal() * qmat.adjoint(), max_phase};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Point construction and membership checks
// ---------------------------------------------------------------------------

inline Point make_point(const ManifoldDescriptor& m, Coords coords) {
  return Point{m, std::move(coords)};
}

// Canonical base point of each manifold.
inline Point origin(const ManifoldDescriptor& m) {
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return {m, Eigen::VectorXd(Eigen::VectorXd::Zero(m.n))};
    case ManifoldKind::Hyperbolic: {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(m.n + 1);
      x(0) = 1.0 / m.c;
      return {m, x};
    }
    case ManifoldKind::Sphere: {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(m.n + 1);
      x(0) = 1.0;
      return {m, x};
    }
    case ManifoldKind::SpdHermitian:
      return {m, Eigen::MatrixXcd(Eigen::MatrixXcd::Identity(m.n, m.n))};
    case ManifoldKind::Unitary:
      return {m, Eigen::MatrixXcd(Eigen::MatrixXcd::Identity(m.n, m.n))};
    case ManifoldKind::Grassmann: {
      const int d = m.p + m.q;
      Eigen::MatrixXd x = Eigen::MatrixXd::Zero(d, d);
      x.topLeftCorner(m.p, m.p).setIdentity();
      return {m, x};
    }
  }
  throw DomainError("origin: unknown manifold kind");
}

// Residual of the membership constraints; <= tol means the point is valid.
inline double point_residual(const Point& x) {
  const auto& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Euclidean: return 0.0;
    case ManifoldKind::Hyperbolic: {
      if (x.vec()(0) <= 0.0) return std::numeric_limits<double>::infinity();
      return std::abs(m.c * m.c * detail::lorentz(x.vec(), x.vec()) + 1.0);
    }
    case ManifoldKind::Sphere: return std::abs(x.vec().norm() - 1.0);
    case ManifoldKind::SpdHermitian: {
      double herm = (x.cmat() - x.cmat().adjoint()).norm();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(x.cmat(), Eigen::EigenvaluesOnly);
      double minl = es.eigenvalues().minCoeff();
      return std::max(herm, minl > 1e-14 ? 0.0 : std::numeric_limits<double>::infinity());
    }
    case ManifoldKind::Grassmann: {
      double sym = (x.rmat() - x.rmat().transpose()).norm();
      double idem = (x.rmat() * x.rmat() - x.rmat()).norm();
      double tr = std::abs(x.rmat().trace() - m.p);
      return std::max({sym, idem, tr});
    }
    case ManifoldKind::Unitary:
      return (x.cmat().adjoint() * x.cmat() -
              Eigen::MatrixXcd::Identity(m.n, m.n)).norm();
  }
  return std::numeric_limits<double>::infinity();
}

inline void check_point(const Point& x, double tol = kTangencyTol) {
  if (point_residual(x) > tol)
    throw DomainError(std::string("point violates ") + kind_name(x.manifold.kind) +
                      " membership constraints");
}

// ---------------------------------------------------------------------------
// Tangent-space linear algebra
// ---------------------------------------------------------------------------

inline Tangent zero_tangent(const Point& x) {
  switch (x.manifold.kind) {
    case ManifoldKind::Euclidean:
      return {x, Eigen::VectorXd(Eigen::VectorXd::Zero(x.manifold.n))};
    case ManifoldKind::Hyperbolic:
    case ManifoldKind::Sphere:
      return {x, Eigen::VectorXd(Eigen::VectorXd::Zero(x.manifold.n + 1))};
    case ManifoldKind::SpdHermitian:
    case ManifoldKind::Unitary:
      return {x, Eigen::MatrixXcd(Eigen::MatrixXcd::Zero(x.manifold.n, x.manifold.n))};
    case ManifoldKind::Grassmann: {
      const int d = x.manifold.p + x.manifold.q;
      return {x, Eigen::MatrixXd(Eigen::MatrixXd::Zero(d, d))};
    }
  }
  throw DomainError("zero_tangent: unknown manifold kind");
}

inline Tangent scaled(const Tangent& t, double a) {
  Tangent r = t;
  std::visit([a](auto& m) { m *= a; }, r.vec);
  return r;
}

// Sum of tangents anchored at the same base point.
inline Tangent add(const Tangent& t, const Tangent& u) {
  Tangent r = t;
  if (std::holds_alternative<Eigen::VectorXd>(r.vec))
    std::get<Eigen::VectorXd>(r.vec) += std::get<Eigen::VectorXd>(u.vec);
  else if (std::holds_alternative<Eigen::MatrixXd>(r.vec))
    std::get<Eigen::MatrixXd>(r.vec) += std::get<Eigen::MatrixXd>(u.vec);
  else
    std::get<Eigen::MatrixXcd>(r.vec) += std::get<Eigen::MatrixXcd>(u.vec);
  return r;
}

// Riemannian scalar product of two tangents at the same base point.
inline double inner(const Tangent& t, const Tangent& u) {
  const auto& m = t.base.manifold;
  switch (m.kind) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Sphere: return t.v().dot(u.v());
    case ManifoldKind::Hyperbolic: return detail::lorentz(t.v(), u.v());
    case ManifoldKind::SpdHermitian: {
      Eigen::LLT<Eigen::MatrixXcd> llt(t.base.cmat());
      Eigen::MatrixXcd a = llt.solve(t.cm());
      Eigen::MatrixXcd b = llt.solve(u.cm());
      return (a * b).trace().real();
    }
    case ManifoldKind::Grassmann: return (t.rm() * u.rm()).trace();
    case ManifoldKind::Unitary: {
      Eigen::MatrixXcd xi = t.base.cmat().adjoint() * t.cm();
      Eigen::MatrixXcd eta = t.base.cmat().adjoint() * u.cm();
      return m.unitary_scale * (xi * eta.adjoint()).trace().real();
    }
  }
  throw DomainError("inner: unknown manifold kind");
}

inline double norm(const Tangent& t) {
  double ii = inner(t, t);
  if (std::isnan(ii)) return ii;
  return std::sqrt(std::max(0.0, ii));
}

// Orthogonal projection of an arbitrary ambient perturbation onto the tangent
// space at x.
inline Tangent project_tangent(const Point& x, const Coords& raw) {
  const auto& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Euclidean: return {x, raw};
    case ManifoldKind::Hyperbolic: {
      const auto& w = std::get<Eigen::VectorXd>(raw);
      Eigen::VectorXd v = w + m.c * m.c * detail::lorentz(x.vec(), w) * x.vec();
      return {x, v};
    }
    case ManifoldKind::Sphere: {
      const auto& w = std::get<Eigen::VectorXd>(raw);
      Eigen::VectorXd v = w - x.vec().dot(w) * x.vec();
      return {x, v};
    }
    case ManifoldKind::SpdHermitian: {
      const auto& w = std::get<Eigen::MatrixXcd>(raw);
      Eigen::MatrixXcd v = 0.5 * (w + w.adjoint());
      return {x, v};
    }
    case ManifoldKind::Grassmann: {
      const auto& w = std::get<Eigen::MatrixXd>(raw);
      Eigen::MatrixXd s = 0.5 * (w + w.transpose());
      const Eigen::MatrixXd& px = x.rmat();
      const int d = m.p + m.q;
      Eigen::MatrixXd comp = Eigen::MatrixXd::Identity(d, d) - px;
      Eigen::MatrixXd v = px * s * comp + comp * s * px;
      return {x, v};
    }
    case ManifoldKind::Unitary: {
      const auto& w = std::get<Eigen::MatrixXcd>(raw);
      Eigen::MatrixXcd xi = detail::skew_hermitize(x.cmat().adjoint() * w);
      return {x, Eigen::MatrixXcd(x.cmat() * xi)};
    }
  }
  throw DomainError("project_tangent: unknown manifold kind");
}

namespace detail {

// Validates the anchoring and tangency of v at x; returns the re-projected
// tangent that downstream formulas operate on.
inline Tangent sanitize_tangent(const Point& x, const Tangent& t, const char* who) {
  if (t.base.manifold != x.manifold)
    throw DomainError(std::string(who) + ": tangent base manifold mismatch");
  if (coords_distance(t.base.coords, x.coords) > 1e-7)
    throw DomainError(std::string(who) + ": tangent is not anchored at the base point");
  Tangent proj = project_tangent(x, t.vec);
  if (coords_distance(proj.vec, t.vec) > kTangencyTol)
    throw DomainError(std::string(who) + ": tangency residual above tolerance");
  return proj;
}

inline void require_same_manifold(const Point& x, const Point& y, const char* who) {
  if (x.manifold != y.manifold)
    throw DomainError(std::string(who) + ": points live on different manifolds");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Core operations
// ---------------------------------------------------------------------------

inline Point exp_map(const Point& x, const Tangent& t) {
  Tangent vt = detail::sanitize_tangent(x, t, "exp_map");
  const auto& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return {m, Eigen::VectorXd(x.vec() + vt.v())};
    case ManifoldKind::Hyperbolic: {
      double r = norm(vt);
      if (r < 1e-300) return x;
      Eigen::VectorXd y =
          std::cosh(m.c * r) * x.vec() + (std::sinh(m.c * r) / (m.c * r)) * vt.v();
      return {m, y};
    }
    case ManifoldKind::Sphere: {
      double r = norm(vt);
      if (r < 1e-300) return x;
      Eigen::VectorXd y = std::cos(r) * x.vec() + (std::sin(r) / r) * vt.v();
      y.normalize();
      return {m, y};
    }
    case ManifoldKind::SpdHermitian: {
      auto f = detail::spd_factors(x.cmat(), "exp_map");
      Eigen::MatrixXcd s = detail::hermitize(f.inv_sqrt * vt.cm() * f.inv_sqrt);
      Eigen::MatrixXcd y = f.sqrt * detail::herm_exp(s) * f.sqrt;
      return {m, Eigen::MatrixXcd(0.5 * (y + y.adjoint()))};
    }
    case ManifoldKind::Grassmann: {
      auto fr = detail::grassmann_frame(x.rmat(), m.p);
      Eigen::MatrixXd omega = detail::grassmann_omega(fr, vt.rm());
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(omega, Eigen::ComputeThinU | Eigen::ComputeThinV);
      Eigen::VectorXd a = svd.singularValues();
      Eigen::MatrixXd bnew = fr.b * svd.matrixV() * a.array().cos().matrix().asDiagonal() +
                             fr.bperp * svd.matrixU() * a.array().sin().matrix().asDiagonal();
      Eigen::MatrixXd y = bnew * bnew.transpose();
      return {m, Eigen::MatrixXd(0.5 * (y + y.transpose()))};
    }
    case ManifoldKind::Unitary: {
      Eigen::MatrixXcd xi = x.cmat().adjoint() * vt.cm();
      Eigen::MatrixXcd h = std::complex<double>(0, -1) * xi;  // Hermitian
      Eigen::MatrixXcd e = detail::hermitian_apply(
          0.5 * (h + h.adjoint()),
          [](double th) { return std::complex<double>(std::cos(th), std::sin(th)); });
      // hermitian_apply gives exp(i h) = exp(xi)
      return {m, Eigen::MatrixXcd(x.cmat() * e)};
    }
  }
  throw DomainError("exp_map: unknown manifold kind");
}

inline double dist(const Point& x, const Point& y);

inline Tangent log_map(const Point& x, const Point& y) {
  detail::require_same_manifold(x, y, "log_map");
  const auto& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return {x, Eigen::VectorXd(y.vec() - x.vec())};
    case ManifoldKind::Hyperbolic: {
      double d = dist(x, y);
      if (d < 1e-15) return zero_tangent(x);
      double lam = -m.c * m.c * detail::lorentz(x.vec(), y.vec());
      Eigen::VectorXd w = y.vec() - lam * x.vec();
      double wn = std::sqrt(std::max(detail::lorentz(w, w), 0.0));
      if (wn < 1e-300) return zero_tangent(x);
      return {x, Eigen::VectorXd((d / wn) * w)};
    }
    case ManifoldKind::Sphere: {
      double cth = x.vec().dot(y.vec());
      Eigen::VectorXd w = y.vec() - cth * x.vec();
      double wn = w.norm();
      double th = std::atan2(wn, cth);
      if (th > kPi - kCutLocusMargin)
        throw CutLocusError("log_map: target point at or numerically near the antipode");
      if (th < 1e-15 || wn < 1e-300) return zero_tangent(x);
      return {x, Eigen::VectorXd((th / wn) * w)};
    }
    case ManifoldKind::SpdHermitian: {
      auto f = detail::spd_factors(x.cmat(), "log_map");
      Eigen::MatrixXcd middle = detail::hermitize(f.inv_sqrt * y.cmat() * f.inv_sqrt);
      Eigen::MatrixXcd l = detail::spd_log(middle, "log_map");
      Eigen::MatrixXcd v = f.sqrt * l * f.sqrt;
      return {x, Eigen::MatrixXcd(0.5 * (v + v.adjoint()))};
    }
    case ManifoldKind::Grassmann: {
      auto fx = detail::grassmann_frame(x.rmat(), m.p);
      auto fy = detail::grassmann_frame(y.rmat(), m.p);
      Eigen::MatrixXd mxy = fx.b.transpose() * fy.b;  // p x p
      Eigen::JacobiSVD<Eigen::MatrixXd> overlap(mxy);
      if (overlap.singularValues().minCoeff() < std::sin(kCutLocusMargin))
        throw CutLocusError("log_map: target subspace at or numerically near the cut locus");
      const int d = m.p + m.q;
      Eigen::MatrixXd l =
          (Eigen::MatrixXd::Identity(d, d) - x.rmat()) * fy.b *
          mxy.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(m.p, m.p)).eval();
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(l, Eigen::ComputeThinU | Eigen::ComputeThinV);
      Eigen::VectorXd theta = svd.singularValues().array().atan().matrix();
      Eigen::MatrixXd h = svd.matrixU() * theta.asDiagonal() * svd.matrixV().transpose();
      return {x, Eigen::MatrixXd(detail::grassmann_embed(h, fx.b))};
    }
    case ManifoldKind::Unitary: {
      Eigen::MatrixXcd u = x.cmat().adjoint() * y.cmat();
      auto [xi, max_phase] = detail::unitary_log(u);
      if (max_phase > kPi - kCutLocusMargin)
        throw CutLocusError("log_map: target at or numerically near the cut locus of U(N)");
      return {x, Eigen::MatrixXcd(x.cmat() * xi)};
    }
  }
  throw DomainError("log_map: unknown manifold kind");
}

inline double dist(const Point& x, const Point& y) {
  detail::require_same_manifold(x, y, "dist");
  const auto& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Euclidean: return (x.vec() - y.vec()).norm();
    case ManifoldKind::Hyperbolic: {
      // chord form: sinh(c d / 2) = (c/2) sqrt(<x-y, x-y>_L), stable near x = y
      Eigen::VectorXd diff = x.vec() - y.vec();
      double qq = std::max(detail::lorentz(diff, diff), 0.0);
      return 2.0 / m.c * std::asinh(0.5 * m.c * std::sqrt(qq));
    }
    case ManifoldKind::Sphere: {
      double cth = x.vec().dot(y.vec());
      double sth = (y.vec() - cth * x.vec()).norm();
      return std::atan2(sth, cth);
    }
    case ManifoldKind::SpdHermitian: {
      auto f = detail::spd_factors(x.cmat(), "dist");
      Eigen::MatrixXcd middle = detail::hermitize(f.inv_sqrt * y.cmat() * f.inv_sqrt);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(middle, Eigen::EigenvaluesOnly);
      detail::require_positive_spectrum(es.eigenvalues(), "dist");
      return es.eigenvalues().array().log().matrix().norm();
    }
    case ManifoldKind::Grassmann: {
      auto fx = detail::grassmann_frame(x.rmat(), m.p);
      auto fy = detail::grassmann_frame(y.rmat(), m.p);
      Eigen::VectorXd theta = detail::grassmann_principal_angles(fx, fy);
      return std::sqrt(2.0) * theta.norm();
    }
    case ManifoldKind::Unitary: {
      Eigen::MatrixXcd u = x.cmat().adjoint() * y.cmat();
      auto [xi, max_phase] = detail::unitary_log(u);
      (void)max_phase;
      return std::sqrt(m.unitary_scale) * xi.norm();
    }
  }
  throw DomainError("dist: unknown manifold kind");
}

// Transports u along the geodesic t -> Exp_x(t v) to t = 1.
inline Tangent parallel_transport(const Point& x, const Tangent& v, const Tangent& u) {
  Tangent vt = detail::sanitize_tangent(x, v, "parallel_transport");
  Tangent ut = detail::sanitize_tangent(x, u, "parallel_transport");
  const auto& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Euclidean: {
      Point y = exp_map(x, vt);
      return {y, ut.vec};
    }
    case ManifoldKind::Hyperbolic: {
      Point y = exp_map(x, vt);
      double lam = -m.c * m.c * detail::lorentz(x.vec(), y.vec());
      double coef = m.c * m.c * detail::lorentz(y.vec(), ut.v()) / (1.0 + lam);
      Eigen::VectorXd w = ut.v() + coef * (x.vec() + y.vec());
      return {y, w};
    }
    case ManifoldKind::Sphere: {
      double r = norm(vt);
      Point y = exp_map(x, vt);
      if (r < 1e-300) return {y, ut.vec};
      Eigen::VectorXd vhat = vt.v() / r;
      double comp = vhat.dot(ut.v());
      Eigen::VectorXd w =
          ut.v() - comp * vhat + comp * (std::cos(r) * vhat - std::sin(r) * x.vec());
      return {y, w};
    }
    case ManifoldKind::SpdHermitian: {
      auto f = detail::spd_factors(x.cmat(), "parallel_transport");
      Eigen::MatrixXcd s = detail::hermitize(f.inv_sqrt * (0.5 * vt.cm()) * f.inv_sqrt);
      Eigen::MatrixXcd e = f.sqrt * detail::herm_exp(s) * f.inv_sqrt;  // exp((v/2) x^-1)
      Point y = exp_map(x, vt);
      Eigen::MatrixXcd w = e * ut.cm() * e.adjoint();
      return {y, Eigen::MatrixXcd(0.5 * (w + w.adjoint()))};
    }
    case ManifoldKind::Grassmann: {
      auto fr = detail::grassmann_frame(x.rmat(), m.p);
      Eigen::MatrixXd omega = detail::grassmann_omega(fr, vt.rm());
      Eigen::MatrixXd qrot = detail::grassmann_geodesic_rotation(fr, omega);
      Point y = exp_map(x, vt);
      Eigen::MatrixXd w = qrot * ut.rm() * qrot.transpose();
      // guard against drift of the frame under the two routes to y
      return {y, project_tangent(y, Coords(w)).vec};
    }
    case ManifoldKind::Unitary: {
      Eigen::MatrixXcd xi = x.cmat().adjoint() * vt.cm();
      Eigen::MatrixXcd eta = x.cmat().adjoint() * ut.cm();
      Eigen::MatrixXcd h = std::complex<double>(0, -1) * (0.5 * xi);
      Eigen::MatrixXcd ehalf = detail::hermitian_apply(
          0.5 * (h + h.adjoint()),
          [](double th) { return std::complex<double>(std::cos(th), std::sin(th)); });
      Point y = exp_map(x, vt);
      Eigen::MatrixXcd w = x.cmat() * ehalf * eta * ehalf;
      return {y, w};
    }
  }
  throw DomainError("parallel_transport: unknown manifold kind");
}

// Geodesic convex combination x #_t y = Exp_x(t Log_x(y)); t in [0, 1].
inline Point geodesic_combine(const Point& x, const Point& y, double t) {
  if (t < 0.0 || t > 1.0) throw DomainError("geodesic_combine: t must lie in [0,1]");
  if (t == 0.0) return x;
  if (t == 1.0) return y;
  return exp_map(x, scaled(log_map(x, y), t));
}

// First-order retraction; defined for the sphere (normalisation), the unitary
// group (left polar factor) and the Grassmannian (span of b + w_v).
inline Point retract(const Point& x, const Tangent& t) {
  Tangent vt = detail::sanitize_tangent(x, t, "retract");
  const auto& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Sphere: {
      Eigen::VectorXd y = x.vec() + vt.v();
      double n = y.norm();
      if (n < 1e-300) throw NumericalError("retract: zero vector after step");
      return {m, Eigen::VectorXd(y / n)};
    }
    case ManifoldKind::Unitary: {
      Eigen::MatrixXcd a = x.cmat() + vt.cm();
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
      return {m, Eigen::MatrixXcd(svd.matrixU() * svd.matrixV().adjoint())};
    }
    case ManifoldKind::Grassmann: {
      auto fr = detail::grassmann_frame(x.rmat(), m.p);
      Eigen::MatrixXd omega = detail::grassmann_omega(fr, vt.rm());
      Eigen::MatrixXd bq = fr.b + fr.bperp * omega;
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(bq);
      Eigen::MatrixXd qthin =
          qr.householderQ() * Eigen::MatrixXd::Identity(m.p + m.q, m.p);
      Eigen::MatrixXd y = qthin * qthin.transpose();
      return {m, Eigen::MatrixXd(0.5 * (y + y.transpose()))};
    }
    default:
      throw UnsupportedError("retract: not defined for this manifold");
  }
}

// Phi_x = Exp_x^-1 (Ret_x(.)); closed arctangent forms.
inline Tangent phi_map(const Point& x, const Tangent& t) {
  Tangent vt = detail::sanitize_tangent(x, t, "phi_map");
  const auto& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Sphere: {
      double r = norm(vt);
      if (r < 1e-300) return vt;
      return scaled(vt, std::atan(r) / r);
    }
    case ManifoldKind::Unitary: {
      Eigen::MatrixXcd omega = x.cmat().adjoint() * vt.cm();
      Eigen::MatrixXcd h = std::complex<double>(0, -1) * omega;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (h + h.adjoint()));
      Eigen::VectorXcd at(es.eigenvalues().size());
      for (int i = 0; i < at.size(); ++i)
        at(i) = std::complex<double>(0.0, std::atan(es.eigenvalues()(i)));
      Eigen::MatrixXcd phi =
          es.eigenvectors() * at.asDiagonal() * es.eigenvectors().adjoint();
      return {x, Eigen::MatrixXcd(x.cmat() * phi)};
    }
    case ManifoldKind::Grassmann: {
      auto fr = detail::grassmann_frame(x.rmat(), m.p);
      Eigen::MatrixXd omega = detail::grassmann_omega(fr, vt.rm());
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(omega, Eigen::ComputeThinU | Eigen::ComputeThinV);
      Eigen::VectorXd a = svd.singularValues().array().atan().matrix();
      Eigen::MatrixXd phi = svd.matrixU() * a.asDiagonal() * svd.matrixV().transpose();
      return {x, Eigen::MatrixXd(detail::grassmann_embed(fr.bperp * phi, fr.b))};
    }
    default:
      throw UnsupportedError("phi_map: not defined for this manifold");
  }
}

// Gradient of f_x(.) = d^2(x, .)/2 at y, equal to -Exp_y^-1(x).
inline Tangent sqdist_grad(const Point& x, const Point& y) {
  return scaled(log_map(y, x), -1.0);
}

// Loewner bounds of Hess f_x at y on a Hadamard manifold:
// g <= Hess f_x <= c r coth(c r) g with r = d(x, y).
inline std::pair<double, double> sqdist_hessian_bounds(const Point& x, const Point& y) {
  if (!x.manifold.is_hadamard())
    throw UnsupportedError("sqdist_hessian_bounds: Hadamard manifolds only");
  double c = std::sqrt(-x.manifold.curvature_bounds().first);
  double r = dist(x, y);
  double hi = (c == 0.0 || r == 0.0) ? 1.0 : c * r / std::tanh(c * r);
  return {1.0, hi};
}

// ---------------------------------------------------------------------------
// Random points and tangents
// ---------------------------------------------------------------------------

namespace detail {

inline Eigen::MatrixXcd ginibre(int n, Rng& rng) {
  Eigen::MatrixXcd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = std::complex<double>(rng.normal(), rng.normal());
  return g;
}

}  // namespace detail

// Haar-distributed unitary matrix (QR of a complex Ginibre matrix with the
// phase convention fixed by the diagonal of R).
inline Eigen::MatrixXcd haar_unitary(int n, Rng& rng) {
  Eigen::MatrixXcd g = detail::ginibre(n, rng);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  Eigen::MatrixXcd qmat = qr.householderQ() * Eigen::MatrixXcd::Identity(n, n);
  Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) {
    std::complex<double> d = r(i, i);
    qmat.col(i) *= (std::abs(d) > 0 ? d / std::abs(d) : 1.0);
  }
  return qmat;
}

// Gaussian ambient perturbation projected to T_x M, scaled to the requested
// Riemannian norm scale (the direction is isotropic, not the length).
inline Tangent random_tangent(const Point& x, Rng& rng, double scale = 1.0) {
  const auto& m = x.manifold;
  Coords raw;
  switch (m.kind) {
    case ManifoldKind::Euclidean: {
      Eigen::VectorXd w(m.n);
      for (int i = 0; i < m.n; ++i) w(i) = rng.normal();
      raw = w;
      break;
    }
    case ManifoldKind::Hyperbolic:
    case ManifoldKind::Sphere: {
      Eigen::VectorXd w(m.n + 1);
      for (int i = 0; i <= m.n; ++i) w(i) = rng.normal();
      raw = w;
      break;
    }
    case ManifoldKind::SpdHermitian:
    case ManifoldKind::Unitary: {
      raw = Eigen::MatrixXcd(detail::ginibre(m.n, rng));
      break;
    }
    case ManifoldKind::Grassmann: {
      const int d = m.p + m.q;
      Eigen::MatrixXd w(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) w(i, j) = rng.normal();
      raw = w;
      break;
    }
  }
  Tangent t = project_tangent(x, raw);
  double n0 = norm(t);
  if (n0 < 1e-14) return zero_tangent(x);
  return scaled(t, scale / n0);
}

inline Point random_point(const ManifoldDescriptor& m, Rng& rng, double spread = 1.0) {
  switch (m.kind) {
    case ManifoldKind::Euclidean: {
      Eigen::VectorXd x(m.n);
      for (int i = 0; i < m.n; ++i) x(i) = spread * rng.normal();
      return {m, x};
    }
    case ManifoldKind::Hyperbolic: {
      Point o = origin(m);
      return exp_map(o, random_tangent(o, rng, spread * std::abs(rng.normal())));
    }
    case ManifoldKind::Sphere: {
      Eigen::VectorXd x(m.n + 1);
      for (int i = 0; i <= m.n; ++i) x(i) = rng.normal();
      x.normalize();
      return {m, x};
    }
    case ManifoldKind::SpdHermitian: {
      Eigen::MatrixXcd g = detail::ginibre(m.n, rng);
      Eigen::MatrixXcd h = 0.5 * spread * (g + g.adjoint()) / std::sqrt(2.0 * m.n);
      return {m, detail::herm_exp(h)};
    }
    case ManifoldKind::Grassmann: {
      const int d = m.p + m.q;
      Eigen::MatrixXd g(d, m.p);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < m.p; ++j) g(i, j) = rng.normal();
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
      Eigen::MatrixXd qthin = qr.householderQ() * Eigen::MatrixXd::Identity(d, m.p);
      Eigen::MatrixXd x = qthin * qthin.transpose();
      return {m, Eigen::MatrixXd(0.5 * (x + x.transpose()))};
    }
    case ManifoldKind::Unitary:
      return {m, haar_unitary(m.n, rng)};
  }
  throw DomainError("random_point: unknown manifold kind");
}

// Orthonormal basis of T_x M for the vector-coordinate manifolds; used to
// express tangents in normal coordinates.
inline std::vector<Tangent> tangent_basis(const Point& x) {
  const auto& m = x.manifold;
  if (m.kind == ManifoldKind::Euclidean) {
    std::vector<Tangent> basis;
    for (int i = 0; i < m.n; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(m.n);
      e(i) = 1.0;
      basis.push_back({x, e});
    }
    return basis;
  }
  if (m.kind == ManifoldKind::Hyperbolic || m.kind == ManifoldKind::Sphere) {
    std::vector<Tangent> basis;
    for (int i = 0; i <= m.n && static_cast<int>(basis.size()) < m.n; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(m.n + 1);
      e(i) = 1.0;
      Tangent t = project_tangent(x, Coords(e));
      for (const Tangent& b : basis) t = add(t, scaled(b, -inner(t, b)));
      double nn = norm(t);
      if (nn > 1e-8) basis.push_back(scaled(t, 1.0 / nn));
    }
    if (static_cast<int>(basis.size()) != m.n)
      throw NumericalError("tangent_basis: failed to complete a frame");
    return basis;
  }
  throw UnsupportedError("tangent_basis: matrix manifolds not supported");
}

// Coordinates of a tangent in an orthonormal basis.
inline Eigen::VectorXd tangent_coordinates(const Tangent& t, const std::vector<Tangent>& basis) {
  Eigen::VectorXd u(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) u(i) = inner(t, basis[i]);
  return u;
}

}  // namespace manistat
