#pragma once

#include <unsupported/Eigen/MatrixFunctions>

#include "manistat/manifold.hpp"
#include "manistat/rng.hpp"

namespace testutil {

using namespace manistat;

// Random isometry of the hyperboloid model: exp of a Lorentz-algebra element
// (boosts + rotations), an element of O(1,n)+.
inline Eigen::MatrixXd random_lorentz_isometry(int n, Rng& rng, double scale = 0.7) {
  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (int i = 1; i <= n; ++i) {
    double b = scale * rng.normal();
    xi(0, i) = b;
    xi(i, 0) = b;
  }
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) {
      double w = scale * rng.normal();
      xi(i, j) = w;
      xi(j, i) = -w;
    }
  return xi.exp();
}

inline Point apply_lorentz(const Eigen::MatrixXd& g, const Point& x) {
  return {x.manifold, Eigen::VectorXd(g * x.vec())};
}

// Dense matrix-exponential oracle for the Grassmann exponential: builds the
// skew lift w_hat of the tangent and conjugates the projector by exp(w_hat).
inline Eigen::MatrixXd grassmann_exp_oracle(const Point& x, const Tangent& v) {
  const int p = x.manifold.p, q = x.manifold.q;
  auto fr = manistat::detail::grassmann_frame(x.rmat(), p);
  Eigen::MatrixXd omega = manistat::detail::grassmann_omega(fr, v.rm());
  Eigen::MatrixXd what = Eigen::MatrixXd::Zero(p + q, p + q);
  what.topRightCorner(p, q) = -omega.transpose();
  what.bottomLeftCorner(q, p) = omega;
  Eigen::MatrixXd g(p + q, p + q);
  g.leftCols(p) = fr.b;
  g.rightCols(q) = fr.bperp;
  Eigen::MatrixXd lift = (g * what * g.transpose()).exp();
  return lift * x.rmat() * lift.transpose();
}

// RK4 integration of the parallel-transport ODE on H(N):
// U' = (c' x^-1 U + U x^-1 c')/2 along the geodesic c(t) = Exp_x(t v).
inline Eigen::MatrixXcd spd_transport_ode_oracle(const Point& x, const Tangent& v,
                                                 const Tangent& u, int steps = 200) {
  auto geo = [&](double t) { return exp_map(x, scaled(v, t)).cmat(); };
  auto vel = [&](double t) {
    double h = 1e-6;
    return Eigen::MatrixXcd(((geo(t + h) - geo(t - h)) / (2 * h)).eval());
  };
  auto rhs = [&](double t, const Eigen::MatrixXcd& U) {
    Eigen::MatrixXcd xm = geo(t);
    Eigen::MatrixXcd cdot = vel(t);
    Eigen::MatrixXcd xinvU = xm.llt().solve(U);
    Eigen::MatrixXcd xinvcd = xm.llt().solve(cdot);
    return Eigen::MatrixXcd(0.5 * (cdot * xinvU + U * xinvcd));
  };
  Eigen::MatrixXcd U = u.cm();
  double h = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    double t = k * h;
    Eigen::MatrixXcd k1 = rhs(t, U);
    Eigen::MatrixXcd k2 = rhs(t + 0.5 * h, U + 0.5 * h * k1);
    Eigen::MatrixXcd k3 = rhs(t + 0.5 * h, U + 0.5 * h * k2);
    Eigen::MatrixXcd k4 = rhs(t + h, U + h * k3);
    U += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return U;
}

}  // namespace testutil
