#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "manistat/manifold.hpp"

using namespace manistat;
using Catch::Approx;

namespace {

std::vector<ManifoldDescriptor> all_manifolds() {
  return {ManifoldDescriptor::euclidean(3),
          ManifoldDescriptor::hyperbolic(3, 1.0),
          ManifoldDescriptor::hyperbolic(2, 0.5),
          ManifoldDescriptor::spd_hermitian(3),
          ManifoldDescriptor::grassmann(2, 3),
          ManifoldDescriptor::sphere(3),
          ManifoldDescriptor::unitary(3)};
}

// Tangent norm small enough that exp is injective on every manifold
// (pi for the sphere, sqrt(2) pi/2 for the Grassmannian).
double safe_radius(const ManifoldDescriptor& m) {
  switch (m.kind) {
    case ManifoldKind::Sphere: return 2.5;
    case ManifoldKind::Grassmann: return 1.1;
    case ManifoldKind::Unitary: return 1.0;
    default: return 3.0;
  }
}

}  // namespace

TEST_CASE("descriptor invariants") {
  auto hyp = ManifoldDescriptor::hyperbolic(4, 2.0);
  CHECK(hyp.curvature_bounds().first == Approx(-4.0));
  CHECK(hyp.curvature_bounds().second == Approx(-4.0));
  CHECK(hyp.dim() == 4);
  CHECK(ManifoldDescriptor::spd_hermitian(3).dim() == 9);
  CHECK(ManifoldDescriptor::grassmann(2, 5).dim() == 10);
  CHECK(ManifoldDescriptor::sphere(2).curvature_bounds() == std::pair(1.0, 1.0));
  CHECK_THROWS_AS(ManifoldDescriptor::grassmann(4, 2), DomainError);
  CHECK_THROWS_AS(ManifoldDescriptor::hyperbolic(2, -1.0), DomainError);
}

TEST_CASE("exp_map zero vector returns the base point") {
  Rng rng(7);
  for (const auto& m : all_manifolds()) {
    Point x = random_point(m, rng);
    Point y = exp_map(x, zero_tangent(x));
    CHECK(detail::coords_distance(x.coords, y.coords) < 1e-12);
  }
}

TEST_CASE("spd exp: commuting diagonal case") {
  auto m = ManifoldDescriptor::spd_hermitian(2);
  Point x = origin(m);
  double s = 0.73;
  Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(2, 2);
  v(0, 0) = s;
  v(1, 1) = -s;
  Point y = exp_map(x, {x, v});
  CHECK(y.cmat()(0, 0).real() == Approx(std::exp(s)).epsilon(1e-12));
  CHECK(y.cmat()(1, 1).real() == Approx(std::exp(-s)).epsilon(1e-12));
  CHECK(std::abs(y.cmat()(0, 1)) < 1e-12);
}

TEST_CASE("grassmann exp matches the dense matrix-exponential lift") {
  Rng rng(11);
  SECTION("Gr(1,1) rotation of the line") {
    auto m = ManifoldDescriptor::grassmann(1, 1);
    Point x = origin(m);
    double theta = 0.3;
    Eigen::MatrixXd v(2, 2);
    v << 0, theta, theta, 0;
    Point y = exp_map(x, {x, v});
    Eigen::MatrixXd oracle = testutil::grassmann_exp_oracle(x, {x, v});
    CHECK((y.rmat() - oracle).norm() < 1e-12);
    // projector of the line spanned by (cos t, sin t) with t = theta
    Eigen::MatrixXd expect(2, 2);
    expect << std::cos(theta) * std::cos(theta), std::cos(theta) * std::sin(theta),
        std::cos(theta) * std::sin(theta), std::sin(theta) * std::sin(theta);
    CHECK((y.rmat() - expect).norm() < 1e-12);
  }
  SECTION("Gr(2,3) random tangents") {
    auto m = ManifoldDescriptor::grassmann(2, 3);
    for (int rep = 0; rep < 25; ++rep) {
      Point x = random_point(m, rng);
      Tangent v = random_tangent(x, rng, 0.9);
      Point y = exp_map(x, v);
      Eigen::MatrixXd oracle = testutil::grassmann_exp_oracle(x, v);
      CHECK((y.rmat() - oracle).norm() < 1e-10);
      CHECK(point_residual(y) < 1e-9);
    }
  }
}

TEST_CASE("log_map basics") {
  Rng rng(3);
  for (const auto& m : all_manifolds()) {
    Point x = random_point(m, rng);
    CHECK(norm(log_map(x, x)) < 1e-9);
  }
  SECTION("spd log at the identity is the principal matrix logarithm") {
    auto m = ManifoldDescriptor::spd_hermitian(3);
    Point id = origin(m);
    Point z = random_point(m, rng);
    Tangent l = log_map(id, z);
    Eigen::MatrixXcd expect = detail::spd_log(z.cmat(), "test");
    CHECK((l.cm() - expect).norm() < 1e-10);
  }
}

TEST_CASE("exp/log roundtrip on random pairs") {
  Rng rng(5);
  SECTION("hyperbolic, 100 pairs") {
    auto m = ManifoldDescriptor::hyperbolic(3, 1.0);
    for (int i = 0; i < 100; ++i) {
      Point x = random_point(m, rng);
      Point y = random_point(m, rng);
      Point back = exp_map(x, log_map(x, y));
      CHECK(detail::coords_distance(back.coords, y.coords) < 1e-10);
    }
  }
  SECTION("all manifolds, within the injectivity bound") {
    for (const auto& m : all_manifolds()) {
      for (int i = 0; i < 20; ++i) {
        Point x = random_point(m, rng);
        Tangent v = random_tangent(x, rng, rng.uniform(0.0, safe_radius(m)));
        Point y = exp_map(x, v);
        Point back = exp_map(x, log_map(x, y));
        INFO(kind_name(m.kind));
        CHECK(detail::coords_distance(back.coords, y.coords) <
              1e-9 * (1.0 + detail::coords_distance(x.coords, y.coords)));
        CHECK(point_residual(y) < 1e-8);
      }
    }
  }
}

TEST_CASE("distance axioms and closed forms") {
  Rng rng(13);
  SECTION("dist(x,x) = 0 and symmetry") {
    for (const auto& m : all_manifolds()) {
      Point x = random_point(m, rng);
      Point y = random_point(m, rng);
      CHECK(dist(x, x) == Approx(0.0).margin(1e-9));
      CHECK(dist(x, y) == Approx(dist(y, x)).margin(1e-9));
    }
  }
  SECTION("spd diagonal case") {
    auto m = ManifoldDescriptor::spd_hermitian(2);
    Point x = origin(m);
    Eigen::MatrixXcd yv = Eigen::MatrixXcd::Identity(2, 2);
    yv(0, 0) = std::exp(2.0);
    Point y = {m, yv};
    CHECK(dist(x, y) == Approx(2.0).epsilon(1e-12));
  }
  SECTION("hyperbolic geodesic additivity") {
    auto m = ManifoldDescriptor::hyperbolic(3, 1.0);
    for (int i = 0; i < 30; ++i) {
      Point x = random_point(m, rng);
      Point z = random_point(m, rng);
      double t = rng.uniform();
      Point y = geodesic_combine(x, z, t);
      CHECK(std::abs(dist(x, z) - dist(x, y) - dist(y, z)) < 1e-9);
    }
  }
  SECTION("dist(x, exp(x, v)) = |v| below the injectivity bound") {
    for (const auto& m : all_manifolds()) {
      for (int i = 0; i < 20; ++i) {
        Point x = random_point(m, rng);
        double r = rng.uniform(0.0, safe_radius(m));
        Tangent v = random_tangent(x, rng, r);
        INFO(kind_name(m.kind));
        CHECK(dist(x, exp_map(x, v)) == Approx(norm(v)).margin(1e-9).epsilon(1e-9));
      }
    }
  }
  SECTION("mismatched descriptors") {
    Point a = origin(ManifoldDescriptor::euclidean(2));
    Point b = origin(ManifoldDescriptor::euclidean(3));
    CHECK_THROWS_AS(dist(a, b), DomainError);
  }
}

TEST_CASE("cut locus detection") {
  Rng rng(17);
  SECTION("sphere antipode") {
    auto m = ManifoldDescriptor::sphere(2);
    Point x = origin(m);
    Point anti = {m, Eigen::VectorXd(-x.vec())};
    CHECK_THROWS_AS(log_map(x, anti), CutLocusError);
  }
  SECTION("grassmann orthogonal line") {
    auto m = ManifoldDescriptor::grassmann(1, 1);
    Point x = origin(m);
    Eigen::MatrixXd yv(2, 2);
    yv << 0, 0, 0, 1;
    CHECK_THROWS_AS(log_map(x, Point{m, yv}), CutLocusError);
  }
  SECTION("unitary phase pi") {
    auto m = ManifoldDescriptor::unitary(2);
    Point x = origin(m);
    Eigen::MatrixXcd yv = -Eigen::MatrixXcd::Identity(2, 2);
    CHECK_THROWS_AS(log_map(x, Point{m, yv}), CutLocusError);
  }
}

TEST_CASE("parallel transport") {
  Rng rng(19);
  SECTION("zero direction is the identity") {
    for (const auto& m : all_manifolds()) {
      Point x = random_point(m, rng);
      Tangent u = random_tangent(x, rng, 1.3);
      Tangent w = parallel_transport(x, zero_tangent(x), u);
      CHECK(detail::coords_distance(w.vec, u.vec) < 1e-9);
    }
  }
  SECTION("spd transport from the identity is g u g^dag with g = exp(v/2)") {
    auto m = ManifoldDescriptor::spd_hermitian(2);
    Point x = origin(m);
    for (int i = 0; i < 10; ++i) {
      Tangent v = random_tangent(x, rng, 1.0);
      Tangent u = random_tangent(x, rng, 0.8);
      Tangent w = parallel_transport(x, v, u);
      Eigen::MatrixXcd g = detail::herm_exp(0.5 * v.cm());
      CHECK((w.cm() - g * u.cm() * g.adjoint()).norm() < 1e-10);
    }
  }
  SECTION("spd transport matches the ODE integration oracle") {
    auto m = ManifoldDescriptor::spd_hermitian(2);
    for (int i = 0; i < 5; ++i) {
      Point x = random_point(m, rng, 0.6);
      Tangent v = random_tangent(x, rng, 0.8);
      Tangent u = random_tangent(x, rng, 1.0);
      Tangent w = parallel_transport(x, v, u);
      Eigen::MatrixXcd oracle = testutil::spd_transport_ode_oracle(x, v, u);
      CHECK((w.cm() - oracle).norm() < 1e-6);
    }
  }
  SECTION("isometry on 100 random cases") {
    Rng r2(23);
    for (const auto& m : all_manifolds()) {
      for (int i = 0; i < 15; ++i) {
        Point x = random_point(m, r2);
        Tangent v = random_tangent(x, r2, r2.uniform(0.0, safe_radius(m)));
        Tangent u = random_tangent(x, r2, r2.uniform(0.1, 2.0));
        Tangent w = parallel_transport(x, v, u);
        INFO(kind_name(m.kind));
        CHECK(norm(w) == Approx(norm(u)).epsilon(1e-10));
      }
    }
  }
  SECTION("transport of the velocity is the geodesic velocity") {
    for (const auto& m : all_manifolds()) {
      Point x = random_point(m, rng);
      Tangent v = random_tangent(x, rng, 0.7);
      Tangent w = parallel_transport(x, v, v);
      // w must equal -Log_{y}(x) scaled to |v| where y = Exp_x(v)
      Point y = exp_map(x, v);
      Tangent back = scaled(log_map(y, x), -1.0);
      INFO(kind_name(m.kind));
      CHECK(detail::coords_distance(w.vec, back.vec) < 1e-8);
    }
  }
}

TEST_CASE("geodesic combine endpoints and midpoint") {
  Rng rng(29);
  auto m = ManifoldDescriptor::hyperbolic(3, 1.0);
  Point x = random_point(m, rng);
  Point y = random_point(m, rng);
  CHECK(detail::coords_distance(geodesic_combine(x, y, 0.0).coords, x.coords) < 1e-12);
  CHECK(detail::coords_distance(geodesic_combine(x, y, 1.0).coords, y.coords) < 1e-12);
  Point mid = geodesic_combine(x, y, 0.5);
  CHECK(std::abs(dist(mid, x) - dist(mid, y)) < 1e-10);
}

TEST_CASE("retractions") {
  Rng rng(31);
  SECTION("zero tangent fixes the point") {
    for (auto kind : {ManifoldDescriptor::sphere(3), ManifoldDescriptor::unitary(3),
                      ManifoldDescriptor::grassmann(2, 3)}) {
      Point x = random_point(kind, rng);
      Point y = retract(x, zero_tangent(x));
      CHECK(detail::coords_distance(x.coords, y.coords) < 1e-10);
    }
  }
  SECTION("sphere closed form") {
    auto m = ManifoldDescriptor::sphere(2);
    Point x = origin(m);  // e1
    Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
    v(1) = 1.0;
    Point y = retract(x, {x, v});
    CHECK(y.vec()(0) == Approx(1.0 / std::sqrt(2.0)));
    CHECK(y.vec()(1) == Approx(1.0 / std::sqrt(2.0)));
  }
  SECTION("grassmann retraction is the span projector and is idempotent") {
    auto m = ManifoldDescriptor::grassmann(2, 3);
    for (int i = 0; i < 10; ++i) {
      Point x = random_point(m, rng);
      Tangent v = random_tangent(x, rng, rng.uniform(0.1, 3.0));
      Point y = retract(x, v);
      CHECK(point_residual(y) < 1e-9);
      // oracle: projector onto the columns of b + bperp omega via normal equations
      auto fr = detail::grassmann_frame(x.rmat(), m.p);
      Eigen::MatrixXd bq = fr.b + fr.bperp * detail::grassmann_omega(fr, v.rm());
      Eigen::MatrixXd proj = bq * (bq.transpose() * bq).inverse() * bq.transpose();
      CHECK((y.rmat() - proj).norm() < 1e-9);
    }
  }
  SECTION("unsupported manifolds refuse") {
    Point x = origin(ManifoldDescriptor::euclidean(2));
    CHECK_THROWS_AS(retract(x, zero_tangent(x)), UnsupportedError);
  }
  SECTION("first-order agreement with exp") {
    for (auto kind : {ManifoldDescriptor::sphere(3), ManifoldDescriptor::unitary(2),
                      ManifoldDescriptor::grassmann(2, 3)}) {
      Point x = random_point(kind, rng);
      Tangent v = random_tangent(x, rng, 1.0);
      for (double h : {1e-3, 1e-4}) {
        Point a = retract(x, scaled(v, h));
        Point b = exp_map(x, scaled(v, h));
        CHECK(dist(a, b) < 10.0 * h * h * h);  // geodesic retractions: O(h^3)
      }
    }
  }
}

TEST_CASE("phi map") {
  Rng rng(37);
  SECTION("phi(0) = 0") {
    for (auto kind : {ManifoldDescriptor::sphere(3), ManifoldDescriptor::unitary(3),
                      ManifoldDescriptor::grassmann(2, 3)}) {
      Point x = random_point(kind, rng);
      CHECK(norm(phi_map(x, zero_tangent(x))) < 1e-12);
    }
  }
  SECTION("sphere: unit vector maps to length pi/4") {
    auto m = ManifoldDescriptor::sphere(3);
    Point x = random_point(m, rng);
    Tangent v = random_tangent(x, rng, 1.0);
    CHECK(norm(phi_map(x, v)) == Approx(kPi / 4.0).epsilon(1e-12));
  }
  SECTION("exp after phi equals the retraction") {
    for (auto kind : {ManifoldDescriptor::sphere(3), ManifoldDescriptor::unitary(2),
                      ManifoldDescriptor::grassmann(2, 3)}) {
      for (int i = 0; i < 40; ++i) {
        Point x = random_point(kind, rng);
        // singular values of the horizontal coordinate up to ~10
        Tangent v = random_tangent(x, rng, rng.uniform(0.0, 10.0));
        Point via_phi = exp_map(x, phi_map(x, v));
        Point via_ret = retract(x, v);
        INFO(kind_name(kind.kind));
        CHECK(detail::coords_distance(via_phi.coords, via_ret.coords) < 1e-9);
      }
    }
  }
  SECTION("phi contraction") {
    for (auto kind : {ManifoldDescriptor::sphere(3), ManifoldDescriptor::unitary(2),
                      ManifoldDescriptor::grassmann(2, 3)}) {
      for (int i = 0; i < 40; ++i) {
        Point x = random_point(kind, rng);
        Tangent v = random_tangent(x, rng, rng.uniform(0.0, 2.0));
        Tangent phi = phi_map(x, v);
        double nv = norm(v);
        CHECK(norm(phi) <= nv + 1e-12);
        CHECK(norm(add(phi, scaled(v, -1.0))) <= nv * nv * nv + 1e-12);
      }
    }
  }
}

TEST_CASE("squared distance gradient") {
  Rng rng(41);
  SECTION("vanishes at the base point, norm equals distance") {
    for (const auto& m : all_manifolds()) {
      Point x = random_point(m, rng);
      CHECK(norm(sqdist_grad(x, x)) < 1e-9);
      Tangent v = random_tangent(x, rng, 0.5 * safe_radius(m));
      Point y = exp_map(x, v);
      INFO(kind_name(m.kind));
      CHECK(norm(sqdist_grad(x, y)) == Approx(dist(x, y)).epsilon(1e-9));
    }
  }
  SECTION("matches central differences of f_x") {
    for (const auto& m : all_manifolds()) {
      Point x = random_point(m, rng);
      Point y = exp_map(x, random_tangent(x, rng, 0.4 * safe_radius(m)));
      Tangent g = sqdist_grad(x, y);
      Tangent u = random_tangent(y, rng, 1.0);
      double h = 1e-5;
      auto fx = [&](double s) {
        double d = dist(x, exp_map(y, scaled(u, s)));
        return 0.5 * d * d;
      };
      double fd = (fx(h) - fx(-h)) / (2.0 * h);
      INFO(kind_name(m.kind));
      CHECK(fd == Approx(inner(g, u)).epsilon(1e-6).margin(1e-8));
    }
  }
}

TEST_CASE("squared distance hessian bounds") {
  Rng rng(43);
  SECTION("coincident points give (1,1)") {
    auto m = ManifoldDescriptor::hyperbolic(2, 1.0);
    Point x = random_point(m, rng);
    auto [lo, hi] = sqdist_hessian_bounds(x, x);
    CHECK(lo == 1.0);
    CHECK(hi == Approx(1.0));
  }
  SECTION("euclidean is flat") {
    auto m = ManifoldDescriptor::euclidean(3);
    Point x = random_point(m, rng);
    Point y = random_point(m, rng);
    auto [lo, hi] = sqdist_hessian_bounds(x, y);
    CHECK(lo == 1.0);
    CHECK(hi == Approx(1.0));
  }
  SECTION("hyperbolic c = 1, r = 2") {
    auto m = ManifoldDescriptor::hyperbolic(2, 1.0);
    Point x = origin(m);
    Point y = exp_map(x, random_tangent(x, rng, 2.0));
    auto [lo, hi] = sqdist_hessian_bounds(x, y);
    CHECK(lo == 1.0);
    double oracle = 2.0 / std::tanh(2.0);  // direct evaluation of c r coth(c r)
    CHECK(hi == Approx(oracle).epsilon(1e-12));
    CHECK(hi <= 1.0 + 1.0 * 2.0 + 1e-12);  // at most linear growth
  }
  SECTION("unsupported on compact manifolds") {
    auto m = ManifoldDescriptor::sphere(2);
    Point x = origin(m);
    CHECK_THROWS_AS(sqdist_hessian_bounds(x, x), UnsupportedError);
  }
}

TEST_CASE("tangent sanitation rejects bad inputs") {
  Rng rng(47);
  auto m = ManifoldDescriptor::sphere(3);
  Point x = random_point(m, rng);
  Point z = random_point(m, rng);
  SECTION("non-tangent residual") {
    Eigen::VectorXd raw = x.vec();  // purely normal component
    CHECK_THROWS_AS(exp_map(x, Tangent{x, raw}), DomainError);
  }
  SECTION("wrong anchor") {
    Tangent v = random_tangent(z, rng, 0.5);
    CHECK_THROWS_AS(exp_map(x, v), DomainError);
  }
  SECTION("spd requires a positive-definite base") {
    auto ms = ManifoldDescriptor::spd_hermitian(2);
    Eigen::MatrixXcd bad = Eigen::MatrixXcd::Identity(2, 2);
    bad(1, 1) = -0.5;
    Point xb = {ms, bad};
    CHECK_THROWS_AS(exp_map(xb, zero_tangent(xb)), DomainError);
  }
}

TEST_CASE("tangent basis spans and is orthonormal") {
  Rng rng(53);
  for (auto m : {ManifoldDescriptor::euclidean(4), ManifoldDescriptor::hyperbolic(3, 1.0),
                 ManifoldDescriptor::sphere(3)}) {
    Point x = random_point(m, rng);
    auto basis = tangent_basis(x);
    REQUIRE(static_cast<int>(basis.size()) == m.dim());
    for (std::size_t i = 0; i < basis.size(); ++i)
      for (std::size_t j = 0; j <= i; ++j)
        CHECK(inner(basis[i], basis[j]) == Approx(i == j ? 1.0 : 0.0).margin(1e-10));
    Tangent v = random_tangent(x, rng, 1.7);
    Eigen::VectorXd u = tangent_coordinates(v, basis);
    CHECK(u.norm() == Approx(norm(v)).epsilon(1e-10));
  }
}
