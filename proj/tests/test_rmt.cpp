#include <catch2/catch_amalgamated.hpp>

#include "manistat/gaussian.hpp"
#include "manistat/rmt.hpp"
#include "manistat/rng.hpp"
#include "manistat/special.hpp"

using namespace manistat;
using Catch::Approx;

TEST_CASE("omega2 closed values and asymptotics") {
  CHECK(omega2(1) == Approx(1.0));
  CHECK(omega2(2) == Approx(2.0 * kPi));
  CHECK(omega2(3) == Approx(std::pow(2.0 * kPi, 3) / 2.0));
  // (1/N^2) log omega2 ~ -(1/2) log(N / 2 pi) + 3/4
  double prev_gap = 1e9;
  for (int N : {16, 32, 64}) {
    double lhs = log_omega2(N) / (static_cast<double>(N) * N);
    double rhs = -0.5 * std::log(N / (2.0 * kPi)) + 0.75;
    double gap = std::abs(lhs - rhs);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap < 0.05);
}

TEST_CASE("stieltjes-wigert leading coefficients") {
  SECTION("n = 0 empty product") {
    double sigma = 0.8;
    CHECK(sw_leading_coeff_invsq(0, sigma) ==
          Approx(std::sqrt(2.0 * kPi * sigma * sigma) * std::exp(0.5 * sigma * sigma))
              .epsilon(1e-14));
  }
  SECTION("assembly reproduces the closed-form Z on H(N)") {
    for (int N : {2, 4, 8, 16}) {
      for (double sigma : {0.5, 1.0}) {
        // Z = omega_2(N)/(2^{N^2} N!) exp(-N^3 sigma^2/2) I_2,
        // I_2 = N! prod_{n<N} p_nn^{-2}
        double log_i2 = std::lgamma(N + 1.0);
        for (int n = 0; n < N; ++n) log_i2 += log_sw_leading_coeff_invsq(n, sigma);
        double log_z = log_omega2(N) - static_cast<double>(N) * N * std::log(2.0) -
                       std::lgamma(N + 1.0) -
                       0.5 * std::pow(static_cast<double>(N), 3) * sigma * sigma + log_i2;
        CHECK(std::abs(log_z - log_z_spd_hermitian(N, sigma)) < 1e-10);
      }
    }
  }
  SECTION("numeric orthonormalization oracle (moment matrix)") {
    // weight rho(u, 2 sigma^2) on (0, inf) has log-normal moments
    // M_k = sqrt(2 pi sigma^2) exp(sigma^2 (k+1)^2 / 2); the leading
    // coefficient of the n-th orthonormal polynomial satisfies
    // p_nn^-2 = (Cholesky factor of the moment matrix)_{nn}^2.
    double sigma = 0.9;
    const int nmax = 4;
    Eigen::MatrixXd moments(nmax + 1, nmax + 1);
    for (int i = 0; i <= nmax; ++i)
      for (int j = 0; j <= nmax; ++j) {
        double k = i + j;
        moments(i, j) = std::sqrt(2.0 * kPi * sigma * sigma) *
                        std::exp(0.5 * sigma * sigma * (k + 1.0) * (k + 1.0));
      }
    Eigen::LLT<Eigen::MatrixXd> llt(moments);
    REQUIRE(llt.info() == Eigen::Success);
    Eigen::MatrixXd L = llt.matrixL();
    for (int n = 0; n <= nmax; ++n) {
      double invsq = L(n, n) * L(n, n);
      CHECK(sw_leading_coeff_invsq(n, sigma) == Approx(invsq).epsilon(1e-6));
    }
  }
}

TEST_CASE("rogers-szego leading coefficients and duality") {
  CHECK(rogers_szego_leading_invsq(0, 1.3) == Approx(1.0));
  CHECK(rogers_szego_leading_invsq(2, 1.0) ==
        Approx((1.0 - std::exp(-1.0)) * (1.0 - std::exp(-2.0))).epsilon(1e-14));
  SECTION("duality through the two polynomial families") {
    int N = 4;
    for (double sigma : {0.5, 1.0}) {
      double log_zm = log_z_spd_hermitian(N, sigma);
      double log_zstar = log_z_theta_unitary(N, sigma);
      double expect = (std::pow(static_cast<double>(N), 3) - N) * sigma * sigma / 6.0;
      CHECK(std::abs((log_zm - log_zstar) - expect) < 1e-10);
    }
  }
}

TEST_CASE("trilogarithm") {
  CHECK(trilog(0.0) == 0.0);
  CHECK_THROWS_AS(trilog(1.0), DomainError);
  CHECK_THROWS_AS(trilog(-0.1), DomainError);
  SECTION("forty-term partial sum at x = exp(-1)") {
    double x = std::exp(-1.0);
    double partial = 0.0, xk = 1.0;
    for (int k = 1; k <= 40; ++k) {
      xk *= x;
      partial += xk / (static_cast<double>(k) * k * k);
    }
    CHECK(std::abs(trilog(x) - partial) < 1e-12);
  }
  SECTION("limit toward zeta(3)") {
    double partial = 0.0;
    for (int k = 1; k <= 1000000; ++k) partial += 1.0 / (static_cast<double>(k) * k * k);
    CHECK(std::abs(trilog(1.0 - 1e-8) - partial) < 1e-6);
    CHECK(zeta3() == Approx(partial).margin(1e-10));
  }
  SECTION("integral identity at t = 1") {
    double t = 1.0;
    double quad = integrate(
        [&](double x) { return (1.0 - x) * std::log1p(-std::exp(-t * x)); }, 0.0, 1.0, 1e-13);
    double expect = -(trilog(std::exp(-t)) - zeta3()) / (t * t) - kPi * kPi / 6.0 / t;
    CHECK(std::abs(quad - expect) < 1e-10);
  }
}

TEST_CASE("q-gamma product consistency") {
  // prod_{n<N} (1 - e^{-n s^2})^{N-n} = (1-q)^{(N^2-N)/2} prod_{n=2..N} Gamma_q(n)
  double sigma = 0.8;
  double q = std::exp(-sigma * sigma);
  for (int N : {3, 5, 8}) {
    double lhs = 0.0;
    for (int n = 1; n < N; ++n) lhs += (N - n) * std::log1p(-std::exp(-n * sigma * sigma));
    auto log_q_gamma = [&](int n) {
      // Gamma_q(n) = prod_{k<n} (1 - q^k)/(1 - q)
      double acc = 0.0;
      for (int k = 1; k < n; ++k) acc += std::log1p(-std::pow(q, k)) - std::log1p(-q);
      return acc;
    };
    double rhs = 0.5 * (static_cast<double>(N) * N - N) * std::log1p(-q);
    for (int n = 2; n <= N; ++n) rhs += log_q_gamma(n);
    CHECK(std::abs(lhs - rhs) < 1e-9 * std::abs(lhs));
  }
}

TEST_CASE("equilibrium measure") {
  SECTION("support collapses to 1 as t -> 0") {
    auto [a, b] = equilibrium_support(1e-12);
    CHECK(a == Approx(1.0).margin(1e-5));
    CHECK(b == Approx(1.0).margin(1e-5));
  }
  SECTION("unit mass and nonnegativity at t = 1") {
    EquilibriumCdf cdf(1.0);
    CHECK(std::abs(cdf.total_mass() - 1.0) < 1e-6);
    auto [a, b] = equilibrium_support(1.0);
    for (int i = 1; i < 50; ++i) {
      double x = a + (b - a) * i / 50.0;
      CHECK(equilibrium_density(1.0, x) >= 0.0);
    }
    CHECK(equilibrium_density(1.0, a - 1e-9) == 0.0);
    CHECK(equilibrium_density(1.0, b + 1e-9) == 0.0);
  }
  SECTION("unit mass across t") {
    for (double t : {0.25, 0.5, 2.0, 4.0}) {
      EquilibriumCdf cdf(t);
      CHECK(std::abs(cdf.total_mass() - 1.0) < 1e-6);
    }
  }
  SECTION("inverse-cdf samples have small KS distance") {
    EquilibriumCdf cdf(1.0);
    Rng rng(99);
    std::vector<SpectralSample> samples(1);
    samples[0].params = {50, std::sqrt(1.0 / 50.0)};
    const int count = 4000;
    for (int i = 0; i < count; ++i)
      samples[0].eigenvalues.push_back(cdf.quantile(rng.uniform()));
    std::sort(samples[0].eigenvalues.begin(), samples[0].eigenvalues.end());
    double ks = spectral_histogram_distance(samples);
    CHECK(ks < 1.5 / std::sqrt(static_cast<double>(count)));
  }
}

TEST_CASE("spectral distance separates matched and mismatched t") {
  // small smoke version of the ensemble comparison
  auto samples = sample_spectra(20, std::sqrt(1.0 / 20.0), 150, 424242);
  double matched = spectral_histogram_distance(samples);
  double mismatched = spectral_histogram_distance(samples, 2.0);
  CHECK(matched < mismatched);
  CHECK(matched < 0.12);
}

TEST_CASE("histogram rows sum to one") {
  auto samples = sample_spectra(10, 0.3, 40, 7);
  auto rows = spectral_histogram(samples, 24);
  double emp = 0.0, theo = 0.0;
  for (const auto& r : rows) {
    emp += r.empirical_mass;
    theo += r.nu_t_mass;
  }
  CHECK(emp == Approx(1.0).margin(1e-9));
  CHECK(theo == Approx(1.0).margin(1e-3));
}
