#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "pertlab/errors.hpp"
#include "pertlab/thermo.hpp"
#include "pertlab/waves.hpp"

using namespace pertlab;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double l1_error_vs_oracle(int M, double amp, double quad, double lin, double t) {
  std::vector<double> w0(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i) w0[static_cast<std::size_t>(i)] = amp * std::cos(kTwoPi * (i + 0.5) / M);
  const std::vector<double> snaps = {t};
  const ScalarSolution sol = solve_scalar_conservation(w0, {quad, lin}, t, snaps);
  const ProfileFn init = [amp](double x) { return amp * std::cos(kTwoPi * x); };
  double err = 0.0;
  for (int i = 0; i < M; ++i) {
    const double exact = characteristics_oracle(init, -amp, amp, quad, lin, t, (i + 0.5) / M);
    err += std::abs(sol.states[0][static_cast<std::size_t>(i)] - exact) / M;
  }
  return err;
}

// Second-order coefficients straight from finite differences of the fluxes in
// the (u, v) frame, contracted with the eigenvectors.
struct FdCoeffs {
  double a1, a2, a3, b1, b2, b3;
};

FdCoeffs fd_coeffs(const FluxModel& m, double u, double v, const EigenStructure& e) {
  const double h = 1e-3;
  auto second = [&](bool psi, const Eigen::Vector2d& x, const Eigen::Vector2d& y) {
    auto F = [&](const Eigen::Vector2d& p) {
      const auto f = m.macro_flux(u + p(0), v + p(1));
      return psi ? f.second : f.first;
    };
    return (F(h * (x + y)) - F(h * (x - y)) - F(h * (y - x)) + F(-h * (x + y))) / (4 * h * h);
  };
  auto coeff = [&](const Eigen::Vector2d& row, const Eigen::Vector2d& x, const Eigen::Vector2d& y) {
    return row(0) * second(false, x, y) + row(1) * second(true, x, y);
  };
  return {coeff(e.l, e.r, e.r), coeff(e.l, e.r, e.s), coeff(e.l, e.s, e.s),
          coeff(e.m, e.s, e.s), coeff(e.m, e.r, e.s), coeff(e.m, e.r, e.r)};
}

}  // namespace

TEST_SUITE("waves") {
  TEST_CASE("eigenstructure conventions") {
    Eigen::Matrix2d D;
    D << 0.4, 0.0, 0.0, -0.4;
    EigenStructure e = eigen_structure(D);
    CHECK(e.lambda == doctest::Approx(0.4));
    CHECK(e.r(0) == doctest::Approx(1.0));
    CHECK(e.mu == doctest::Approx(-0.4));

    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    int tested = 0;
    while (tested < 200) {
      D << d(gen), d(gen), d(gen), d(gen);
      const double disc = std::pow(D(0, 0) - D(1, 1), 2) + 4 * D(0, 1) * D(1, 0);
      if (disc < 1e-6) continue;
      ++tested;
      e = eigen_structure(D);
      CHECK((D * e.r - e.lambda * e.r).norm() <= 1e-12);
      CHECK((D * e.s - e.mu * e.s).norm() <= 1e-12);
      CHECK(e.r.norm() == doctest::Approx(1.0));
      CHECK(e.l.dot(e.r) == doctest::Approx(1.0));
      CHECK(std::abs(e.l.dot(e.s)) <= 1e-12);
      CHECK(e.m.dot(e.s) == doctest::Approx(1.0));
      CHECK(std::abs(e.r(0)) >= std::abs(e.s(0)));
      CHECK((e.r(0) > 0 || (e.r(0) == 0 && e.r(1) > 0)));
    }
  }

  TEST_CASE("hyperbolicity guards") {
    Eigen::Matrix2d D;
    D << 0.1, 0.0, 0.0, 0.1;
    try {
      eigen_structure(D);
      FAIL("expected a domain error");
    } catch (const DomainError& e) {
      CHECK(e.guard() == "strict-hyperbolicity");
    }
    D << 0.0, 1.0, -1.0, 0.0;
    try {
      eigen_structure(D);
      FAIL("expected a domain error");
    } catch (const DomainError& e) {
      CHECK(e.guard() == "weak-hyperbolicity");
    }
  }

  TEST_CASE("two-lane coefficients decouple") {
    const FluxModel m(testing::two_lane());
    const GeoCoeffs c = geo_coefficients(m, 0.3, 0.7);
    CHECK(c.a1 == doctest::Approx(-2.0).epsilon(1e-8));
    CHECK(c.b1 == doctest::Approx(-2.0).epsilon(1e-8));
    CHECK(c.a2 == 0.0);
    CHECK(c.b2 == 0.0);
    CHECK(c.a3 == 0.0);
    CHECK(c.b3 == 0.0);
    CHECK(c.genuinely_nonlinear());
  }

  TEST_CASE("coupled coefficients match finite differences of the fluxes") {
    const FluxModel m(testing::coupled());
    for (auto [u, v] : {std::pair{0.3, 0.6}, std::pair{0.5, 0.4}, std::pair{0.7, 0.25}}) {
      const NormalizedFrame f = normalize_coordinates(m, u, v);
      const GeoCoeffs c = geo_coefficients(m, u, v);
      const FdCoeffs o = fd_coeffs(m, u, v, f.eigen);
      CHECK(c.a1 == doctest::Approx(o.a1).epsilon(1e-5));
      CHECK(c.a2 == doctest::Approx(o.a2).epsilon(1e-5));
      CHECK(c.a3 == doctest::Approx(o.a3).epsilon(1e-5));
      CHECK(c.b1 == doctest::Approx(o.b1).epsilon(1e-5));
      CHECK(c.b2 == doctest::Approx(o.b2).epsilon(1e-5));
      CHECK(c.b3 == doctest::Approx(o.b3).epsilon(1e-5));
      CHECK(c.frame_discrepancy <= 1e-6);
      CHECK(c.a2 != 0.0);
      // The normalized Jacobian is diag(lambda, mu).
      const Eigen::Matrix2d J = f.jacobian(m);
      CHECK(J(0, 0) == doctest::Approx(f.eigen.lambda));
      CHECK(std::abs(J(0, 1)) <= 1e-10);
      CHECK(std::abs(J(1, 0)) <= 1e-10);
    }
  }

  TEST_CASE("profiles") {
    const Profile p = Profile::parse("cos", 0.3);
    CHECK(p(0.0) == doctest::Approx(0.3));
    CHECK(p.derivative(0.25) == doctest::Approx(-kTwoPi * 0.3));
    CHECK(Profile::parse("one", 2.0)(0.7) == 2.0);
    CHECK_THROWS_AS(Profile::parse("tan"), ConfigError);
  }

  TEST_CASE("periodic interpolation") {
    const PeriodicGrid g{8};
    std::vector<double> vals(8);
    for (int i = 0; i < 8; ++i) vals[static_cast<std::size_t>(i)] = i;
    CHECK(g.interpolate(vals, g.center(3)) == doctest::Approx(3.0));
    CHECK(g.interpolate(vals, 0.0) == doctest::Approx(3.5));  // between cell 7 and cell 0
    CHECK(g.interpolate(vals, 1.0 + g.center(2)) == doctest::Approx(2.0));
    CHECK(g.interpolate(vals, -1.0 + g.center(2)) == doctest::Approx(2.0));
  }

  TEST_CASE("characteristics oracle is exact for linear transport") {
    const ProfileFn w0 = [](double x) { return 0.2 * std::sin(kTwoPi * x); };
    for (double x : {0.1, 0.5, 0.93})
      CHECK(characteristics_oracle(w0, -0.2, 0.2, 0.0, 0.7, 0.3, x) ==
            doctest::Approx(0.2 * std::sin(kTwoPi * (x - 0.21))).epsilon(1e-11));
  }

  TEST_CASE("Godunov solver: accuracy, convergence, conservation") {
    const double amp = 0.3, quad = -2.0, t = 0.2;
    const double e256 = l1_error_vs_oracle(256, amp, quad, 0.0, t);
    const double e512 = l1_error_vs_oracle(512, amp, quad, 0.0, t);
    const double e1024 = l1_error_vs_oracle(1024, amp, quad, 0.0, t);
    CHECK(e1024 <= 2.0 / 1024);
    CHECK(std::log2(e256 / e512) >= 0.9);
    CHECK(std::log2(e512 / e1024) >= 0.9);

    std::vector<double> w0(1024);
    for (int i = 0; i < 1024; ++i) w0[static_cast<std::size_t>(i)] = amp * std::cos(kTwoPi * (i + 0.5) / 1024);
    const std::vector<double> snaps = {0.0, 0.1, 0.2};
    const ScalarSolution sol = solve_scalar_conservation(w0, {quad, 0.15}, 0.2, snaps);
    CHECK(sol.max_mass_change <= 1e-12);
    CHECK(sol.states[0] == w0);
    CHECK(sol.shock_time == doctest::Approx(1.0 / (2.0 * amp * kTwoPi)).epsilon(1e-4));
  }

  TEST_CASE("solver refuses horizons past the shock estimate") {
    std::vector<double> w0(256);
    for (int i = 0; i < 256; ++i) w0[static_cast<std::size_t>(i)] = std::cos(kTwoPi * (i + 0.5) / 256);
    const std::vector<double> snaps = {0.2};
    try {
      solve_scalar_conservation(w0, {-2.0, 0.0}, 0.2, snaps);
      FAIL("expected a domain error");
    } catch (const DomainError& e) {
      CHECK(e.guard() == "shock-time");
    }
  }

  TEST_CASE("decoupled model: corrections vanish and profiles coincide bitwise") {
    const FluxModel m(testing::two_lane());
    const WavePrediction p(m, 0.3, 0.7, Profile::parse("cos", 0.3), Profile::parse("sin", 0.3), 1024, {0.0, 0.1, 0.2});
    for (std::size_t k = 0; k < p.times().size(); ++k) {
      CHECK(p.correction(k).identically_zero());
      for (int n : {16, 256}) {
        const ProfilePair a = reconstruct_profiles(p.field(k), p.eigen(), n, 0.1);
        const ProfilePair b = corrected_profiles(p.field(k), p.correction(k), p.eigen(), n, 0.1);
        CHECK(a.u == b.u);
        CHECK(a.v == b.v);
      }
    }
    // At t = 0 the reconstruction reproduces the initial profiles.
    const ProfilePair a = reconstruct_profiles(p.field(0), p.eigen(), 64, 0.1);
    for (int j = 0; j < 64; ++j) {
      CHECK(a.u[static_cast<std::size_t>(j)] == doctest::Approx(0.3 * std::cos(kTwoPi * j / 64)).epsilon(1e-5));
      CHECK(a.v[static_cast<std::size_t>(j)] == doctest::Approx(0.3 * std::sin(kTwoPi * j / 64)).epsilon(1e-5));
    }
  }

  TEST_CASE("two-lane waves solve each lane's Burgers equation") {
    const FluxModel m(testing::two_lane());
    const WavePrediction p(m, 0.3, 0.7, Profile::parse("cos", 0.3), Profile::parse("zero", 0.0), 2048, {0.15});
    const ProfileFn init = [](double x) { return 0.3 * std::cos(kTwoPi * x); };
    const WaveField& f = p.field(0);
    double err = 0.0;
    for (int i = 0; i < f.grid.cells; ++i)
      err += std::abs(f.sigma[static_cast<std::size_t>(i)] -
                      characteristics_oracle(init, -0.3, 0.3, -2.0, 0.0, 0.15, f.grid.center(i))) / f.grid.cells;
    CHECK(err <= 2.0 / 2048);
  }

  TEST_CASE("coupled corrections against the closed form at t = 0") {
    const FluxModel m(testing::coupled());
    const double u0 = 0.3, v0 = 0.6, A = 0.2;
    const WavePrediction p(m, u0, v0, Profile::parse("cos", A), Profile::parse("sin", A), 4096, {0.0, 0.2});
    const EigenStructure& e = p.eigen();
    const GeoCoeffs& c = p.coeffs();
    // sigma0 = l.(u*, v*), delta0 = m.(u*, v*); both have zero mean.
    auto sig = [&](double x) { return A * (e.l(0) * std::cos(kTwoPi * x) + e.l(1) * std::sin(kTwoPi * x)); };
    auto del = [&](double x) { return A * (e.m(0) * std::cos(kTwoPi * x) + e.m(1) * std::sin(kTwoPi * x)); };
    auto dsig = [&](double x) { return A * kTwoPi * (-e.l(0) * std::sin(kTwoPi * x) + e.l(1) * std::cos(kTwoPi * x)); };
    auto ddel = [&](double x) { return A * kTwoPi * (-e.m(0) * std::sin(kTwoPi * x) + e.m(1) * std::cos(kTwoPi * x)); };
    auto isig = [&](double x) { return A / kTwoPi * (e.l(0) * std::sin(kTwoPi * x) + e.l(1) * (1 - std::cos(kTwoPi * x))); };
    auto idel = [&](double x) { return A / kTwoPi * (e.m(0) * std::sin(kTwoPi * x) + e.m(1) * (1 - std::cos(kTwoPi * x))); };
    const double gap = e.lambda - e.mu;
    const CorrectionField& cf = p.correction(0);
    CHECK_FALSE(cf.identically_zero());
    for (double x1 : {0.05, 0.37, 0.8})
      for (double x2 : {0.12, 0.5, 0.91}) {
        const double sb = (c.a2n * sig(x1) * del(x2) + c.a2n * dsig(x1) * idel(x2) + 0.5 * c.a3 * del(x2) * del(x2)) / gap;
        const double db = -(c.b2n * sig(x1) * del(x2) + c.b2n * ddel(x2) * isig(x1) + 0.5 * c.b3 * sig(x1) * sig(x1)) / gap;
        CHECK(cf.sigma_bar(x1, x2) == doctest::Approx(sb).epsilon(1e-4).scale(1.0));
        CHECK(cf.delta_bar(x1, x2) == doctest::Approx(db).epsilon(1e-4).scale(1.0));
      }
    const auto [ms, md] = p.correction(1).max_abs();
    CHECK(ms > 1e-3);
    CHECK(md > 1e-3);
    // Periodicity of the corrected profiles.
    for (double x : {0.0, 0.13, 0.5, 0.77}) {
      const auto a = p.corrected(1, x, 64, 0.1), b = p.corrected(1, x + 1.0, 64, 0.1);
      CHECK(std::abs(a.first - b.first) <= 1e-10);
      CHECK(std::abs(a.second - b.second) <= 1e-10);
    }
  }

  TEST_CASE("prediction rejects unknown times") {
    const FluxModel m(testing::two_lane());
    const WavePrediction p(m, 0.3, 0.7, Profile::parse("cos", 0.3), Profile::parse("sin", 0.3), 256, {0.1});
    CHECK(p.time_index(0.1) == 0);
    CHECK_THROWS_AS(p.time_index(0.2), ConfigError);
  }
}
