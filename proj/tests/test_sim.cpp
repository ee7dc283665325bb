#include <cmath>
#include <map>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "pertlab/errors.hpp"
#include "pertlab/exact.hpp"
#include "pertlab/sim.hpp"
#include "pertlab/thermo.hpp"

using namespace pertlab;

namespace {

SimParams base_params(int n) {
  SimParams p;
  p.n = n;
  p.beta = 0.1;
  p.t_end = 0.2;
  p.u0 = 0.3;
  p.v0 = 0.7;
  return p;
}

}  // namespace

TEST_SUITE("sim") {
  TEST_CASE("Fenwick search agrees with a linear scan") {
    Rng rng(1);
    std::vector<double> w(37);
    for (auto& x : w) x = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    FenwickTree t(w);
    for (int step = 0; step < 2000; ++step) {
      if (step % 3 == 0) {
        const auto i = static_cast<std::size_t>(rng.next() % w.size());
        const double nv = rng.uniform();
        t.add(i, nv - w[i]);
        w[i] = nv;
      }
      double total = 0.0;
      for (double x : w) total += x;
      CHECK(t.total() == doctest::Approx(total));
      const double target = rng.uniform() * total;
      std::size_t expect = 0;
      double acc = 0.0;
      while (expect + 1 < w.size() && acc + w[expect] <= target) acc += w[expect++];
      CHECK(t.find(target) == expect);
    }
  }

  TEST_CASE("rng is deterministic per seed") {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 10; ++i) {
      const auto x = a.next();
      CHECK(x == b.next());
      differs = differs || x != c.next();
    }
    CHECK(differs);
  }

  TEST_CASE("evolution conserves totals and keeps the rate cache coherent") {
    const ModelSpec spec = testing::coupled();
    SimParams p = base_params(200);
    p.u_star = Profile::parse("cos", 0.3);
    p.v_star = Profile::parse("sin", 0.3);
    Rng rng(9);
    Configuration c = sample_initial(spec, p, rng);
    const auto z = c.Z(), n = c.N();
    const EvolveStats s = evolve(c, 20000.0, rng, true);
    CHECK(s.events > 1000000);
    CHECK(s.cache_checks >= 10);
    CHECK(c.Z() == z);
    CHECK(c.N() == n);
    CHECK(c.cache_coherent());

    Configuration d = c;
    const auto before = std::vector<int>(d.sites().begin(), d.sites().end());
    CHECK(evolve(d, 0.0, rng).events == 0);
    CHECK(std::vector<int>(d.sites().begin(), d.sites().end()) == before);
  }

  TEST_CASE("frozen configuration advances to the end without events") {
    const ModelSpec spec = testing::two_lane();
    Configuration c(spec, std::vector<int>(10, 3));  // every slot occupied
    Rng rng(1);
    CHECK(evolve(c, 100.0, rng).events == 0);
  }

  TEST_CASE("equilibrium sampling: mean density and determinism") {
    const ModelSpec spec = testing::two_lane();
    const SimParams p = base_params(100000);
    Rng r1(5), r2(5);
    const Configuration a = sample_initial(spec, p, r1);
    const Configuration b = sample_initial(spec, p, r2);
    CHECK(std::vector<int>(a.sites().begin(), a.sites().end()) == std::vector<int>(b.sites().begin(), b.sites().end()));
    const double mean = static_cast<double>(a.Z()) / p.n;
    const double stderr_ = std::sqrt(0.3 * 0.7 / p.n);
    CHECK(std::abs(mean - 0.3) <= 3 * stderr_);
  }

  TEST_CASE("perturbed sampling tracks the profile blockwise") {
    const ModelSpec spec = testing::two_lane();
    SimParams p = base_params(10000);
    p.u_star = Profile::parse("cos", 1.0);
    p.u0 = 0.5;
    const LocalEquilibrium leq(spec, p);
    Rng rng(17);
    const Configuration c = leq.sample(rng);
    const int block = 1000;
    for (int b = 0; b < p.n / block; ++b) {
      double observed = 0.0, expected = 0.0, var = 0.0;
      for (int j = b * block; j < (b + 1) * block; ++j) {
        observed += spec.zeta(c.site(j));
        const auto law = leq.site_law(j);
        double m = 0.0;
        for (int s = 0; s < 4; ++s) m += law[static_cast<std::size_t>(s)] * spec.zeta(s);
        expected += m;
        var += m * (1 - m);
        // The per-site law is the canonical measure at the profile density.
        CHECK(m == doctest::Approx(0.5 + p.amplitude() * std::cos(2 * std::numbers::pi * j / p.n)).epsilon(1e-10));
      }
      CHECK(std::abs(observed - expected) <= 3 * std::sqrt(var));
    }
  }

  TEST_CASE("sampling refuses profiles outside the physical domain") {
    SimParams p = base_params(256);
    p.u_star = Profile::parse("cos", 1.0);  // 0.3 - 256^-0.1 < 0
    Rng rng(1);
    CHECK_THROWS_AS(sample_initial(testing::two_lane(), p, rng), DomainError);
  }

  TEST_CASE("beta guard") {
    SimParams p = base_params(64);
    p.beta = 0.3;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.beta = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
  }

  TEST_CASE("block averages") {
    const ModelSpec spec = testing::two_lane();
    Rng rng(3);
    const Configuration c = sample_initial(spec, base_params(50), rng);
    const auto [z1, e1] = empirical_profile(c, 1);
    for (int j = 0; j < 50; ++j) CHECK(z1[static_cast<std::size_t>(j)] == spec.zeta(c.site(j)));
    const auto [zn, en] = empirical_profile(c, 50);
    for (double x : zn) CHECK(x == doctest::Approx(static_cast<double>(c.Z()) / 50).epsilon(1e-15));
    for (int l : {3, 7, 20}) {
      const auto [zl, el] = empirical_profile(c, l);
      double s = 0.0;
      for (double x : zl) s += x;
      CHECK(s / 50 == doctest::Approx(static_cast<double>(c.Z()) / 50).epsilon(1e-12));
    }
    CHECK_THROWS_AS(empirical_profile(c, 0), ConfigError);
  }

  TEST_CASE("corollary residual at t = 0 is a centred fluctuation") {
    const ModelSpec spec = testing::two_lane();
    SimParams p = base_params(4096);
    p.u_star = Profile::parse("cos", 0.3);
    p.v_star = Profile::parse("sin", 0.3);
    const FluxModel m(spec);
    const WavePrediction pred(m, p.u0, p.v0, p.u_star, p.v_star, 1024, {0.0});
    const TestFunction g = TestFunction::parse("one");
    const LocalEquilibrium leq(spec, p);
    double var_u = 0.0;
    for (int j = 0; j < p.n; ++j) {
      const auto law = leq.site_law(j);
      const double mu = law[2] + law[3];
      var_u += mu * (1 - mu);
    }
    const double sd = std::pow(p.n, -1.0 + p.beta) * std::sqrt(var_u);
    Rng rng(21);
    const Configuration c = leq.sample(rng);
    const auto [ru, rv] = corollary_residual(c, p, pred, 0, g);
    CHECK(std::abs(ru) <= 5 * sd);
    CHECK(std::isfinite(rv));
  }

  TEST_CASE("pure equilibrium residuals average to zero") {
    const ModelSpec spec = testing::two_lane();
    const SimParams p = base_params(256);
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 100; ++s) seeds.push_back(s);
    const std::vector<double> times = {0.1};
    const std::vector<TestFunction> tests = {TestFunction::parse("one"), TestFunction::parse("cos")};
    const ResidualReport r = run_experiment(spec, p, seeds, times, tests);
    REQUIRE(r.aggregates.size() == 2);
    for (const auto& a : r.aggregates) {
      CHECK(a.count == 100);
      CHECK(std::abs(a.mean_u) <= 3 * a.stderr_u);
      CHECK(std::abs(a.mean_v) <= 3 * a.stderr_v);
    }
  }

  TEST_CASE("experiments are reproducible and thread-count independent") {
    const ModelSpec spec = testing::coupled();
    SimParams p = base_params(128);
    p.u0 = 0.3;
    p.v0 = 0.6;
    p.u_star = Profile::parse("cos", 0.2);
    p.v_star = Profile::parse("sin", 0.2);
    const std::vector<std::uint64_t> seeds = {4, 8, 15, 16, 23, 42};
    const std::vector<double> times = {0.05, 0.1};
    const std::vector<TestFunction> tests = {TestFunction::parse("sin")};
    ExperimentOptions one, four;
    four.threads = 4;
    const ResidualReport a = run_experiment(spec, p, seeds, times, tests, one);
    const ResidualReport b = run_experiment(spec, p, seeds, times, tests, one);
    const ResidualReport c = run_experiment(spec, p, seeds, times, tests, four);
    CHECK(a.samples_csv_body() == b.samples_csv_body());
    CHECK(a.samples_csv_body() == c.samples_csv_body());
    CHECK(a.aggregates_csv_body() == c.aggregates_csv_body());
    CHECK(a.samples.size() == seeds.size() * times.size());

    const ResidualReport empty = run_experiment(spec, p, {}, times, tests);
    CHECK(empty.samples.empty());
    CHECK(empty.aggregates.empty());
  }

  TEST_CASE("simulated law matches exact evolution at n = 4") {
    const ModelSpec spec = testing::two_lane();
    const std::vector<int> start = {3, 3, 0, 0};  // sector Z = 2, N = 2
    const double duration = 0.7;
    const GeneratorMatrix gen = build_generator(spec, 4, Boundary::periodic);
    const FullDistribution exact = evolve_exact(point_mass(spec, start), gen, duration);
    std::vector<double> hist(exact.p.size(), 0.0);
    const int samples = 200000;
    Rng rng(2024);
    for (int i = 0; i < samples; ++i) {
      Configuration c(spec, start);
      evolve(c, duration, rng);
      std::uint64_t idx = 0, mul = 1;
      for (int j = 0; j < 4; ++j, mul *= 4) idx += static_cast<std::uint64_t>(c.site(j)) * mul;
      hist[idx] += 1.0 / samples;
    }
    CHECK(total_variation(hist, exact.p) <= 0.01);
  }
}
