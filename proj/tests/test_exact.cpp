#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "helpers.hpp"
#include "pertlab/errors.hpp"
#include "pertlab/exact.hpp"
#include "pertlab/thermo.hpp"

using namespace pertlab;

namespace {

// exp(A) by scaling and squaring with a long Taylor series.
Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
  const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  int s = std::max(0, static_cast<int>(std::ceil(std::log2(std::max(norm, 1e-300)))) + 1);
  const Eigen::MatrixXd B = A / std::pow(2.0, s);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(A.rows(), A.cols()), sum = term;
  for (int k = 1; k < 30; ++k) {
    term = term * B / k;
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum;
}

WavePrediction tiny_prediction(const ModelSpec& spec, double u0, double v0, double amp, std::vector<double> times) {
  const FluxModel m(spec);
  return WavePrediction(m, u0, v0, Profile::parse("cos", amp), Profile::parse("sin", amp), 1024, std::move(times));
}

}  // namespace

TEST_SUITE("exact") {
  TEST_CASE("periodic generator of the two-lane model") {
    const GeneratorMatrix g = build_generator(testing::two_lane(), 3, Boundary::periodic);
    CHECK(g.dim() == 64);
    CHECK(g.max_row_sum() <= 1e-14);
    for (int r = 0; r < g.Q.outerSize(); ++r)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g.Q, r); it; ++it)
        if (it.col() != it.row()) CHECK(it.value() >= 0.0);
    // On a 3-ring each exclusion lane admits at most one hop (one or two particles).
    CHECK(g.max_exit_rate() == doctest::Approx(2.0));
  }

  TEST_CASE("degenerate generators") {
    const ModelSpec frozen = testing::two_lane_with({});
    const GeneratorMatrix z = build_generator(frozen, 3, Boundary::periodic);
    CHECK(z.Q.nonZeros() == 0);
    const GeneratorMatrix single = build_generator(testing::two_lane(), 2, Boundary::free, Sector{2, 2});
    CHECK(single.dim() == 1);
    CHECK(single.Q.nonZeros() == 0);
    CHECK_THROWS_AS(build_generator(testing::two_lane(), 2, Boundary::free, Sector{5, 0}), ConfigError);
    CHECK_THROWS_AS(build_generator(testing::two_lane(), 11, Boundary::periodic), ConfigError);
  }

  TEST_CASE("uniformization against a dense matrix exponential") {
    const ModelSpec spec = testing::coupled();
    const GeneratorMatrix g = build_generator(spec, 3, Boundary::periodic);
    const FullDistribution mu0 = point_mass(spec, std::vector<int>{3, 0, 1});
    for (double t : {0.0, 0.3, 2.0, 40.0}) {
      const FullDistribution mu = evolve_exact(mu0, g, t);
      const Eigen::MatrixXd P = expm(Eigen::MatrixXd(g.Q) * t);
      const Eigen::Map<const Eigen::RowVectorXd> m0(mu0.p.data(), static_cast<Eigen::Index>(mu0.p.size()));
      const Eigen::RowVectorXd expect = m0 * P;
      const std::vector<double> e(expect.data(), expect.data() + expect.size());
      CHECK(total_variation(mu.p, e) <= 1e-11);
      CHECK(std::abs(mu.mass() - 1.0) <= 1e-12);
      for (double x : mu.p) CHECK(x >= 0.0);
    }
  }

  TEST_CASE("stationary product measure and semigroup property") {
    const ModelSpec spec = testing::coupled();
    const int n = 5;
    const GeneratorMatrix g = build_generator(spec, n, Boundary::periodic);
    const std::vector<std::pair<double, double>> flat(n, {0.3, 0.6});
    const FullDistribution pi = product_measure(spec, flat);
    CHECK(total_variation(evolve_exact(pi, g, 3.0).p, pi.p) <= 1e-12);

    const FullDistribution mu0 = point_mass(spec, std::vector<int>{3, 0, 1, 2, 0});
    const FullDistribution a = evolve_exact(evolve_exact(mu0, g, 0.4), g, 0.9);
    const FullDistribution b = evolve_exact(mu0, g, 1.3);
    CHECK(total_variation(a.p, b.p) <= 1e-10);
    CHECK(evolve_exact(mu0, g, 0.0).p == mu0.p);
  }

  TEST_CASE("product measures and relative entropy") {
    const ModelSpec spec = testing::coupled();
    const std::vector<std::pair<double, double>> d1 = {{0.3, 0.6}, {0.5, 0.5}, {0.2, 0.4}};
    const std::vector<std::pair<double, double>> d2 = {{0.35, 0.5}, {0.45, 0.55}, {0.3, 0.3}};
    const FullDistribution p = product_measure(spec, d1), q = product_measure(spec, d2);
    // Marginal at site 1 equals the canonical measure at that density.
    const CanonicalPoint cp = invert_densities(spec, 0.5, 0.5);
    const auto law = canonical_measure(spec, cp.theta, cp.tau);
    for (int s = 0; s < 4; ++s) {
      double marg = 0.0;
      for (std::size_t c = 0; c < p.p.size(); ++c)
        if (static_cast<int>((c / 4) % 4) == s) marg += p.p[c];
      CHECK(std::abs(marg - law[static_cast<std::size_t>(s)]) <= 1e-14);
    }
    // Additivity over independent sites.
    double expect = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      const CanonicalPoint a = invert_densities(spec, d1[j].first, d1[j].second);
      const CanonicalPoint b = invert_densities(spec, d2[j].first, d2[j].second);
      const auto pa = canonical_measure(spec, a.theta, a.tau), pb = canonical_measure(spec, b.theta, b.tau);
      for (int s = 0; s < 4; ++s) expect += pa[s] * std::log(pa[s] / pb[s]);
    }
    CHECK(std::abs(relative_entropy(p, q) - expect) <= 1e-12);
    CHECK(relative_entropy(p, p) == 0.0);
    const FullDistribution delta = point_mass(spec, std::vector<int>{0, 0, 0});
    CHECK_THROWS_AS(relative_entropy(p, delta), DomainError);
    CHECK(relative_entropy(delta, p) > 0.0);
  }

  TEST_CASE("distribution size caps") {
    const std::vector<std::pair<double, double>> seven(7, {0.5, 0.5});
    CHECK_THROWS_AS(product_measure(testing::two_lane(), seven), ConfigError);
  }

  TEST_CASE("microcanonical measures") {
    const ModelSpec spec = testing::two_lane();
    const SectorMeasure m = microcanonical_measure(spec, 4, Sector{2, 1});
    CHECK(m.configs.size() == 24);  // C(4,2) * C(4,1)
    for (double w : m.weights) CHECK(w == doctest::Approx(1.0 / 24));
    const ModelSpec c = testing::coupled();
    const SectorMeasure a = microcanonical_measure(c, 5, Sector{2, 3}, 0.0, 0.0);
    const SectorMeasure b = microcanonical_measure(c, 5, Sector{2, 3}, 1.7, -0.9);
    for (std::size_t i = 0; i < a.weights.size(); ++i) CHECK(std::abs(a.weights[i] - b.weights[i]) <= 1e-12);
    double ez = 0.0;
    std::vector<int> st(5);
    for (std::size_t i = 0; i < b.configs.size(); ++i) {
      std::uint64_t x = b.configs[i];
      double z = 0;
      for (int j = 0; j < 5; ++j, x /= 4) z += c.zeta(static_cast<int>(x % 4));
      ez += b.weights[i] * z;
    }
    CHECK(ez == doctest::Approx(2.0).epsilon(1e-14));
    CHECK_THROWS_AS(microcanonical_measure(spec, 3, Sector{4, 0}), ConfigError);
  }

  TEST_CASE("Dirichlet form") {
    const ModelSpec spec = testing::coupled();
    const Sector sec{2, 2};
    const BlockOperator op = block_operator(spec, 4, sec);
    const std::size_t dim = op.configs.size();
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd;
    Eigen::VectorXd f(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = nd(gen);
    const std::vector<double> fv(f.data(), f.data() + f.size());
    const double d = dirichlet_form(spec, 4, sec, fv);
    CHECK(d > 0.0);
    CHECK(std::abs(d - f.dot(op.K * f)) <= 1e-12 * std::max(1.0, d));
    std::vector<double> twice = fv;
    for (double& x : twice) x *= 2;
    CHECK(dirichlet_form(spec, 4, sec, twice) == doctest::Approx(4 * d).epsilon(1e-13));
    CHECK(dirichlet_form(spec, 4, sec, std::vector<double>(dim, 3.0)) == 0.0);
  }

  TEST_CASE("spectral gap of two-state sectors is the total jump rate") {
    for (const ModelSpec& spec : {testing::two_lane(), testing::coupled()}) {
      const testing::RateTensor r(spec);
      for (const Sector& s : block_sectors(spec, 2)) {
        const auto cfg = sector_configs(spec, 2, s);
        if (cfg.size() != 2) continue;
        const int a0 = static_cast<int>(cfg[0] % 4), a1 = static_cast<int>(cfg[0] / 4);
        const int b0 = static_cast<int>(cfg[1] % 4), b1 = static_cast<int>(cfg[1] / 4);
        const double expect = r(a0, a1, b0, b1) + r(b0, b1, a0, a1);
        if (expect == 0.0) continue;
        CHECK(spectral_gap(spec, 2, s).gap == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("gap: scaling, Rayleigh quotient, sampled lower bound") {
    const ModelSpec spec = testing::coupled();
    const Sector sec{2, 3};
    const GapResult g = spectral_gap(spec, 5, sec);
    const SectorMeasure mc = microcanonical_measure(spec, 5, sec);
    auto rayleigh = [&](std::vector<double> f) {
      double mean = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) mean += mc.weights[i] * f[i];
      double var = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        f[i] -= mean;
        var += mc.weights[i] * f[i] * f[i];
      }
      return dirichlet_form(spec, 5, sec, f) / var;
    };
    CHECK(std::abs(rayleigh(g.eigenfunction) - g.gap) <= 1e-10);
    std::mt19937_64 gen(2);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> f(g.dim);
      for (double& x : f) x = nd(gen);
      CHECK(rayleigh(f) >= g.gap - 1e-10);
    }
    std::vector<Transition> scaled(spec.transitions().begin(), spec.transitions().end());
    for (auto& t : scaled) t.rate *= 2.5;
    CHECK(spectral_gap(testing::two_lane_with(scaled), 5, sec).gap == doctest::Approx(2.5 * g.gap).epsilon(1e-10));
  }

  TEST_CASE("Lanczos path agrees with a dense generalized eigensolve") {
    const ModelSpec spec = testing::two_lane();
    const Sector sec{3, 3};
    const GapResult g = spectral_gap(spec, 7, sec);  // dimension 35^2 = 1225
    REQUIRE(g.method == "lanczos");
    const BlockOperator op = block_operator(spec, 7, sec);
    Eigen::VectorXd pi(static_cast<Eigen::Index>(op.pi.size()));
    for (Eigen::Index i = 0; i < pi.size(); ++i) pi(i) = op.pi[static_cast<std::size_t>(i)];
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(op.K), Eigen::MatrixXd(pi.asDiagonal()));
    CHECK(g.gap == doctest::Approx(es.eigenvalues()(1)).epsilon(1e-9));
  }

  TEST_CASE("reducible sectors are flagged") {
    std::vector<Transition> lane1;
    const ModelSpec tasep = testing::two_lane();
    for (const auto& t : tasep.transitions())
      if (t.from_left == 2 || (t.from_left == 3 && t.to_left == 1)) lane1.push_back(t);
    const ModelSpec frozen = testing::two_lane_with(lane1);
    CHECK_THROWS_AS(spectral_gap(frozen, 3, Sector{0, 1}), InvariantError);
    const GapReport rep = gap_scaling_report(frozen, 2, 3);
    CHECK_FALSE(rep.bounded);
    CHECK_FALSE(rep.violations.empty());
  }

  TEST_CASE("gap scan is invariant under relabeling the local states") {
    const ModelSpec spec = testing::coupled();
    const int perm[4] = {2, 0, 3, 1};  // old index -> new index
    std::vector<std::string> labels(4);
    std::vector<int> zeta(4), eta(4);
    std::vector<double> pi(4);
    for (int s = 0; s < 4; ++s) {
      labels[perm[s]] = spec.labels()[s];
      zeta[perm[s]] = spec.zeta(s);
      eta[perm[s]] = spec.eta(s);
      pi[perm[s]] = spec.pi(s);
    }
    std::vector<Transition> rates;
    for (const auto& t : spec.transitions())
      rates.push_back({perm[t.from_left], perm[t.from_right], perm[t.to_left], perm[t.to_right], t.rate});
    const ModelSpec relabeled = ModelSpec::create(labels, zeta, eta, pi, rates);
    const GapReport a = gap_scaling_report(spec, 2, 5), b = gap_scaling_report(relabeled, 2, 5);
    REQUIRE(a.worst_W.size() == b.worst_W.size());
    for (std::size_t i = 0; i < a.worst_W.size(); ++i)
      CHECK(a.worst_W[i].second == doctest::Approx(b.worst_W[i].second).epsilon(1e-10));
  }

  TEST_CASE("entropy trajectory structure") {
    const ModelSpec spec = testing::two_lane();
    std::vector<double> times;
    for (int i = 0; i < 8; ++i) times.push_back(0.04 * i);
    const auto rows = entropy_trajectory(spec, 4, 0.1, tiny_prediction(spec, 0.3, 0.7, 0.2, times));
    REQUIRE(rows.size() == 8);
    CHECK(rows[0].H_nu == 0.0);
    CHECK(rows[0].H_pi > 0.0);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].H_pi <= rows[i - 1].H_pi + 1e-13);
    // Decoupled model: the corrected reference equals the plain one.
    for (const auto& r : rows) CHECK(r.H_nu == r.H_nu_tilde);

    const auto eq = entropy_trajectory(spec, 4, 0.1, tiny_prediction(spec, 0.3, 0.7, 0.0, times));
    for (const auto& r : eq) {
      CHECK(std::abs(r.H_nu) <= 1e-10);
      CHECK(std::abs(r.H_pi) <= 1e-10);
    }
    CHECK_THROWS_AS(entropy_trajectory(spec, 4, 0.3, tiny_prediction(spec, 0.3, 0.7, 0.2, times)), ConfigError);
  }
}
