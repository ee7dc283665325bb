#include "pertlab/exact.hpp"

#include <algorithm>
#include <cmath>

#include "pertlab/config_space.hpp"
#include "pertlab/errors.hpp"
#include "pertlab/io.hpp"
#include "pertlab/kernels.hpp"
#include "pertlab/thermo.hpp"

namespace pertlab {

namespace {

constexpr std::uint64_t kGeneratorLimit = 1000000;
constexpr int kMaxDistributionSites = 6;
constexpr std::size_t kMaxDistributionStates = 8;

void check_distribution_caps(std::size_t k, int n) {
  if (n < 1 || n > kMaxDistributionSites || k > kMaxDistributionStates)
    throw ConfigError("full distributions are limited to n <= 6 sites and |Omega| <= 8 states");
}

}  // namespace

double GeneratorMatrix::max_exit_rate() const {
  double m = 0.0;
  for (Eigen::Index r = 0; r < Q.outerSize(); ++r)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Q, r); it; ++it)
      if (it.col() == it.row()) m = std::max(m, -it.value());
  return m;
}

double GeneratorMatrix::max_row_sum() const {
  double m = 0.0;
  for (Eigen::Index r = 0; r < Q.outerSize(); ++r) {
    double s = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Q, r); it; ++it) s += it.value();
    m = std::max(m, std::abs(s));
  }
  return m;
}

double FullDistribution::mass() const {
  double s = 0.0;
  for (double x : p) s += x;
  return s;
}

GeneratorMatrix build_generator(const ModelSpec& spec, int n, Boundary boundary, std::optional<Sector> sector) {
  if (n < 2) throw ConfigError("generator needs at least two sites");
  const std::size_t k = spec.num_states();
  const std::uint64_t size = ConfigSpace::checked_size(k, n, kGeneratorLimit);
  if (size == 0) throw ConfigError("configuration space exceeds 1e6 states");
  const ConfigSpace cs(k, n);

  GeneratorMatrix g;
  g.boundary = boundary;
  g.sites = n;
  g.num_states = k;
  g.sector = sector;

  std::vector<std::int64_t> pos(size, -1);
  std::vector<int> states(static_cast<std::size_t>(n));
  std::size_t dim = 0;
  if (sector) {
    for (std::uint64_t c = 0; c < size; ++c) {
      cs.decode(c, states);
      long long z = 0, e = 0;
      for (int s : states) {
        z += spec.zeta(s);
        e += spec.eta(s);
      }
      if (z == sector->Z && e == sector->N) {
        pos[c] = static_cast<std::int64_t>(dim++);
        g.configs.push_back(c);
      }
    }
    if (dim == 0) throw ConfigError("empty sector");
  } else {
    for (std::uint64_t c = 0; c < size; ++c) pos[c] = static_cast<std::int64_t>(c);
    dim = size;
  }

  const int bonds = boundary == Boundary::periodic ? n : n - 1;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(dim * static_cast<std::size_t>(bonds + 1));
  for (std::size_t row = 0; row < dim; ++row) {
    const std::uint64_t c = sector ? g.configs[row] : row;
    cs.decode(c, states);
    double out = 0.0;
    for (int j = 0; j < bonds; ++j) {
      const int a = states[static_cast<std::size_t>(j)];
      const int b = states[static_cast<std::size_t>((j + 1) % n)];
      for (const PairMove& m : spec.moves(a, b)) {
        const std::uint64_t target = cs.replace_pair(c, j, m.to_left, m.to_right);
        const std::int64_t col = pos[target];
        if (col < 0) throw InvariantError("rates", "move leaves its conservation sector");
        trip.emplace_back(static_cast<int>(row), static_cast<int>(col), m.rate);
        out += m.rate;
      }
    }
    if (out != 0.0) trip.emplace_back(static_cast<int>(row), static_cast<int>(row), -out);
  }
  g.Q.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  g.Q.setFromTriplets(trip.begin(), trip.end());
  g.Q.makeCompressed();
  return g;
}

FullDistribution evolve_exact(const FullDistribution& mu0, const GeneratorMatrix& gen, double duration) {
  if (!(duration >= 0.0)) throw ConfigError("evolve_exact: duration must be non-negative");
  if (mu0.p.size() != gen.dim()) throw ConfigError("evolve_exact: distribution and generator sizes differ");
  const double rate = gen.max_exit_rate();
  if (duration == 0.0 || rate == 0.0) return mu0;

  const double total = rate * duration;
  const int chunks = std::max(1, static_cast<int>(std::ceil(total / 50.0)));
  const double a = total / chunks;
  const double tol = 1e-12 / chunks;
  const Eigen::SparseMatrix<double, Eigen::ColMajor> Qt = gen.Q.transpose();

  FullDistribution mu = mu0;
  std::vector<double> v(mu.p.size()), result(mu.p.size());
  Eigen::VectorXd y(static_cast<Eigen::Index>(mu.p.size()));
  for (int chunk = 0; chunk < chunks; ++chunk) {
    v = mu.p;
    double w = std::exp(-a);
    std::fill(result.begin(), result.end(), 0.0);
    kernels::axpy(w, v, result);
    for (long kk = 1;; ++kk) {
      // Bound on the Poisson tail beyond kk - 1 terms once past the mode.
      const double kd = static_cast<double>(kk);
      if (kd > a + 1.0) {
        const double tail = w * (a / kd) / (1.0 - a / (kd + 1.0));
        if (tail <= tol) break;
      }
      if (kk > 100000) throw NumericalError("uniformization did not converge");
      Eigen::Map<const Eigen::VectorXd> vm(v.data(), static_cast<Eigen::Index>(v.size()));
      y.noalias() = Qt * vm;
      kernels::axpy(1.0 / rate, std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), v);
      w *= a / kd;
      kernels::axpy(w, v, result);
    }
    mu.p.swap(result);
  }
  return mu;
}

FullDistribution product_measure(const ModelSpec& spec, std::span<const std::pair<double, double>> densities) {
  const std::size_t k = spec.num_states();
  const int n = static_cast<int>(densities.size());
  check_distribution_caps(k, n);
  FullDistribution d;
  d.sites = n;
  d.num_states = k;
  d.p.assign(1, 1.0);
  for (int j = 0; j < n; ++j) {
    const auto [u, v] = densities[static_cast<std::size_t>(j)];
    const CanonicalPoint cp = invert_densities(spec, u, v);
    const std::vector<double> law = canonical_measure(spec, cp.theta, cp.tau);
    const std::size_t stride = d.p.size();
    std::vector<double> next(stride * k);
    for (std::size_t s = 0; s < k; ++s)
      for (std::size_t i = 0; i < stride; ++i) next[s * stride + i] = d.p[i] * law[s];
    d.p.swap(next);
  }
  return d;
}

FullDistribution point_mass(const ModelSpec& spec, std::span<const int> sites) {
  const std::size_t k = spec.num_states();
  check_distribution_caps(k, static_cast<int>(sites.size()));
  const ConfigSpace cs(k, static_cast<int>(sites.size()));
  FullDistribution d;
  d.sites = static_cast<int>(sites.size());
  d.num_states = k;
  d.p.assign(cs.size(), 0.0);
  d.p[cs.encode(sites)] = 1.0;
  return d;
}

FullDistribution reference_product_measure(const ModelSpec& spec, int n, double beta, std::size_t k,
                                           ReferenceKind kind, const WavePrediction& prediction) {
  const double eps = std::pow(static_cast<double>(n), -beta);
  std::vector<std::pair<double, double>> dens(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double x = static_cast<double>(j) / n;
    std::pair<double, double> pert{0.0, 0.0};
    if (kind == ReferenceKind::nu) pert = prediction.perturbation(k, x, n, beta);
    if (kind == ReferenceKind::nu_tilde) pert = prediction.corrected(k, x, n, beta);
    dens[static_cast<std::size_t>(j)] = {prediction.u0() + eps * pert.first, prediction.v0() + eps * pert.second};
  }
  return product_measure(spec, dens);
}

double relative_entropy(const FullDistribution& mu, const FullDistribution& nu) {
  if (mu.p.size() != nu.p.size()) throw ConfigError("relative_entropy: distributions live on different spaces");
  double h = 0.0;
  for (std::size_t i = 0; i < mu.p.size(); ++i) {
    const double m = mu.p[i];
    if (m <= 0.0) continue;
    if (nu.p[i] <= 0.0) throw DomainError("support", "reference measure vanishes where the law does not");
    h += m * std::log(m / nu.p[i]);
  }
  return h;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ConfigError("total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

std::vector<EntropyRow> entropy_trajectory(const ModelSpec& spec, int n, double beta,
                                           const WavePrediction& prediction) {
  if (!(beta > 0.0 && beta < 0.2)) throw ConfigError("beta must lie in the open interval (0, 1/5)");
  check_distribution_caps(spec.num_states(), n);
  const std::vector<double>& times = prediction.times();
  if (times.front() != 0.0) throw ConfigError("entropy_trajectory: the time grid must start at t = 0");
  const GeneratorMatrix gen = build_generator(spec, n, Boundary::periodic);
  const double speedup = std::pow(static_cast<double>(n), 1.0 + beta);
  const FullDistribution pi_n = reference_product_measure(spec, n, beta, 0, ReferenceKind::pi_abs, prediction);

  FullDistribution mu = reference_product_measure(spec, n, beta, 0, ReferenceKind::nu, prediction);
  std::vector<EntropyRow> rows;
  double t_prev = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    mu = evolve_exact(mu, gen, speedup * (times[k] - t_prev));
    t_prev = times[k];
    EntropyRow r;
    r.t = times[k];
    r.H_nu = relative_entropy(mu, reference_product_measure(spec, n, beta, k, ReferenceKind::nu, prediction));
    r.H_nu_tilde =
        relative_entropy(mu, reference_product_measure(spec, n, beta, k, ReferenceKind::nu_tilde, prediction));
    r.H_pi = relative_entropy(mu, pi_n);
    rows.push_back(r);
  }
  return rows;
}

std::string entropy_csv_body(std::span<const EntropyRow> rows) {
  std::string out = "t,H_nu,H_nutilde,H_pi\n";
  for (const auto& r : rows)
    out += io::format_double(r.t) + ',' + io::format_double(r.H_nu) + ',' + io::format_double(r.H_nu_tilde) + ',' +
           io::format_double(r.H_pi) + '\n';
  return out;
}

}  // namespace pertlab
