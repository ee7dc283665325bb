#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <set>
#include <thread>

#include <Eigen/Dense>

#include "pertlab/config_space.hpp"
#include "pertlab/errors.hpp"
#include "pertlab/exact.hpp"
#include "pertlab/io.hpp"
#include "pertlab/thermo.hpp"

namespace pertlab {

namespace {

constexpr std::uint64_t kBlockLimit = 10000000;
constexpr std::size_t kDenseLimit = 800;

ConfigSpace block_space(const ModelSpec& spec, int l) {
  if (l < 1) throw ConfigError("block length must be positive");
  if (ConfigSpace::checked_size(spec.num_states(), l, kBlockLimit) == 0)
    throw ConfigError("block configuration space exceeds 1e7 states");
  return ConfigSpace(spec.num_states(), l);
}

Sector totals(const ModelSpec& spec, std::span<const int> states) {
  Sector s;
  for (int x : states) {
    s.Z += spec.zeta(x);
    s.N += spec.eta(x);
  }
  return s;
}

std::string sector_name(int l, Sector s) {
  return "l=" + std::to_string(l) + " (Z=" + std::to_string(s.Z) + ", N=" + std::to_string(s.N) + ")";
}

// Lowest eigenpair of the symmetric B restricted to the complement of q0,
// by Lanczos with full reorthogonalisation.
std::pair<double, Eigen::VectorXd> lanczos_lowest(const Eigen::SparseMatrix<double>& B, const Eigen::VectorXd& q0) {
  const Eigen::Index dim = B.rows();
  const int max_iter = static_cast<int>(std::min<Eigen::Index>(dim - 1, 3000));
  std::mt19937_64 gen(0x5eed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = unif(gen);
  v -= q0.dot(v) * q0;
  v.normalize();

  std::vector<Eigen::VectorXd> basis;
  std::vector<double> alpha, beta;
  basis.push_back(v);
  double theta = 0.0;
  Eigen::VectorXd ritz;
  for (int m = 1; m <= max_iter; ++m) {
    Eigen::VectorXd w = B * basis.back();
    const double a = basis.back().dot(w);
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass) {
      w -= q0.dot(w) * q0;
      for (const auto& q : basis) w -= q.dot(w) * q;
    }
    const double b = w.norm();

    const bool last = m == max_iter || b < 1e-13;
    if (m % 10 == 0 || last) {
      Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        T(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
      theta = es.eigenvalues()(0);
      const Eigen::VectorXd s = es.eigenvectors().col(0);
      const double residual = b * std::abs(s(m - 1));
      if (last || residual <= 1e-11 * std::max(1.0, std::abs(es.eigenvalues()(m - 1)))) {
        ritz = Eigen::VectorXd::Zero(dim);
        for (int i = 0; i < m; ++i) ritz += s(i) * basis[static_cast<std::size_t>(i)];
        ritz.normalize();
        // Rayleigh quotient of the Ritz vector: second-order accurate.
        theta = ritz.dot(B * ritz);
        return {theta, ritz};
      }
    }
    beta.push_back(b);
    basis.push_back(w / b);
  }
  throw NumericalError("Lanczos did not converge");
}

}  // namespace

std::vector<std::uint64_t> sector_configs(const ModelSpec& spec, int l, Sector sector) {
  const ConfigSpace cs = block_space(spec, l);
  std::vector<int> states(static_cast<std::size_t>(l));
  std::vector<std::uint64_t> out;
  for (std::uint64_t c = 0; c < cs.size(); ++c) {
    cs.decode(c, states);
    if (totals(spec, states) == sector) out.push_back(c);
  }
  return out;
}

std::vector<Sector> block_sectors(const ModelSpec& spec, int l) {
  const ConfigSpace cs = block_space(spec, l);
  std::vector<int> states(static_cast<std::size_t>(l));
  std::set<Sector> seen;
  for (std::uint64_t c = 0; c < cs.size(); ++c) {
    cs.decode(c, states);
    seen.insert(totals(spec, states));
  }
  return {seen.begin(), seen.end()};
}

SectorMeasure microcanonical_measure(const ModelSpec& spec, int l, Sector sector, double theta, double tau) {
  SectorMeasure m;
  m.sites = l;
  m.sector = sector;
  m.configs = sector_configs(spec, l, sector);
  if (m.configs.empty()) throw ConfigError("empty sector " + sector_name(l, sector));
  const std::vector<double> law = canonical_measure(spec, theta, tau);
  const ConfigSpace cs(spec.num_states(), l);
  std::vector<int> states(static_cast<std::size_t>(l));
  double total = 0.0;
  for (std::uint64_t c : m.configs) {
    cs.decode(c, states);
    double w = 1.0;
    for (int s : states) w *= law[static_cast<std::size_t>(s)];
    m.weights.push_back(w);
    total += w;
  }
  for (double& w : m.weights) w /= total;
  return m;
}

double dirichlet_form(const ModelSpec& spec, int l, Sector sector, std::span<const double> f) {
  const SectorMeasure mc = microcanonical_measure(spec, l, sector);
  if (f.size() != mc.configs.size()) throw ConfigError("dirichlet_form: function size differs from sector size");
  const ConfigSpace cs(spec.num_states(), l);
  std::vector<int> states(static_cast<std::size_t>(l));
  double d = 0.0;
  for (std::size_t i = 0; i < mc.configs.size(); ++i) {
    const std::uint64_t c = mc.configs[i];
    cs.decode(c, states);
    double local = 0.0;
    for (int j = 0; j + 1 < l; ++j) {
      for (const PairMove& mv : spec.moves(states[static_cast<std::size_t>(j)], states[static_cast<std::size_t>(j + 1)])) {
        const std::uint64_t target = cs.replace_pair(c, j, mv.to_left, mv.to_right);
        const auto it = std::lower_bound(mc.configs.begin(), mc.configs.end(), target);
        const double diff = f[static_cast<std::size_t>(it - mc.configs.begin())] - f[i];
        local += mv.rate * diff * diff;
      }
    }
    d += mc.weights[i] * local;
  }
  return 0.5 * d;
}

BlockOperator block_operator(const ModelSpec& spec, int l, Sector sector) {
  const SectorMeasure mc = microcanonical_measure(spec, l, sector);
  const ConfigSpace cs(spec.num_states(), l);
  std::vector<int> states(static_cast<std::size_t>(l));
  const std::size_t dim = mc.configs.size();
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> degree(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    const std::uint64_t c = mc.configs[i];
    cs.decode(c, states);
    for (int j = 0; j + 1 < l; ++j) {
      for (const PairMove& mv : spec.moves(states[static_cast<std::size_t>(j)], states[static_cast<std::size_t>(j + 1)])) {
        const std::uint64_t target = cs.replace_pair(c, j, mv.to_left, mv.to_right);
        const auto t = static_cast<std::size_t>(std::lower_bound(mc.configs.begin(), mc.configs.end(), target) -
                                                mc.configs.begin());
        const double w = 0.5 * mc.weights[i] * mv.rate;
        trip.emplace_back(static_cast<int>(i), static_cast<int>(t), -w);
        trip.emplace_back(static_cast<int>(t), static_cast<int>(i), -w);
        degree[i] += w;
        degree[t] += w;
      }
    }
  }
  for (std::size_t i = 0; i < dim; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), degree[i]);
  BlockOperator op;
  op.configs = mc.configs;
  op.pi = mc.weights;
  op.K.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  op.K.setFromTriplets(trip.begin(), trip.end());
  op.K.makeCompressed();
  return op;
}

GapResult spectral_gap(const ModelSpec& spec, int l, Sector sector) {
  const BlockOperator op = block_operator(spec, l, sector);
  const std::size_t dim = op.configs.size();
  if (dim < 2) throw ConfigError("spectral gap needs a sector with at least two configurations");

  // Irreducibility of the symmetrised chain = connectivity of the edge graph.
  std::vector<char> seen(dim, 0);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = 1;
  std::size_t reached = 1;
  while (!q.empty()) {
    const std::size_t i = q.front();
    q.pop();
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.K, static_cast<Eigen::Index>(i)); it; ++it) {
      const auto jn = static_cast<std::size_t>(it.row());
      if (jn != i && it.value() < 0.0 && !seen[jn]) {
        seen[jn] = 1;
        ++reached;
        q.push(jn);
      }
    }
  }
  if (reached != dim)
    throw InvariantError("irreducibility", "block dynamics on sector " + sector_name(l, sector) +
                                               " is reducible (gap 0); condition (B) fails");

  Eigen::VectorXd sqrt_pi(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) sqrt_pi(static_cast<Eigen::Index>(i)) = std::sqrt(op.pi[i]);
  const Eigen::VectorXd inv_sqrt = sqrt_pi.cwiseInverse();
  Eigen::SparseMatrix<double> B = inv_sqrt.asDiagonal() * op.K * inv_sqrt.asDiagonal();

  GapResult res;
  res.dim = dim;
  Eigen::VectorXd y;
  if (dim <= kDenseLimit) {
    const Eigen::MatrixXd dense(B);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
    res.gap = es.eigenvalues()(1);
    y = es.eigenvectors().col(1);
    res.method = "dense";
  } else {
    const Eigen::VectorXd q0 = sqrt_pi.normalized();
    std::tie(res.gap, y) = lanczos_lowest(B, q0);
    res.method = "lanczos";
  }
  if (!(res.gap > 0.0)) throw NumericalError("non-positive spectral gap on a connected sector");
  res.eigenfunction.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) res.eigenfunction[i] = y(static_cast<Eigen::Index>(i)) * inv_sqrt(static_cast<Eigen::Index>(i));
  return res;
}

GapReport gap_scaling_report(const ModelSpec& spec, int l_min, int l_max, std::size_t dim_budget, int threads) {
  if (l_min < 2 || l_max < l_min) throw ConfigError("gap scan needs 2 <= l_min <= l_max");
  GapReport report;
  for (int l = l_min; l <= l_max; ++l) {
    std::vector<Sector> todo;
    for (const Sector& s : block_sectors(spec, l)) {
      const std::size_t dim = sector_configs(spec, l, s).size();
      if (dim < 2) continue;
      if (dim > dim_budget) {
        report.partial = true;
        report.violations.push_back("sector " + sector_name(l, s) + " skipped: dimension " + std::to_string(dim) +
                                    " exceeds budget");
        continue;
      }
      todo.push_back(s);
    }
    std::vector<GapEntry> entries(todo.size());
    std::vector<std::string> errors(todo.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < todo.size(); i = next++) {
        try {
          const GapResult g = spectral_gap(spec, l, todo[i]);
          entries[i] = {l, todo[i], g.dim, g.gap, 1.0 / (static_cast<double>(l) * l * g.gap)};
        } catch (const InvariantError& e) {
          errors[i] = e.what();
          entries[i] = {l, todo[i], 0, 0.0, std::numeric_limits<double>::infinity()};
        }
      }
    };
    const int nt = std::max(1, std::min<int>(threads, static_cast<int>(todo.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < nt; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    double worst = 0.0;
    for (std::size_t i = 0; i < todo.size(); ++i) {
      if (!errors[i].empty()) report.violations.push_back(errors[i]);
      report.entries.push_back(entries[i]);
      worst = std::max(worst, entries[i].W);
    }
    if (!todo.empty()) report.worst_W.emplace_back(l, worst);
  }

  bool finite = !report.worst_W.empty();
  double wmin = std::numeric_limits<double>::infinity(), wmax = 0.0;
  for (const auto& [l, w] : report.worst_W) {
    finite = finite && std::isfinite(w);
    wmin = std::min(wmin, w);
    wmax = std::max(wmax, w);
  }
  report.spread = finite ? wmax / wmin : std::numeric_limits<double>::infinity();
  if (finite && report.worst_W.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(report.worst_W.size());
    for (const auto& [l, w] : report.worst_W) {
      const double x = std::log(static_cast<double>(l)), y = std::log(w);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    report.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  }
  report.bounded = finite && report.violations.empty() && report.spread < 3.0 && report.slope <= 0.2;
  if (!finite && report.worst_W.empty()) report.violations.push_back("no sector with at least two configurations");
  return report;
}

std::string GapReport::entries_csv_body() const {
  std::string out = "l,Z,N,dim,gap,W\n";
  for (const auto& e : entries)
    out += std::to_string(e.l) + ',' + std::to_string(e.sector.Z) + ',' + std::to_string(e.sector.N) + ',' +
           std::to_string(e.dim) + ',' + io::format_double(e.gap) + ',' + io::format_double(e.W) + '\n';
  return out;
}

std::string GapReport::summary_csv_body() const {
  std::string out = "l,W\n";
  for (const auto& [l, w] : worst_W) out += std::to_string(l) + ',' + io::format_double(w) + '\n';
  return out;
}

}  // namespace pertlab
