#include "pertlab/sim.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <numbers>
#include <thread>

#include "pertlab/errors.hpp"
#include "pertlab/io.hpp"
#include "pertlab/thermo.hpp"

namespace pertlab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr long long kRebuildInterval = 1 << 16;
constexpr long long kCacheCheckInterval = 100000;

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

double Rng::exponential() { return -std::log1p(-uniform()); }

FenwickTree::FenwickTree(std::span<const double> weights) { assign(weights); }

void FenwickTree::assign(std::span<const double> weights) {
  const std::size_t n = weights.size();
  tree_.assign(n + 1, 0.0);
  total_ = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tree_[i + 1] += weights[i];
    const std::size_t parent = (i + 1) + ((i + 1) & (~(i + 1) + 1));
    if (parent <= n) tree_[parent] += tree_[i + 1];
    total_ += weights[i];
  }
  mask_ = n == 0 ? 0 : std::bit_floor(n);
}

void FenwickTree::add(std::size_t i, double delta) {
  for (std::size_t p = i + 1; p < tree_.size(); p += p & (~p + 1)) tree_[p] += delta;
  total_ += delta;
}

std::size_t FenwickTree::find(double target) const {
  const std::size_t n = tree_.size() - 1;
  std::size_t pos = 0;
  for (std::size_t step = mask_; step != 0; step >>= 1) {
    const std::size_t next = pos + step;
    if (next <= n && tree_[next] <= target) {
      pos = next;
      target -= tree_[next];
    }
  }
  return std::min(pos, n - 1);
}

Configuration::Configuration(const ModelSpec& spec, std::vector<int> sites)
    : spec_(&spec), sites_(std::move(sites)) {
  const int n = size();
  if (n < 2) throw ConfigError("configuration needs at least two sites");
  const int k = static_cast<int>(spec.num_states());
  for (int s : sites_) {
    if (s < 0 || s >= k) throw ConfigError("configuration holds an unknown state index");
    z_ += spec.zeta(s);
    n_ += spec.eta(s);
  }
  bond_.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) bond_[static_cast<std::size_t>(j)] = compute_bond(j);
  tree_.assign(bond_);
}

double Configuration::compute_bond(int j) const {
  const int n = size();
  return spec_->pair_rate(sites_[static_cast<std::size_t>(j)], sites_[static_cast<std::size_t>((j + 1) % n)]);
}

void Configuration::apply(int bond, int left, int right) {
  const int n = size();
  const auto jl = static_cast<std::size_t>(bond);
  const auto jr = static_cast<std::size_t>((bond + 1) % n);
  z_ += spec_->zeta(left) + spec_->zeta(right) - spec_->zeta(sites_[jl]) - spec_->zeta(sites_[jr]);
  n_ += spec_->eta(left) + spec_->eta(right) - spec_->eta(sites_[jl]) - spec_->eta(sites_[jr]);
  sites_[jl] = left;
  sites_[jr] = right;
  for (int d = -1; d <= 1; ++d) {
    const int j = ((bond + d) % n + n) % n;
    const double fresh = compute_bond(j);
    const double old = bond_[static_cast<std::size_t>(j)];
    if (fresh != old) {
      bond_[static_cast<std::size_t>(j)] = fresh;
      tree_.add(static_cast<std::size_t>(j), fresh - old);
    }
  }
}

int Configuration::select_bond(double target) const { return static_cast<int>(tree_.find(target)); }

void Configuration::rebuild() { tree_.assign(bond_); }

bool Configuration::cache_coherent() const {
  long long z = 0, nn = 0;
  for (int s : sites_) {
    z += spec_->zeta(s);
    nn += spec_->eta(s);
  }
  if (z != z_ || nn != n_) return false;
  for (int j = 0; j < size(); ++j)
    if (bond_[static_cast<std::size_t>(j)] != compute_bond(j)) return false;
  return true;
}

void SimParams::validate() const {
  if (n < 2) throw ConfigError("torus size n must be at least 2");
  if (!(beta > 0.0 && beta < 0.2)) throw ConfigError("beta must lie in the open interval (0, 1/5)");
  if (!(t_end >= 0.0)) throw ConfigError("t_end must be non-negative");
}

double SimParams::amplitude() const { return std::pow(static_cast<double>(n), -beta); }
double SimParams::speedup() const { return std::pow(static_cast<double>(n), 1.0 + beta); }

LocalEquilibrium::LocalEquilibrium(const ModelSpec& spec, const SimParams& params)
    : spec_(&spec), n_(params.n), k_(spec.num_states()) {
  params.validate();
  const double eps = params.amplitude();
  cdf_.resize(static_cast<std::size_t>(n_) * k_);
  law_.resize(cdf_.size());
  const PhysicalDomain domain = physical_domain(spec);
  for (int j = 0; j < n_; ++j) {
    const double x = static_cast<double>(j) / n_;
    const double u = params.u0 + eps * params.u_star(x);
    const double v = params.v0 + eps * params.v_star(x);
    if (!domain.contains_interior(u, v))
      throw DomainError("physical-domain", "perturbed profile leaves the physical domain at site " +
                                               std::to_string(j) + " (u=" + std::to_string(u) +
                                               ", v=" + std::to_string(v) + ")");
    const CanonicalPoint cp = invert_densities(spec, u, v);
    const std::vector<double> p = canonical_measure(spec, cp.theta, cp.tau);
    double acc = 0.0;
    for (std::size_t s = 0; s < k_; ++s) {
      acc += p[s];
      law_[static_cast<std::size_t>(j) * k_ + s] = p[s];
      cdf_[static_cast<std::size_t>(j) * k_ + s] = acc;
    }
    cdf_[static_cast<std::size_t>(j) * k_ + k_ - 1] = 1.0;
  }
}

std::span<const double> LocalEquilibrium::site_law(int j) const {
  return std::span<const double>(law_).subspan(static_cast<std::size_t>(j) * k_, k_);
}

Configuration LocalEquilibrium::sample(Rng& rng) const {
  std::vector<int> sites(static_cast<std::size_t>(n_));
  for (int j = 0; j < n_; ++j) {
    const double u = rng.uniform();
    const double* row = cdf_.data() + static_cast<std::size_t>(j) * k_;
    std::size_t s = 0;
    while (s + 1 < k_ && row[s] <= u) ++s;
    sites[static_cast<std::size_t>(j)] = static_cast<int>(s);
  }
  return Configuration(*spec_, std::move(sites));
}

Configuration sample_initial(const ModelSpec& spec, const SimParams& params, Rng& rng) {
  return LocalEquilibrium(spec, params).sample(rng);
}

EvolveStats evolve(Configuration& config, double duration, Rng& rng, bool check_cache) {
  if (!(duration >= 0.0)) throw ConfigError("evolve: duration must be non-negative");
  EvolveStats stats;
  const ModelSpec& spec = config.spec();
  double t = 0.0;
  long long since_rebuild = 0;
  while (true) {
    double total = config.total_rate();
    if (total <= 1e-9 * spec.max_pair_rate()) {
      config.rebuild();
      total = config.total_rate();
      if (total <= 0.0) break;
    }
    t += rng.exponential() / total;
    if (t > duration) break;

    int bond;
    do {
      bond = config.select_bond(rng.uniform() * total);
    } while (config.bond_rate(bond) <= 0.0);

    const int a = config.site(bond);
    const int b = config.site((bond + 1) % config.size());
    const auto moves = spec.moves(a, b);
    double pick = rng.uniform() * spec.pair_rate(a, b);
    std::size_t m = 0;
    while (m + 1 < moves.size() && pick >= moves[m].rate) {
      pick -= moves[m].rate;
      ++m;
    }
    config.apply(bond, moves[m].to_left, moves[m].to_right);
    ++stats.events;

    if (++since_rebuild >= kRebuildInterval) {
      config.rebuild();
      since_rebuild = 0;
    }
    if (check_cache && stats.events % kCacheCheckInterval == 0) {
      ++stats.cache_checks;
      if (!config.cache_coherent()) throw NumericalError("bond-rate cache diverged from recomputed rates");
    }
  }
  return stats;
}

std::pair<std::vector<double>, std::vector<double>> empirical_profile(const Configuration& config, int l) {
  const int n = config.size();
  if (l < 1 || l > n) throw ConfigError("block size must satisfy 1 <= l <= n");
  const ModelSpec& spec = config.spec();
  std::vector<double> zl(static_cast<std::size_t>(n)), el(static_cast<std::size_t>(n));
  long long zs = 0, es = 0;
  for (int i = 0; i < l; ++i) {
    zs += spec.zeta(config.site(i));
    es += spec.eta(config.site(i));
  }
  for (int j = 0; j < n; ++j) {
    zl[static_cast<std::size_t>(j)] = static_cast<double>(zs) / l;
    el[static_cast<std::size_t>(j)] = static_cast<double>(es) / l;
    const int out = config.site(j);
    const int in = config.site((j + l) % n);
    zs += spec.zeta(in) - spec.zeta(out);
    es += spec.eta(in) - spec.eta(out);
  }
  return {std::move(zl), std::move(el)};
}

TestFunction TestFunction::parse(const std::string& name) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (name == "one" || name == "1") return {"one", [](double) { return 1.0; }};
  if (name == "cos") return {"cos", [](double x) { return std::cos(two_pi * x); }};
  if (name == "sin") return {"sin", [](double x) { return std::sin(two_pi * x); }};
  throw ConfigError("unknown test function '" + name + "' (expected one, cos, sin)");
}

namespace {

std::pair<double, double> prediction_integral(const SimParams& params, const WavePrediction& prediction,
                                              std::size_t k, const TestFunction& g) {
  const PeriodicGrid& grid = prediction.field(k).grid;
  double iu = 0.0, iv = 0.0;
  // Periodic trapezoid rule on the cell centres.
  for (int i = 0; i < grid.cells; ++i) {
    const double x = grid.center(i);
    const auto [pu, pv] = prediction.perturbation(k, x, params.n, params.beta);
    const double gx = g.fn(x);
    iu += gx * pu;
    iv += gx * pv;
  }
  return {iu * grid.dx(), iv * grid.dx()};
}

std::pair<double, double> micro_observable(const Configuration& config, const SimParams& params,
                                           const TestFunction& g) {
  const int n = config.size();
  const ModelSpec& spec = config.spec();
  double su = 0.0, sv = 0.0;
  for (int j = 0; j < n; ++j) {
    const double gx = g.fn(static_cast<double>(j) / n);
    su += gx * (spec.zeta(config.site(j)) - params.u0);
    sv += gx * (spec.eta(config.site(j)) - params.v0);
  }
  const double scale = std::pow(static_cast<double>(n), -1.0 + params.beta);
  return {scale * su, scale * sv};
}

void mean_stderr(const std::vector<double>& x, double& mean, double& err) {
  mean = 0.0;
  err = 0.0;
  if (x.empty()) return;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  if (x.size() < 2) return;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  err = std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
}

}  // namespace

std::pair<double, double> corollary_residual(const Configuration& config, const SimParams& params,
                                             const WavePrediction& prediction, std::size_t k,
                                             const TestFunction& g) {
  if (config.size() != params.n) throw ConfigError("configuration size differs from params.n");
  const auto [mu, mv] = micro_observable(config, params, g);
  const auto [pu, pv] = prediction_integral(params, prediction, k, g);
  return {mu - pu, mv - pv};
}

std::pair<double, double> ResidualReport::overall_mean_abs() const {
  if (aggregates.empty()) return {0.0, 0.0};
  double u = 0.0, v = 0.0;
  for (const auto& a : aggregates) {
    u += a.mean_abs_u;
    v += a.mean_abs_v;
  }
  return {u / static_cast<double>(aggregates.size()), v / static_cast<double>(aggregates.size())};
}

std::string ResidualReport::samples_csv_body() const {
  std::string out = "n,seed,t,g,res_u,res_v\n";
  for (const auto& s : samples) {
    out += std::to_string(n) + ',' + std::to_string(s.seed) + ',' + io::format_double(s.t) + ',' + s.g +
           ',' + io::format_double(s.res_u) + ',' + io::format_double(s.res_v) + '\n';
  }
  return out;
}

std::string ResidualReport::aggregates_csv_body() const {
  std::string out =
      "n,t,g,count,mean_u,stderr_u,mean_v,stderr_v,mean_abs_u,stderr_abs_u,mean_abs_v,stderr_abs_v\n";
  for (const auto& a : aggregates) {
    out += std::to_string(a.n) + ',' + io::format_double(a.t) + ',' + a.g + ',' + std::to_string(a.count);
    for (double x : {a.mean_u, a.stderr_u, a.mean_v, a.stderr_v, a.mean_abs_u, a.stderr_abs_u, a.mean_abs_v,
                     a.stderr_abs_v})
      out += ',' + io::format_double(x);
    out += '\n';
  }
  return out;
}

ResidualReport run_experiment(const ModelSpec& spec, const SimParams& params,
                              std::span<const std::uint64_t> seeds, std::span<const double> times,
                              std::span<const TestFunction> tests, const ExperimentOptions& options) {
  params.validate();
  if (seeds.empty()) {
    ResidualReport empty;
    empty.n = params.n;
    empty.beta = params.beta;
    return empty;
  }
  for (std::size_t i = 1; i < times.size(); ++i)
    if (times[i] <= times[i - 1]) throw ConfigError("observation times must be strictly increasing");
  const FluxModel model(spec);
  const WavePrediction prediction(model, params.u0, params.v0, params.u_star, params.v_star, options.wave_cells,
                                  std::vector<double>(times.begin(), times.end()));
  return run_experiment(spec, params, prediction, seeds, tests, options);
}

ResidualReport run_experiment(const ModelSpec& spec, const SimParams& params, const WavePrediction& prediction,
                              std::span<const std::uint64_t> seeds, std::span<const TestFunction> tests,
                              const ExperimentOptions& options) {
  params.validate();
  ResidualReport report;
  report.n = params.n;
  report.beta = params.beta;
  if (seeds.empty()) return report;

  const std::vector<double>& times = prediction.times();
  const std::size_t nt = times.size(), ng = tests.size();
  std::vector<std::pair<double, double>> predicted(nt * ng);
  for (std::size_t k = 0; k < nt; ++k)
    for (std::size_t i = 0; i < ng; ++i) predicted[k * ng + i] = prediction_integral(params, prediction, k, tests[i]);

  const LocalEquilibrium initial(spec, params);
  const double speedup = params.speedup();
  std::vector<std::vector<ResidualSample>> per_seed(seeds.size());
  report.events_per_seed.assign(seeds.size(), 0);

  auto run_one = [&](std::size_t idx) {
    Rng rng(seeds[idx]);
    Configuration config = initial.sample(rng);
    double t_prev = 0.0;
    auto& out = per_seed[idx];
    for (std::size_t k = 0; k < nt; ++k) {
      report.events_per_seed[idx] += evolve(config, speedup * (times[k] - t_prev), rng, options.check_cache).events;
      t_prev = times[k];
      for (std::size_t i = 0; i < ng; ++i) {
        const auto [mu, mv] = micro_observable(config, params, tests[i]);
        const auto [pu, pv] = predicted[k * ng + i];
        out.push_back({seeds[idx], times[k], tests[i].name, mu - pu, mv - pv});
      }
    }
  };

  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(seeds.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < seeds.size(); i = next++) run_one(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
          next = seeds.size();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (auto& v : per_seed)
    for (auto& s : v) report.samples.push_back(std::move(s));

  for (std::size_t k = 0; k < nt; ++k) {
    for (std::size_t i = 0; i < ng; ++i) {
      std::vector<double> ru, rv, au, av;
      for (std::size_t idx = 0; idx < seeds.size(); ++idx) {
        const ResidualSample& s = report.samples[idx * nt * ng + k * ng + i];
        ru.push_back(s.res_u);
        rv.push_back(s.res_v);
        au.push_back(std::abs(s.res_u));
        av.push_back(std::abs(s.res_v));
      }
      ResidualAggregate a;
      a.n = params.n;
      a.t = times[k];
      a.g = tests[i].name;
      a.count = seeds.size();
      mean_stderr(ru, a.mean_u, a.stderr_u);
      mean_stderr(rv, a.mean_v, a.stderr_v);
      mean_stderr(au, a.mean_abs_u, a.stderr_abs_u);
      mean_stderr(av, a.mean_abs_v, a.stderr_abs_v);
      report.aggregates.push_back(a);
    }
  }
  return report;
}

}  // namespace pertlab
