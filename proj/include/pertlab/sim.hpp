#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pertlab/model.hpp"
#include "pertlab/waves.hpp"

namespace pertlab {

/// Per-seed random stream: mt19937_64 keyed by splitmix64(seed).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  static constexpr const char* name = "mt19937_64/splitmix64-seeded";

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Exponential with rate 1.
  double exponential();
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Sums over a fixed-size array of non-negative weights with O(log n)
/// point update and prefix search.
class FenwickTree {
 public:
  FenwickTree() = default;
  explicit FenwickTree(std::span<const double> weights);

  void assign(std::span<const double> weights);
  void add(std::size_t i, double delta);
  double total() const noexcept { return total_; }
  /// Smallest i with prefix_sum(i) > target.
  std::size_t find(double target) const;

 private:
  std::vector<double> tree_;
  std::size_t mask_ = 0;
  double total_ = 0.0;
};

/// Occupation of the discrete torus with cached conserved totals and
/// per-bond exit rates (bond j joins sites j and j+1 mod n).
class Configuration {
 public:
  Configuration(const ModelSpec& spec, std::vector<int> sites);

  int size() const noexcept { return static_cast<int>(sites_.size()); }
  std::span<const int> sites() const noexcept { return sites_; }
  int site(int j) const { return sites_[static_cast<std::size_t>(j)]; }
  long long Z() const noexcept { return z_; }
  long long N() const noexcept { return n_; }
  double bond_rate(int j) const { return bond_[static_cast<std::size_t>(j)]; }
  double total_rate() const noexcept { return tree_.total(); }

  /// Replace the pair on bond j and refresh the three affected bonds.
  void apply(int bond, int left, int right);
  /// Bond selected by a uniform draw on [0, total_rate()).
  int select_bond(double target) const;
  /// Recompute the tree from the bond cache (clears accumulated rounding).
  void rebuild();
  /// Cache equals rates recomputed from scratch, and totals match the sites.
  bool cache_coherent() const;

  const ModelSpec& spec() const noexcept { return *spec_; }

 private:
  double compute_bond(int j) const;

  const ModelSpec* spec_;
  std::vector<int> sites_;
  long long z_ = 0;
  long long n_ = 0;
  std::vector<double> bond_;
  FenwickTree tree_;
};

struct SimParams {
  int n = 0;
  double beta = 0.1;
  double t_end = 0.0;
  double u0 = 0.0;
  double v0 = 0.0;
  ProfileFn u_star = [](double) { return 0.0; };
  ProfileFn v_star = [](double) { return 0.0; };
  std::uint64_t seed = 0;

  /// Throws ConfigError unless n >= 2 and beta in (0, 1/5).
  void validate() const;
  double amplitude() const;         ///< n^-beta
  double speedup() const;           ///< n^(1+beta)
};

/// Per-site canonical laws of the local-equilibrium measure at time 0.
class LocalEquilibrium {
 public:
  LocalEquilibrium(const ModelSpec& spec, const SimParams& params);
  Configuration sample(Rng& rng) const;
  std::span<const double> site_law(int j) const;

 private:
  const ModelSpec* spec_;
  int n_;
  std::size_t k_;
  std::vector<double> cdf_;  ///< n rows of k cumulative weights
  std::vector<double> law_;
};

Configuration sample_initial(const ModelSpec& spec, const SimParams& params, Rng& rng);

struct EvolveStats {
  long long events = 0;
  long long cache_checks = 0;
};

/// Exact continuous-time evolution over `duration` microscopic time units.
/// With `check_cache`, the bond-rate cache is verified every 1e5 events.
EvolveStats evolve(Configuration& config, double duration, Rng& rng, bool check_cache = false);

/// Block averages over l consecutive sites with periodic indexing.
std::pair<std::vector<double>, std::vector<double>> empirical_profile(const Configuration& config, int l);

struct TestFunction {
  std::string name;
  std::function<double(double)> fn;

  /// "one", "cos" or "sin" (period-one trigonometric functions).
  static TestFunction parse(const std::string& name);
};

/// The two Corollary residuals at snapshot k of the prediction for a
/// configuration observed at microscopic time n^(1+beta) t_k.
std::pair<double, double> corollary_residual(const Configuration& config, const SimParams& params,
                                             const WavePrediction& prediction, std::size_t k,
                                             const TestFunction& g);

struct ResidualSample {
  std::uint64_t seed = 0;
  double t = 0.0;
  std::string g;
  double res_u = 0.0;
  double res_v = 0.0;
};

struct ResidualAggregate {
  int n = 0;
  double t = 0.0;
  std::string g;
  std::size_t count = 0;
  double mean_u = 0.0, stderr_u = 0.0;
  double mean_v = 0.0, stderr_v = 0.0;
  double mean_abs_u = 0.0, stderr_abs_u = 0.0;
  double mean_abs_v = 0.0, stderr_abs_v = 0.0;
};

struct ResidualReport {
  int n = 0;
  double beta = 0.0;
  std::string rng = Rng::name;
  std::vector<ResidualSample> samples;      ///< seed-major, then time, then g
  std::vector<ResidualAggregate> aggregates;  ///< time-major, then g
  std::vector<long long> events_per_seed;

  /// Mean over aggregates of mean_abs_u and mean_abs_v.
  std::pair<double, double> overall_mean_abs() const;
  std::string samples_csv_body() const;
  std::string aggregates_csv_body() const;
};

struct ExperimentOptions {
  int wave_cells = 1024;
  int threads = 1;
  bool check_cache = false;
};

/// Replicates sample -> evolve -> measure for every seed; deterministic in
/// the seed list regardless of the thread count.
ResidualReport run_experiment(const ModelSpec& spec, const SimParams& params,
                              std::span<const std::uint64_t> seeds, std::span<const double> times,
                              std::span<const TestFunction> tests, const ExperimentOptions& options = {});

ResidualReport run_experiment(const ModelSpec& spec, const SimParams& params,
                              const WavePrediction& prediction, std::span<const std::uint64_t> seeds,
                              std::span<const TestFunction> tests, const ExperimentOptions& options = {});

}  // namespace pertlab
