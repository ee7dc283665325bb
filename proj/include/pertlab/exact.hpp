#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "pertlab/model.hpp"
#include "pertlab/waves.hpp"

namespace pertlab {

enum class Boundary { periodic, free };

/// Conserved totals identifying an invariant sector.
struct Sector {
  long long Z = 0;
  long long N = 0;
  bool operator==(const Sector&) const = default;
  auto operator<=>(const Sector&) const = default;
};

/// Sparse generator over Omega^n (or one sector of it). Row c holds the
/// exit rates of configuration configs[c] (or c itself when configs is
/// empty, i.e. the full space).
struct GeneratorMatrix {
  Eigen::SparseMatrix<double, Eigen::RowMajor> Q;
  Boundary boundary = Boundary::periodic;
  int sites = 0;
  std::size_t num_states = 0;
  std::optional<Sector> sector;
  std::vector<std::uint64_t> configs;

  std::size_t dim() const { return static_cast<std::size_t>(Q.rows()); }
  double max_exit_rate() const;
  double max_row_sum() const;
};

/// Probability vector on Omega^n, n <= 6 and |Omega| <= 8.
struct FullDistribution {
  int sites = 0;
  std::size_t num_states = 0;
  std::vector<double> p;

  double mass() const;
};

/// Caps: |Omega|^n <= 1e6 for generators.
GeneratorMatrix build_generator(const ModelSpec& spec, int n, Boundary boundary,
                                std::optional<Sector> sector = std::nullopt);

/// mu0 exp(duration Q) by uniformization; total-variation truncation error <= 1e-12.
FullDistribution evolve_exact(const FullDistribution& mu0, const GeneratorMatrix& gen, double duration);

/// Product over sites of canonical measures at the given per-site densities.
FullDistribution product_measure(const ModelSpec& spec, std::span<const std::pair<double, double>> densities);
FullDistribution point_mass(const ModelSpec& spec, std::span<const int> sites);

enum class ReferenceKind { nu, nu_tilde, pi_abs };

/// Reference product measures at snapshot k of the prediction. pi_abs uses
/// the constant expansion point.
FullDistribution reference_product_measure(const ModelSpec& spec, int n, double beta, std::size_t k,
                                           ReferenceKind kind, const WavePrediction& prediction);

/// H(mu | nu) with 0 log 0 = 0. Throws DomainError("support") if nu
/// vanishes where mu does not.
double relative_entropy(const FullDistribution& mu, const FullDistribution& nu);
double total_variation(std::span<const double> p, std::span<const double> q);

/// Configurations of a free-boundary block with totals (Z, N), ascending index.
std::vector<std::uint64_t> sector_configs(const ModelSpec& spec, int l, Sector sector);
/// All non-empty sectors of a block of length l.
std::vector<Sector> block_sectors(const ModelSpec& spec, int l);

struct SectorMeasure {
  int sites = 0;
  Sector sector;
  std::vector<std::uint64_t> configs;
  std::vector<double> weights;
};

/// Canonical measure at (theta, tau) conditioned on the sector.
SectorMeasure microcanonical_measure(const ModelSpec& spec, int l, Sector sector, double theta = 0.0,
                                     double tau = 0.0);

/// Symmetrised block dynamics on one sector: K is the weighted graph
/// Laplacian with edge weights (pi_c r(c->c') + pi_c' r(c'->c)) / 2 under the
/// microcanonical weights pi, so that <f, K f> equals the Dirichlet form.
struct BlockOperator {
  std::vector<std::uint64_t> configs;
  std::vector<double> pi;
  Eigen::SparseMatrix<double> K;
};
BlockOperator block_operator(const ModelSpec& spec, int l, Sector sector);

/// Dirichlet form of the free-boundary block dynamics under the
/// microcanonical measure; f indexed like microcanonical_measure().configs.
double dirichlet_form(const ModelSpec& spec, int l, Sector sector, std::span<const double> f);

struct GapResult {
  double gap = 0.0;
  std::size_t dim = 0;
  std::string method;
  /// Minimising mean-zero function on the sector (Rayleigh quotient = gap).
  std::vector<double> eigenfunction;
};

/// Smallest non-zero eigenvalue of the symmetrised block generator in the
/// microcanonical inner product. Throws InvariantError("irreducibility")
/// when the sector dynamics is reducible, ConfigError for dim < 2.
GapResult spectral_gap(const ModelSpec& spec, int l, Sector sector);

struct GapEntry {
  int l = 0;
  Sector sector;
  std::size_t dim = 0;
  double gap = 0.0;
  double W = 0.0;
};

struct GapReport {
  std::vector<GapEntry> entries;
  std::vector<std::pair<int, double>> worst_W;  ///< (l, W(l))
  double slope = 0.0;        ///< least-squares slope of log W against log l
  double spread = 0.0;       ///< max W / min W
  bool bounded = false;      ///< spread < 3 and slope <= 0.2, no violations
  bool partial = false;      ///< some sectors exceeded the dimension budget
  std::vector<std::string> violations;

  std::string entries_csv_body() const;
  std::string summary_csv_body() const;
};

GapReport gap_scaling_report(const ModelSpec& spec, int l_min, int l_max, std::size_t dim_budget = 20000,
                             int threads = 1);

struct EntropyRow {
  double t = 0.0;
  double H_nu = 0.0;
  double H_nu_tilde = 0.0;
  double H_pi = 0.0;
};

/// Exact law started at nu_0 and evolved with speed-up n^(1+beta); entropies
/// against the three reference measures at each snapshot of `prediction`.
std::vector<EntropyRow> entropy_trajectory(const ModelSpec& spec, int n, double beta,
                                           const WavePrediction& prediction);

std::string entropy_csv_body(std::span<const EntropyRow> rows);

}  // namespace pertlab
