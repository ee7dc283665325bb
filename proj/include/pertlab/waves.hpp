#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pertlab/kernels.hpp"
#include "pertlab/thermo.hpp"

namespace pertlab {

/// Eigen-system of a strictly hyperbolic 2x2 flux Jacobian.
///
/// |r| = |s| = 1, l.r = m.s = 1, l.s = m.r = 0. The first non-zero component
/// of r and of s is positive. lambda is the eigenvalue whose right
/// eigenvector leans more towards the u-axis, so diag(a, b) gives
/// lambda = a, r = (1, 0).
struct EigenStructure {
  double lambda = 0.0;
  double mu = 0.0;
  Eigen::Vector2d r = Eigen::Vector2d::UnitX();
  Eigen::Vector2d s = Eigen::Vector2d::UnitY();
  Eigen::Vector2d l = Eigen::Vector2d::UnitX();
  Eigen::Vector2d m = Eigen::Vector2d::UnitY();
};

/// Throws DomainError("strict-hyperbolicity") if |lambda - mu| <= 1e-8 and
/// DomainError("weak-hyperbolicity") for a complex spectrum.
EigenStructure eigen_structure(const Eigen::Matrix2d& D);

/// Affine change of observables (zeta, eta) -> (l.(zeta - u0, eta - v0),
/// m.(zeta - u0, eta - v0)) that diagonalises the Jacobian at the base point.
struct NormalizedFrame {
  double u0 = 0.0;
  double v0 = 0.0;
  EigenStructure eigen;

  Eigen::Matrix2d to_normalized_matrix() const;  // rows l, m
  Eigen::Matrix2d from_normalized_matrix() const;  // columns r, s
  Eigen::Vector2d to_normalized(const Eigen::Vector2d& uv) const;
  Eigen::Vector2d from_normalized(const Eigen::Vector2d& xy) const;

  /// Transformed fluxes (l.(F - F0), m.(F - F0)) at normalized coordinates.
  std::pair<double, double> flux(const FluxModel& model, double x, double y) const;
  /// Jacobian of the transformed fluxes at the origin.
  Eigen::Matrix2d jacobian(const FluxModel& model) const;
};

NormalizedFrame normalize_coordinates(const FluxModel& model, double u0, double v0);

/// Geometric-optics coefficients. General-frame a1, a2, b1, b2 and the
/// normalized-frame Hessian entries a2n, a3, b2n, b3 (a1 and b1 coincide in
/// both frames). Values below `zero_snap` are stored as exact zeros.
struct GeoCoeffs {
  double a1 = 0.0, a2 = 0.0, b1 = 0.0, b2 = 0.0;
  double a2n = 0.0, a3 = 0.0, b2n = 0.0, b3 = 0.0;
  double c_sigma = 0.0, c_delta = 0.0;
  double frame_discrepancy = 0.0;

  static constexpr double zero_snap = 1e-7;
  bool genuinely_nonlinear() const noexcept { return a1 != 0.0 && b1 != 0.0; }
};

GeoCoeffs geo_coefficients(const FluxModel& model, double u0, double v0);

using ProfileFn = std::function<double(double)>;

/// Named smooth 1-periodic function: amplitude * shape(x).
struct Profile {
  enum class Shape { zero, constant, cos, sin };
  Shape shape = Shape::zero;
  double amplitude = 1.0;

  double operator()(double x) const;
  double derivative(double x) const;
  std::string name() const;
  static Profile parse(const std::string& name, double amplitude = 1.0);
};

/// Uniform periodic grid of M cells on [0, 1) with values at cell centres.
struct PeriodicGrid {
  int cells = 0;
  double dx() const { return 1.0 / cells; }
  double center(int i) const { return (i + 0.5) / cells; }
  /// Periodic linear interpolation of centre values at x.
  double interpolate(std::span<const double> values, double x) const;
};

struct InitialWaves {
  PeriodicGrid grid;
  std::vector<double> sigma0;
  std::vector<double> delta0;
  double c_sigma = 0.0;
  double c_delta = 0.0;
};

InitialWaves initial_waves(const ProfileFn& u_star, const ProfileFn& v_star,
                           const EigenStructure& eigen, int M);

struct ScalarSolution {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  long steps = 0;
  double max_mass_change = 0.0;  ///< per step, in units of integrated mass
  double shock_time = 0.0;       ///< +inf when no compression
  double cfl = 0.5;
};

/// -1 / min_x d/dx f'(w0(x)) (central differences); +inf if nothing compresses.
double estimate_shock_time(std::span<const double> w0, kernels::QuadraticFlux flux);

/// First-order Godunov finite volumes on a periodic grid with CFL 0.5,
/// recording the state at each requested time (ascending, <= T).
/// Throws DomainError("shock-time") if T > 0.9 * estimated shock time.
ScalarSolution solve_scalar_conservation(std::span<const double> w0, kernels::QuadraticFlux flux,
                                         double T, std::span<const double> snapshot_times,
                                         double cfl = 0.5);

/// Root of w = w0(x - (quad*w + lin)*t) by bisection on [w_min, w_max].
/// Throws DomainError("shock-time") if the root is not unique.
double characteristics_oracle(const ProfileFn& w0, double w_min, double w_max, double quad,
                              double lin, double t, double x);

/// sigma, delta cell averages at one time.
struct WaveField {
  PeriodicGrid grid;
  double time = 0.0;
  std::vector<double> sigma;
  std::vector<double> delta;
};

/// Grid functions of x = j/n, j = 0..n-1.
struct ProfilePair {
  std::vector<double> u;
  std::vector<double> v;
};

/// sigma(t, x - lambda n^beta t) r + delta(t, x - mu n^beta t) s at x = j/n.
ProfilePair reconstruct_profiles(const WaveField& field, const EigenStructure& eigen, int n,
                                 double beta);

/// Second-order correction terms sigma_bar(t, x1, x2), delta_bar(t, x1, x2)
/// in the normalized frame.
class CorrectionField {
 public:
  CorrectionField(const WaveField& field, const GeoCoeffs& coeffs, const EigenStructure& eigen);

  double sigma_bar(double x1, double x2) const;
  double delta_bar(double x1, double x2) const;
  /// max |sigma_bar|, max |delta_bar| over the grid x grid (coarsened).
  std::pair<double, double> max_abs(int samples = 64) const;
  bool identically_zero() const noexcept { return zero_; }

 private:
  PeriodicGrid grid_;
  GeoCoeffs coeffs_;
  double inv_gap_ = 0.0;
  bool zero_ = false;
  std::vector<double> sigma_, delta_, dsigma_, ddelta_, int_sigma_, int_delta_;
};

/// Corrected profiles u~, v~ at x = j/n in the original frame:
/// (sigma + n^-beta sigma_bar) r + (delta + n^-beta delta_bar) s.
ProfilePair corrected_profiles(const WaveField& field, const CorrectionField& correction,
                               const EigenStructure& eigen, int n, double beta);

/// The complete small-perturbation prediction around (u0, v0): eigen-system,
/// coefficients, and both scalar solves sampled at the requested times.
class WavePrediction {
 public:
  WavePrediction(const FluxModel& model, double u0, double v0, ProfileFn u_star, ProfileFn v_star,
                 int M, std::vector<double> times);

  double u0() const noexcept { return u0_; }
  double v0() const noexcept { return v0_; }
  const EigenStructure& eigen() const noexcept { return frame_.eigen; }
  const NormalizedFrame& frame() const noexcept { return frame_; }
  const GeoCoeffs& coeffs() const noexcept { return coeffs_; }
  const InitialWaves& initial() const noexcept { return initial_; }
  const ScalarSolution& sigma_solution() const noexcept { return sigma_; }
  const ScalarSolution& delta_solution() const noexcept { return delta_; }
  const std::vector<double>& times() const noexcept { return times_; }
  double shock_time() const noexcept;

  std::size_t time_index(double t) const;
  const WaveField& field(std::size_t k) const { return fields_[k]; }
  const CorrectionField& correction(std::size_t k) const { return corrections_[k]; }

  /// (u^(n), v^(n)) at a single point.
  std::pair<double, double> perturbation(std::size_t k, double x, int n, double beta) const;
  /// (u~^(n), v~^(n)) at a single point.
  std::pair<double, double> corrected(std::size_t k, double x, int n, double beta) const;

 private:
  double u0_, v0_;
  NormalizedFrame frame_;
  GeoCoeffs coeffs_;
  InitialWaves initial_;
  ScalarSolution sigma_, delta_;
  std::vector<double> times_;
  std::vector<WaveField> fields_;
  std::vector<CorrectionField> corrections_;
};

}  // namespace pertlab
