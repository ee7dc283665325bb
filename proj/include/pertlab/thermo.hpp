#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pertlab/model.hpp"

namespace pertlab {

/// Dual coordinates (theta, tau) with the matching densities (u, v) and the
/// susceptibility G'' = Cov(zeta, eta) under the canonical measure.
struct CanonicalPoint {
  double theta = 0.0;
  double tau = 0.0;
  double u = 0.0;
  double v = 0.0;
  Eigen::Matrix2d susceptibility = Eigen::Matrix2d::Zero();
  int newton_iterations = 0;
  /// Condition number of the susceptibility; only filled in when > 1e8.
  double ill_conditioning = 0.0;
};

/// Convex hull of {(zeta(w), eta(w))}, counter-clockwise, no collinear
/// triples.
struct PhysicalDomain {
  std::vector<Eigen::Vector2d> vertices;

  /// Strictly inside (boundary excluded).
  bool contains_interior(double u, double v, double margin = 0.0) const;
  /// Euclidean distance to the boundary (negative outside).
  double signed_distance(double u, double v) const;
};

struct FluxPoint {
  double u = 0.0;
  double v = 0.0;
  double Phi = 0.0;
  double Psi = 0.0;
  Eigen::Matrix2d jacobian = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d hess_Phi = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d hess_Psi = Eigen::Matrix2d::Zero();
};

/// Microscopic fluxes phi, psi tabulated on ordered pairs (row-major k x k).
struct MicroFlux {
  std::size_t num_states = 0;
  std::vector<double> phi;
  std::vector<double> psi;
  double C1 = 0.0;
  double C2 = 0.0;

  double phi_at(int a, int b) const { return phi[static_cast<std::size_t>(a) * num_states + static_cast<std::size_t>(b)]; }
  double psi_at(int a, int b) const { return psi[static_cast<std::size_t>(a) * num_states + static_cast<std::size_t>(b)]; }
};

double log_mgf(const ModelSpec& spec, double theta, double tau);
std::vector<double> canonical_measure(const ModelSpec& spec, double theta, double tau);
CanonicalPoint mean_densities(const ModelSpec& spec, double theta, double tau);

/// Newton inversion of grad G = (u, v). Throws DomainError if (u, v) is not
/// strictly inside the physical domain; NumericalError on non-convergence.
CanonicalPoint invert_densities(const ModelSpec& spec, double u, double v);

double entropy_S(const ModelSpec& spec, double u, double v);
PhysicalDomain physical_domain(const ModelSpec& spec);
MicroFlux micro_flux(const ModelSpec& spec, double C1 = 0.0, double C2 = 0.0);

/// Macroscopic fluxes and their derivatives for one model with fixed flux
/// constants. Holds no mutable state.
class FluxModel {
 public:
  explicit FluxModel(const ModelSpec& spec, double C1 = 0.0, double C2 = 0.0);
  /// Constants chosen so that Phi(u0, v0) = Psi(u0, v0) = 0.
  static FluxModel centered_at(const ModelSpec& spec, double u0, double v0);

  const ModelSpec& spec() const noexcept { return spec_; }
  const MicroFlux& micro() const noexcept { return micro_; }
  const PhysicalDomain& domain() const noexcept { return domain_; }

  /// (Phi, Psi) at densities (u, v): exact double sum over pairs.
  std::pair<double, double> macro_flux(double u, double v) const;
  std::pair<double, double> macro_flux_dual(double theta, double tau) const;

  /// d(Phi, Psi)/d(theta, tau) by two-site covariances (rows Phi, Psi).
  Eigen::Matrix2d dual_gradient(double theta, double tau) const;
  /// D(u, v) = dual gradient times inverse susceptibility.
  Eigen::Matrix2d flux_jacobian(double u, double v) const;
  double onsager_residual(double theta, double tau) const;

  struct Hessians {
    Eigen::Matrix2d Phi;
    Eigen::Matrix2d Psi;
    double halving_discrepancy = 0.0;
  };
  /// Central differences of the analytic Jacobian with step h, symmetrised,
  /// verified against step h/2 (agreement within 1e-5 or NumericalError).
  Hessians flux_hessians(double u, double v, double h = 1e-4) const;

  FluxPoint evaluate(double u, double v) const;

 private:
  ModelSpec spec_;
  MicroFlux micro_;
  PhysicalDomain domain_;
};

}  // namespace pertlab
