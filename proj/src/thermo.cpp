#include "pertlab/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pertlab/errors.hpp"

namespace pertlab {

namespace {

double max_exponent(const ModelSpec& spec, double theta, double tau) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.num_states(); ++i)
    m = std::max(m, theta * spec.zeta()[i] + tau * spec.eta()[i]);
  return m;
}

long long cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  // Hull vertices are integer points.
  return std::llround((a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x()));
}

}  // namespace

double log_mgf(const ModelSpec& spec, double theta, double tau) {
  const double m = max_exponent(spec, theta, tau);
  double s = 0.0;
  for (std::size_t i = 0; i < spec.num_states(); ++i)
    s += spec.base_measure()[i] * std::exp(theta * spec.zeta()[i] + tau * spec.eta()[i] - m);
  return m + std::log(s);
}

std::vector<double> canonical_measure(const ModelSpec& spec, double theta, double tau) {
  const double m = max_exponent(spec, theta, tau);
  std::vector<double> p(spec.num_states());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = spec.base_measure()[i] * std::exp(theta * spec.zeta()[i] + tau * spec.eta()[i] - m);
    s += p[i];
  }
  for (double& x : p) x /= s;
  return p;
}

CanonicalPoint mean_densities(const ModelSpec& spec, double theta, double tau) {
  const auto p = canonical_measure(spec, theta, tau);
  CanonicalPoint cp;
  cp.theta = theta;
  cp.tau = tau;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cp.u += p[i] * spec.zeta()[i];
    cp.v += p[i] * spec.eta()[i];
  }
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dz = spec.zeta()[i] - cp.u;
    const double de = spec.eta()[i] - cp.v;
    cov(0, 0) += p[i] * dz * dz;
    cov(0, 1) += p[i] * dz * de;
    cov(1, 1) += p[i] * de * de;
  }
  cov(1, 0) = cov(0, 1);
  cp.susceptibility = cov;
  return cp;
}

CanonicalPoint invert_densities(const ModelSpec& spec, double u, double v) {
  const PhysicalDomain dom = physical_domain(spec);
  if (!std::isfinite(u) || !std::isfinite(v) || !dom.contains_interior(u, v))
    throw DomainError("physical-domain", "density (" + std::to_string(u) + ", " + std::to_string(v) +
                                             ") is not strictly inside the physical domain");

  // Newton on the convex function F(x) = G(x) - u*theta - v*tau.
  Eigen::Vector2d x(0.0, 0.0);
  const Eigen::Vector2d target(u, v);
  auto objective = [&](const Eigen::Vector2d& y) { return log_mgf(spec, y(0), y(1)) - target.dot(y); };
  CanonicalPoint cp = mean_densities(spec, x(0), x(1));
  double residual = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::Vector2d grad = Eigen::Vector2d(cp.u, cp.v) - target;
    residual = grad.lpNorm<Eigen::Infinity>();
    if (residual <= 1e-12) {
      // One extra full step polishes the quadratically converging iterate
      // down to rounding level; keep it only if it helps.
      const Eigen::Vector2d polish = x - cp.susceptibility.ldlt().solve(grad);
      const CanonicalPoint refined = mean_densities(spec, polish(0), polish(1));
      if ((Eigen::Vector2d(refined.u, refined.v) - target).lpNorm<Eigen::Infinity>() < residual) cp = refined;
      cp.newton_iterations = iter;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cp.susceptibility, Eigen::EigenvaluesOnly);
      const double cond = es.eigenvalues()(1) / es.eigenvalues()(0);
      if (!(cond <= 1e8)) cp.ill_conditioning = cond;
      return cp;
    }
    const Eigen::Vector2d step = -cp.susceptibility.ldlt().solve(grad);
    const double f0 = objective(x);
    const double slope = grad.dot(step);
    double t = 1.0;
    Eigen::Vector2d trial = x + step;
    CanonicalPoint next = mean_densities(spec, trial(0), trial(1));
    for (int ls = 0; ls < 60; ++ls) {
      const double f1 = objective(trial);
      const double next_res = (Eigen::Vector2d(next.u, next.v) - target).lpNorm<Eigen::Infinity>();
      const bool armijo = f1 <= f0 + 1e-4 * t * slope;
      const bool flat = std::abs(f1 - f0) <= 1e-14 * (1.0 + std::abs(f0)) && next_res < residual;
      if (armijo || flat) break;
      t *= 0.5;
      trial = x + t * step;
      next = mean_densities(spec, trial(0), trial(1));
    }
    x = trial;
    cp = next;
  }
  throw NumericalError("invert_densities: Newton did not converge after 200 iterations (residual " +
                       std::to_string(residual) + ")");
}

double entropy_S(const ModelSpec& spec, double u, double v) {
  const CanonicalPoint cp = invert_densities(spec, u, v);
  return u * cp.theta + v * cp.tau - log_mgf(spec, cp.theta, cp.tau);
}

PhysicalDomain physical_domain(const ModelSpec& spec) {
  std::vector<Eigen::Vector2d> pts;
  for (std::size_t i = 0; i < spec.num_states(); ++i)
    pts.emplace_back(spec.zeta()[i], spec.eta()[i]);
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  // Andrew's monotone chain, strict turns only.
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lo = k + 1; i-- > 0;) {
    while (k >= lo && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k > 0 ? k - 1 : 0);
  if (hull.size() < 3)
    throw InvariantError("zeta/eta", "degenerate physical domain: all (zeta, eta) points are collinear");
  return PhysicalDomain{std::move(hull)};
}

double PhysicalDomain::signed_distance(double u, double v) const {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Eigen::Vector2d& a = vertices[i];
    const Eigen::Vector2d& b = vertices[(i + 1) % vertices.size()];
    const Eigen::Vector2d e = b - a;
    const double c = e.x() * (v - a.y()) - e.y() * (u - a.x());
    d = std::min(d, c / e.norm());
  }
  return d;
}

bool PhysicalDomain::contains_interior(double u, double v, double margin) const {
  return signed_distance(u, v) > margin;
}

MicroFlux micro_flux(const ModelSpec& spec, double C1, double C2) {
  const std::size_t k = spec.num_states();
  MicroFlux f;
  f.num_states = k;
  f.C1 = C1;
  f.C2 = C2;
  f.phi.assign(k * k, C1);
  f.psi.assign(k * k, C2);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      for (const PairMove& m : spec.moves(static_cast<int>(a), static_cast<int>(b))) {
        f.phi[a * k + b] += m.rate * (spec.zeta(m.to_right) - spec.zeta()[b]);
        f.psi[a * k + b] += m.rate * (spec.eta(m.to_right) - spec.eta()[b]);
      }
    }
  }
  return f;
}

FluxModel::FluxModel(const ModelSpec& spec, double C1, double C2)
    : spec_(spec), micro_(micro_flux(spec, C1, C2)), domain_(physical_domain(spec)) {}

FluxModel FluxModel::centered_at(const ModelSpec& spec, double u0, double v0) {
  const FluxModel raw(spec);
  const auto [phi0, psi0] = raw.macro_flux(u0, v0);
  return FluxModel(spec, -phi0, -psi0);
}

std::pair<double, double> FluxModel::macro_flux_dual(double theta, double tau) const {
  const auto p = canonical_measure(spec_, theta, tau);
  const std::size_t k = p.size();
  double Phi = 0.0, Psi = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    double rp = 0.0, rs = 0.0;
    for (std::size_t b = 0; b < k; ++b) {
      rp += p[b] * micro_.phi[a * k + b];
      rs += p[b] * micro_.psi[a * k + b];
    }
    Phi += p[a] * rp;
    Psi += p[a] * rs;
  }
  return {Phi, Psi};
}

std::pair<double, double> FluxModel::macro_flux(double u, double v) const {
  const CanonicalPoint cp = invert_densities(spec_, u, v);
  return macro_flux_dual(cp.theta, cp.tau);
}

Eigen::Matrix2d FluxModel::dual_gradient(double theta, double tau) const {
  const auto p = canonical_measure(spec_, theta, tau);
  const std::size_t k = p.size();
  double u = 0.0, v = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    u += p[i] * spec_.zeta()[i];
    v += p[i] * spec_.eta()[i];
  }
  const auto [Phi, Psi] = macro_flux_dual(theta, tau);
  // Cov(f, zeta_1 + zeta_2) = E[(f - E f)(zeta_1 + zeta_2 - 2u)].
  Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      const double w = p[a] * p[b];
      const double dz = spec_.zeta()[a] + spec_.zeta()[b] - 2.0 * u;
      const double de = spec_.eta()[a] + spec_.eta()[b] - 2.0 * v;
      const double fp = micro_.phi[a * k + b] - Phi;
      const double fs = micro_.psi[a * k + b] - Psi;
      g(0, 0) += w * fp * dz;
      g(0, 1) += w * fp * de;
      g(1, 0) += w * fs * dz;
      g(1, 1) += w * fs * de;
    }
  }
  return g;
}

Eigen::Matrix2d FluxModel::flux_jacobian(double u, double v) const {
  const CanonicalPoint cp = invert_densities(spec_, u, v);
  return dual_gradient(cp.theta, cp.tau) * cp.susceptibility.inverse();
}

double FluxModel::onsager_residual(double theta, double tau) const {
  const Eigen::Matrix2d g = dual_gradient(theta, tau);
  return std::abs(g(1, 0) - g(0, 1));
}

FluxModel::Hessians FluxModel::flux_hessians(double u, double v, double h) const {
  if (!domain_.contains_interior(u, v, 2.0 * h))
    throw DomainError("boundary-distance", "flux_hessians needs a distance >= 2h from the domain boundary");
  auto estimate = [&](double step) {
    const Eigen::Matrix2d du = (flux_jacobian(u + step, v) - flux_jacobian(u - step, v)) / (2.0 * step);
    const Eigen::Matrix2d dv = (flux_jacobian(u, v + step) - flux_jacobian(u, v - step)) / (2.0 * step);
    Hessians H;
    // Row i of the Jacobian is the gradient of flux i.
    H.Phi << du(0, 0), dv(0, 0), du(0, 1), dv(0, 1);
    H.Psi << du(1, 0), dv(1, 0), du(1, 1), dv(1, 1);
    H.Phi = 0.5 * (H.Phi + H.Phi.transpose()).eval();
    H.Psi = 0.5 * (H.Psi + H.Psi.transpose()).eval();
    return H;
  };
  Hessians coarse = estimate(h);
  const Hessians fine = estimate(0.5 * h);
  coarse.halving_discrepancy = std::max((coarse.Phi - fine.Phi).cwiseAbs().maxCoeff(),
                                        (coarse.Psi - fine.Psi).cwiseAbs().maxCoeff());
  if (coarse.halving_discrepancy > 1e-5)
    throw NumericalError("flux_hessians: step-halving discrepancy " +
                         std::to_string(coarse.halving_discrepancy) + " exceeds 1e-5");
  return coarse;
}

FluxPoint FluxModel::evaluate(double u, double v) const {
  FluxPoint fp;
  fp.u = u;
  fp.v = v;
  std::tie(fp.Phi, fp.Psi) = macro_flux(u, v);
  fp.jacobian = flux_jacobian(u, v);
  const Hessians H = flux_hessians(u, v);
  fp.hess_Phi = H.Phi;
  fp.hess_Psi = H.Psi;
  return fp;
}

}  // namespace pertlab
