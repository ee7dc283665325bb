#include "pertlab/waves.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pertlab/errors.hpp"

namespace pertlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Eigen::Vector2d null_vector(const Eigen::Matrix2d& D, double e) {
  const Eigen::Vector2d x1(D(0, 1), e - D(0, 0));
  const Eigen::Vector2d x2(e - D(1, 1), D(1, 0));
  Eigen::Vector2d x = x1.norm() >= x2.norm() ? x1 : x2;
  x.normalize();
  const double tiny = 1e-14;
  if (x(0) < -tiny || (std::abs(x(0)) <= tiny && x(1) < 0.0)) x = -x;
  return x;
}

double wrap01(double x) {
  x -= std::floor(x);
  return x >= 1.0 ? 0.0 : x;
}

double snap(double x) { return std::abs(x) < GeoCoeffs::zero_snap ? 0.0 : x; }

Eigen::Vector2d quadratic_forms(const FluxModel::Hessians& H, const Eigen::Vector2d& x,
                                const Eigen::Vector2d& y) {
  return {x.dot(H.Phi * y), x.dot(H.Psi * y)};
}

// Shared by the plain and corrected reconstructions so that a vanishing
// correction reproduces the plain profile bit for bit.
std::pair<double, double> combine(double along_r, double along_s, const EigenStructure& e) {
  return {along_r * e.r(0) + along_s * e.s(0), along_r * e.r(1) + along_s * e.s(1)};
}

}  // namespace

EigenStructure eigen_structure(const Eigen::Matrix2d& D) {
  const double tr = D.trace();
  const double half_diff = 0.5 * (D(0, 0) - D(1, 1));
  const double disc = half_diff * half_diff + D(0, 1) * D(1, 0);
  if (disc < 0.0)
    throw DomainError("weak-hyperbolicity",
                      "flux Jacobian has complex eigenvalues; the model is inconsistent");
  const double root = std::sqrt(disc);
  const double e1 = 0.5 * tr + root;
  const double e2 = 0.5 * tr - root;
  if (e1 - e2 <= 1e-8)
    throw DomainError("strict-hyperbolicity", "eigenvalues coincide (lambda == mu); expansion point "
                                              "is not strictly hyperbolic");
  Eigen::Vector2d x1 = null_vector(D, e1);
  Eigen::Vector2d x2 = null_vector(D, e2);

  EigenStructure es;
  const bool first_is_lambda = std::abs(x1(0)) > std::abs(x2(0)) + 1e-14 ||
                               (std::abs(std::abs(x1(0)) - std::abs(x2(0))) <= 1e-14);
  if (first_is_lambda) {
    es.lambda = e1;
    es.mu = e2;
    es.r = x1;
    es.s = x2;
  } else {
    es.lambda = e2;
    es.mu = e1;
    es.r = x2;
    es.s = x1;
  }
  Eigen::Matrix2d R;
  R.col(0) = es.r;
  R.col(1) = es.s;
  const Eigen::Matrix2d P = R.inverse();
  es.l = P.row(0).transpose();
  es.m = P.row(1).transpose();
  return es;
}

Eigen::Matrix2d NormalizedFrame::to_normalized_matrix() const {
  Eigen::Matrix2d P;
  P.row(0) = eigen.l.transpose();
  P.row(1) = eigen.m.transpose();
  return P;
}

Eigen::Matrix2d NormalizedFrame::from_normalized_matrix() const {
  Eigen::Matrix2d R;
  R.col(0) = eigen.r;
  R.col(1) = eigen.s;
  return R;
}

Eigen::Vector2d NormalizedFrame::to_normalized(const Eigen::Vector2d& uv) const {
  return to_normalized_matrix() * (uv - Eigen::Vector2d(u0, v0));
}

Eigen::Vector2d NormalizedFrame::from_normalized(const Eigen::Vector2d& xy) const {
  return Eigen::Vector2d(u0, v0) + from_normalized_matrix() * xy;
}

std::pair<double, double> NormalizedFrame::flux(const FluxModel& model, double x, double y) const {
  const Eigen::Vector2d uv = from_normalized({x, y});
  const auto [p0, s0] = model.macro_flux(u0, v0);
  const auto [p, s] = model.macro_flux(uv(0), uv(1));
  const Eigen::Vector2d F(p - p0, s - s0);
  return {eigen.l.dot(F), eigen.m.dot(F)};
}

Eigen::Matrix2d NormalizedFrame::jacobian(const FluxModel& model) const {
  return to_normalized_matrix() * model.flux_jacobian(u0, v0) * from_normalized_matrix();
}

NormalizedFrame normalize_coordinates(const FluxModel& model, double u0, double v0) {
  NormalizedFrame f;
  f.u0 = u0;
  f.v0 = v0;
  f.eigen = eigen_structure(model.flux_jacobian(u0, v0));
  return f;
}

GeoCoeffs geo_coefficients(const FluxModel& model, double u0, double v0) {
  const NormalizedFrame frame = normalize_coordinates(model, u0, v0);
  const EigenStructure& e = frame.eigen;
  const FluxModel::Hessians H = model.flux_hessians(u0, v0);

  GeoCoeffs c;
  c.a1 = e.l.dot(quadratic_forms(H, e.r, e.r));
  c.a2 = e.l.dot(quadratic_forms(H, e.r, e.s));
  c.b1 = e.m.dot(quadratic_forms(H, e.s, e.s));
  c.b2 = e.m.dot(quadratic_forms(H, e.r, e.s));
  const double a3_general = e.l.dot(quadratic_forms(H, e.s, e.s));
  const double b3_general = e.m.dot(quadratic_forms(H, e.r, e.r));

  // Independent route: second differences of the transformed fluxes.
  const double h = 1e-3;
  if (!model.domain().contains_interior(u0, v0, 3.0 * h))
    throw DomainError("boundary-distance", "base point too close to the domain boundary");
  auto F = [&](double x, double y) { return frame.flux(model, x, y); };
  const auto f00 = F(0, 0);
  const auto fp0 = F(h, 0), fm0 = F(-h, 0), f0p = F(0, h), f0m = F(0, -h);
  const auto fpp = F(h, h), fpm = F(h, -h), fmp = F(-h, h), fmm = F(-h, -h);
  const double h2 = h * h;
  const double phi_xx = (fp0.first - 2 * f00.first + fm0.first) / h2;
  const double phi_yy = (f0p.first - 2 * f00.first + f0m.first) / h2;
  const double phi_xy = (fpp.first - fpm.first - fmp.first + fmm.first) / (4 * h2);
  const double psi_xx = (fp0.second - 2 * f00.second + fm0.second) / h2;
  const double psi_yy = (f0p.second - 2 * f00.second + f0m.second) / h2;
  const double psi_xy = (fpp.second - fpm.second - fmp.second + fmm.second) / (4 * h2);

  c.a2n = phi_xy;
  c.a3 = phi_yy;
  c.b2n = psi_xy;
  c.b3 = psi_xx;
  c.frame_discrepancy = std::max({std::abs(c.a1 - phi_xx), std::abs(c.a2 - phi_xy),
                                  std::abs(a3_general - phi_yy), std::abs(c.b1 - psi_yy),
                                  std::abs(c.b2 - psi_xy), std::abs(b3_general - psi_xx)});
  if (c.frame_discrepancy > 1e-6)
    throw NumericalError("geo_coefficients: general and normalized frames disagree by " +
                         std::to_string(c.frame_discrepancy));
  // The analytic-Jacobian route is the more accurate one; use it for storage.
  c.a2n = c.a2;
  c.a3 = a3_general;
  c.b2n = c.b2;
  c.b3 = b3_general;
  for (double* x : {&c.a1, &c.a2, &c.b1, &c.b2, &c.a2n, &c.a3, &c.b2n, &c.b3}) *x = snap(*x);
  return c;
}

double Profile::operator()(double x) const {
  switch (shape) {
    case Shape::zero: return 0.0;
    case Shape::constant: return amplitude;
    case Shape::cos: return amplitude * std::cos(kTwoPi * x);
    case Shape::sin: return amplitude * std::sin(kTwoPi * x);
  }
  return 0.0;
}

double Profile::derivative(double x) const {
  switch (shape) {
    case Shape::zero:
    case Shape::constant: return 0.0;
    case Shape::cos: return -kTwoPi * amplitude * std::sin(kTwoPi * x);
    case Shape::sin: return kTwoPi * amplitude * std::cos(kTwoPi * x);
  }
  return 0.0;
}

std::string Profile::name() const {
  switch (shape) {
    case Shape::zero: return "zero";
    case Shape::constant: return "one";
    case Shape::cos: return "cos";
    case Shape::sin: return "sin";
  }
  return "?";
}

Profile Profile::parse(const std::string& name, double amplitude) {
  if (name == "zero") return {Shape::zero, amplitude};
  if (name == "one" || name == "const" || name == "constant" || name == "1") return {Shape::constant, amplitude};
  if (name == "cos") return {Shape::cos, amplitude};
  if (name == "sin") return {Shape::sin, amplitude};
  throw ConfigError("unknown profile '" + name + "' (expected zero, one, cos, sin)");
}

double PeriodicGrid::interpolate(std::span<const double> values, double x) const {
  const double y = wrap01(x) * cells - 0.5;
  const double fl = std::floor(y);
  const double frac = y - fl;
  int i0 = static_cast<int>(fl);
  i0 = ((i0 % cells) + cells) % cells;
  const int i1 = (i0 + 1) % cells;
  return (1.0 - frac) * values[static_cast<std::size_t>(i0)] + frac * values[static_cast<std::size_t>(i1)];
}

InitialWaves initial_waves(const ProfileFn& u_star, const ProfileFn& v_star,
                           const EigenStructure& eigen, int M) {
  if (M < 64) throw ConfigError("initial_waves: grid needs at least 64 cells");
  InitialWaves w;
  w.grid.cells = M;
  w.sigma0.resize(static_cast<std::size_t>(M));
  w.delta0.resize(static_cast<std::size_t>(M));
  double cs = 0.0, cd = 0.0;
  for (int i = 0; i < M; ++i) {
    const double x = w.grid.center(i);
    const Eigen::Vector2d p(u_star(x), v_star(x));
    w.sigma0[static_cast<std::size_t>(i)] = eigen.l.dot(p);
    w.delta0[static_cast<std::size_t>(i)] = eigen.m.dot(p);
    const Eigen::Vector2d q(u_star(static_cast<double>(i) / M), v_star(static_cast<double>(i) / M));
    cs += eigen.l.dot(q);
    cd += eigen.m.dot(q);
  }
  w.c_sigma = cs / M;
  w.c_delta = cd / M;
  return w;
}

double estimate_shock_time(std::span<const double> w0, kernels::QuadraticFlux flux) {
  const std::size_t m = w0.size();
  const double inv2dx = 0.5 * static_cast<double>(m);
  double slope = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dw = (w0[(i + 1) % m] - w0[(i + m - 1) % m]) * inv2dx;
    slope = std::min(slope, flux.quad * dw);
  }
  return slope < 0.0 ? -1.0 / slope : std::numeric_limits<double>::infinity();
}

ScalarSolution solve_scalar_conservation(std::span<const double> w0, kernels::QuadraticFlux flux,
                                         double T, std::span<const double> snapshot_times,
                                         double cfl) {
  if (w0.empty()) throw ConfigError("solve_scalar_conservation: empty grid");
  if (!(T >= 0.0)) throw ConfigError("solve_scalar_conservation: negative horizon");
  ScalarSolution sol;
  sol.cfl = cfl;
  sol.shock_time = estimate_shock_time(w0, flux);
  if (T > 0.9 * sol.shock_time)
    throw DomainError("shock-time", "horizon " + std::to_string(T) + " exceeds 0.9 x estimated shock time " +
                                        std::to_string(sol.shock_time) + "; only smooth solutions are supported");
  for (std::size_t i = 0; i < snapshot_times.size(); ++i) {
    if (snapshot_times[i] < 0.0 || snapshot_times[i] > T || (i > 0 && snapshot_times[i] < snapshot_times[i - 1]))
      throw ConfigError("solve_scalar_conservation: snapshot times must be ascending within [0, T]");
  }

  const std::size_t m = w0.size();
  const double dx = 1.0 / static_cast<double>(m);
  std::vector<double> w(w0.begin(), w0.end()), next(m), fluxes(m);
  double t = 0.0;
  double mass = kernels::sum(w);
  for (double target : snapshot_times) {
    while (target - t > 1e-14 * std::max(1.0, target)) {
      const double speed = kernels::max_wave_speed(w, flux);
      double dt = speed > 0.0 ? cfl * dx / speed : target - t;
      dt = std::min(dt, target - t);
      kernels::godunov_fluxes(w, fluxes, flux);
      kernels::conservative_update(w, fluxes, next, dt / dx);
      w.swap(next);
      const double new_mass = kernels::sum(w);
      sol.max_mass_change = std::max(sol.max_mass_change, std::abs(new_mass - mass) * dx);
      mass = new_mass;
      t += dt;
      ++sol.steps;
    }
    t = target;
    sol.times.push_back(target);
    sol.states.push_back(w);
  }
  return sol;
}

double characteristics_oracle(const ProfileFn& w0, double w_min, double w_max, double quad,
                              double lin, double t, double x) {
  auto h = [&](double w) { return w - w0(x - (quad * w + lin) * t); };
  if (w_max < w_min) std::swap(w_min, w_max);
  if (w_max - w_min < 1e-15) return w_min;
  constexpr int kScan = 512;
  double lo = w_min, hi = w_max;
  double prev = h(w_min);
  int sign_changes = 0;
  bool bracketed = prev == 0.0;
  for (int i = 1; i <= kScan; ++i) {
    const double w = w_min + (w_max - w_min) * i / kScan;
    const double cur = h(w);
    if ((prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0)) {
      ++sign_changes;
      lo = w_min + (w_max - w_min) * (i - 1) / kScan;
      hi = w;
      bracketed = true;
    } else if (cur == 0.0 && !bracketed) {
      return w;
    }
    prev = cur;
  }
  if (!bracketed || sign_changes > 1)
    throw DomainError("shock-time", "characteristics do not give a unique root (t past the shock time?)");
  if (h(lo) == 0.0) return lo;
  double flo = h(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = h(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

ProfilePair reconstruct_profiles(const WaveField& field, const EigenStructure& eigen, int n,
                                 double beta) {
  const double scale = std::pow(static_cast<double>(n), beta) * field.time;
  ProfilePair out;
  out.u.resize(static_cast<std::size_t>(n));
  out.v.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double x = static_cast<double>(j) / n;
    const double sig = field.grid.interpolate(field.sigma, x - eigen.lambda * scale);
    const double del = field.grid.interpolate(field.delta, x - eigen.mu * scale);
    std::tie(out.u[static_cast<std::size_t>(j)], out.v[static_cast<std::size_t>(j)]) = combine(sig, del, eigen);
  }
  return out;
}

CorrectionField::CorrectionField(const WaveField& field, const GeoCoeffs& coeffs,
                                 const EigenStructure& eigen)
    : grid_(field.grid), coeffs_(coeffs), sigma_(field.sigma), delta_(field.delta) {
  const double gap = eigen.lambda - eigen.mu;
  if (std::abs(gap) <= 1e-8)
    throw DomainError("strict-hyperbolicity", "correction terms divide by lambda - mu");
  inv_gap_ = 1.0 / gap;
  zero_ = coeffs.a2n == 0.0 && coeffs.a3 == 0.0 && coeffs.b2n == 0.0 && coeffs.b3 == 0.0;

  const std::size_t m = sigma_.size();
  const double dx = grid_.dx();
  auto derivative = [&](const std::vector<double>& f) {
    std::vector<double> d(m);
    for (std::size_t i = 0; i < m; ++i) d[i] = (f[(i + 1) % m] - f[(i + m - 1) % m]) / (2.0 * dx);
    return d;
  };
  // Antiderivative of f - mean(f) from x = 0; periodic because the
  // integrand has zero discrete mean.
  auto antiderivative = [&](const std::vector<double>& f) {
    double mean = 0.0;
    for (double x : f) mean += x;
    mean /= static_cast<double>(m);
    std::vector<double> a(m);
    a[0] = 0.0;
    for (std::size_t i = 1; i < m; ++i) a[i] = a[i - 1] + 0.5 * dx * ((f[i - 1] - mean) + (f[i] - mean));
    const double value_at_zero = grid_.interpolate(a, 0.0);
    for (double& x : a) x -= value_at_zero;
    return a;
  };
  dsigma_ = derivative(sigma_);
  ddelta_ = derivative(delta_);
  int_sigma_ = antiderivative(sigma_);
  int_delta_ = antiderivative(delta_);
}

double CorrectionField::sigma_bar(double x1, double x2) const {
  if (coeffs_.a2n == 0.0 && coeffs_.a3 == 0.0) return 0.0;
  const double s = grid_.interpolate(sigma_, x1);
  const double ds = grid_.interpolate(dsigma_, x1);
  const double d = grid_.interpolate(delta_, x2);
  const double id = grid_.interpolate(int_delta_, x2);
  return inv_gap_ * (coeffs_.a2n * s * d + coeffs_.a2n * ds * id + 0.5 * coeffs_.a3 * d * d);
}

double CorrectionField::delta_bar(double x1, double x2) const {
  if (coeffs_.b2n == 0.0 && coeffs_.b3 == 0.0) return 0.0;
  const double s = grid_.interpolate(sigma_, x1);
  const double is = grid_.interpolate(int_sigma_, x1);
  const double d = grid_.interpolate(delta_, x2);
  const double dd = grid_.interpolate(ddelta_, x2);
  return -inv_gap_ * (coeffs_.b2n * s * d + coeffs_.b2n * dd * is + 0.5 * coeffs_.b3 * s * s);
}

std::pair<double, double> CorrectionField::max_abs(int samples) const {
  double ms = 0.0, md = 0.0;
  for (int i = 0; i < samples; ++i) {
    for (int j = 0; j < samples; ++j) {
      const double x1 = (i + 0.5) / samples, x2 = (j + 0.5) / samples;
      ms = std::max(ms, std::abs(sigma_bar(x1, x2)));
      md = std::max(md, std::abs(delta_bar(x1, x2)));
    }
  }
  return {ms, md};
}

ProfilePair corrected_profiles(const WaveField& field, const CorrectionField& correction,
                               const EigenStructure& eigen, int n, double beta) {
  const double nb = std::pow(static_cast<double>(n), beta);
  const double scale = nb * field.time;
  const double damp = 1.0 / nb;
  ProfilePair out;
  out.u.resize(static_cast<std::size_t>(n));
  out.v.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double x = static_cast<double>(j) / n;
    const double x1 = x - eigen.lambda * scale;
    const double x2 = x - eigen.mu * scale;
    const double sig = field.grid.interpolate(field.sigma, x1) + damp * correction.sigma_bar(x1, x2);
    const double del = field.grid.interpolate(field.delta, x2) + damp * correction.delta_bar(x1, x2);
    std::tie(out.u[static_cast<std::size_t>(j)], out.v[static_cast<std::size_t>(j)]) = combine(sig, del, eigen);
  }
  return out;
}

WavePrediction::WavePrediction(const FluxModel& model, double u0, double v0, ProfileFn u_star,
                               ProfileFn v_star, int M, std::vector<double> times)
    : u0_(u0), v0_(v0), frame_(normalize_coordinates(model, u0, v0)),
      coeffs_(geo_coefficients(model, u0, v0)), initial_(initial_waves(u_star, v_star, frame_.eigen, M)),
      times_(std::move(times)) {
  if (times_.empty()) throw ConfigError("WavePrediction: at least one time required");
  std::sort(times_.begin(), times_.end());
  times_.erase(std::unique(times_.begin(), times_.end()), times_.end());
  coeffs_.c_sigma = initial_.c_sigma;
  coeffs_.c_delta = initial_.c_delta;
  const double T = times_.back();
  sigma_ = solve_scalar_conservation(initial_.sigma0, {coeffs_.a1, coeffs_.c_delta * coeffs_.a2}, T, times_);
  delta_ = solve_scalar_conservation(initial_.delta0, {coeffs_.b1, coeffs_.c_sigma * coeffs_.b2}, T, times_);
  for (std::size_t k = 0; k < times_.size(); ++k) {
    fields_.push_back({initial_.grid, times_[k], sigma_.states[k], delta_.states[k]});
    corrections_.emplace_back(fields_.back(), coeffs_, frame_.eigen);
  }
}

double WavePrediction::shock_time() const noexcept { return std::min(sigma_.shock_time, delta_.shock_time); }

std::size_t WavePrediction::time_index(double t) const {
  for (std::size_t k = 0; k < times_.size(); ++k)
    if (std::abs(times_[k] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return k;
  throw ConfigError("time " + std::to_string(t) + " was not among the solved snapshot times");
}

std::pair<double, double> WavePrediction::perturbation(std::size_t k, double x, int n, double beta) const {
  const WaveField& f = fields_[k];
  const double scale = std::pow(static_cast<double>(n), beta) * f.time;
  const double sig = f.grid.interpolate(f.sigma, x - eigen().lambda * scale);
  const double del = f.grid.interpolate(f.delta, x - eigen().mu * scale);
  return combine(sig, del, eigen());
}

std::pair<double, double> WavePrediction::corrected(std::size_t k, double x, int n, double beta) const {
  const WaveField& f = fields_[k];
  const double nb = std::pow(static_cast<double>(n), beta);
  const double scale = nb * f.time;
  const double x1 = x - eigen().lambda * scale;
  const double x2 = x - eigen().mu * scale;
  const double sig = f.grid.interpolate(f.sigma, x1) + (1.0 / nb) * corrections_[k].sigma_bar(x1, x2);
  const double del = f.grid.interpolate(f.delta, x2) + (1.0 / nb) * corrections_[k].delta_bar(x1, x2);
  return combine(sig, del, eigen());
}

}  // namespace pertlab
