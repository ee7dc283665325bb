// Reference kernels. The Godunov flux is written from its definition (minimum
// of f over [wl, wr] for wl <= wr, maximum over [wr, wl] otherwise) rather
// than the closed-form min/max expression the vector variant uses.

#include <algorithm>
#include <cmath>

#include "pertlab/kernels.hpp"

namespace pertlab::kernels::scalar {

namespace {

double flux_value(double w, double half_quad, double lin) { return w * (half_quad * w + lin); }

double godunov(double wl, double wr, QuadraticFlux f) {
  const double hq = 0.5 * f.quad;
  if (f.quad == 0.0) return f.lin >= 0.0 ? flux_value(wl, hq, f.lin) : flux_value(wr, hq, f.lin);
  const double sonic = -f.lin / f.quad;
  const double fl = flux_value(wl, hq, f.lin);
  const double fr = flux_value(wr, hq, f.lin);
  const double fs = flux_value(sonic, hq, f.lin);
  const bool sonic_inside = std::min(wl, wr) < sonic && sonic < std::max(wl, wr);
  if (wl <= wr) {
    // min over [wl, wr]
    double m = std::min(fl, fr);
    if (sonic_inside && f.quad > 0.0) m = std::min(m, fs);
    return m;
  }
  // max over [wr, wl]
  double m = std::max(fl, fr);
  if (sonic_inside && f.quad < 0.0) m = std::max(m, fs);
  return m;
}

}  // namespace

void godunov_fluxes(std::span<const double> w, std::span<double> fluxes, QuadraticFlux f) {
  const std::size_t m = w.size();
  for (std::size_t i = 0; i < m; ++i) fluxes[i] = godunov(w[i], w[(i + 1) % m], f);
}

void conservative_update(std::span<const double> w, std::span<const double> fluxes,
                         std::span<double> out, double ratio) {
  const std::size_t m = w.size();
  for (std::size_t i = 0; i < m; ++i) {
    const double left = fluxes[(i + m - 1) % m];
    out[i] = w[i] - ratio * (fluxes[i] - left);
  }
}

double max_wave_speed(std::span<const double> w, QuadraticFlux f) {
  double s = 0.0;
  for (double x : w) s = std::max(s, std::abs(f.quad * x + f.lin));
  return s;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = y[i] + a * x[i];
}

double sum(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

}  // namespace pertlab::kernels::scalar
