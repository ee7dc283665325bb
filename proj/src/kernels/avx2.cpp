// AVX2 kernels. Compiled with -mavx2 only (no FMA) so that element-wise
// results match the scalar reference bitwise.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "pertlab/kernels.hpp"

namespace pertlab::kernels::avx2 {

namespace {

inline double flux_value(double w, double half_quad, double lin) { return w * (half_quad * w + lin); }

inline __m256d flux_value(__m256d w, __m256d half_quad, __m256d lin) {
  return _mm256_mul_pd(w, _mm256_add_pd(_mm256_mul_pd(half_quad, w), lin));
}

// Closed-form Godunov flux for a quadratic flux with curvature sign fixed.
inline double godunov_closed(double wl, double wr, double sonic, double hq, double lin, bool convex) {
  if (convex)
    return std::max(flux_value(std::max(wl, sonic), hq, lin), flux_value(std::min(wr, sonic), hq, lin));
  return std::min(flux_value(std::min(wl, sonic), hq, lin), flux_value(std::max(wr, sonic), hq, lin));
}

}  // namespace

void godunov_fluxes(std::span<const double> w, std::span<double> fluxes, QuadraticFlux f) {
  const std::size_t m = w.size();
  if (m == 0) return;
  const double* src = w.data();
  double* dst = fluxes.data();
  const double hq = 0.5 * f.quad;

  if (f.quad == 0.0) {
    const __m256d vlin = _mm256_set1_pd(f.lin);
    const __m256d vhq = _mm256_set1_pd(hq);
    const std::size_t shift = f.lin >= 0.0 ? 0 : 1;
    std::size_t i = 0;
    for (; i + 4 < m; i += 4) {
      const __m256d up = _mm256_loadu_pd(src + i + shift);
      _mm256_storeu_pd(dst + i, flux_value(up, vhq, vlin));
    }
    for (; i < m; ++i) dst[i] = flux_value(src[(i + shift) % m], hq, f.lin);
    return;
  }

  const bool convex = f.quad > 0.0;
  const double sonic = -f.lin / f.quad;
  const __m256d vs = _mm256_set1_pd(sonic);
  const __m256d vhq = _mm256_set1_pd(hq);
  const __m256d vlin = _mm256_set1_pd(f.lin);
  std::size_t i = 0;
  // The right neighbour of the last cell wraps around, so stop one short.
  if (convex) {
    for (; i + 4 < m; i += 4) {
      const __m256d wl = _mm256_loadu_pd(src + i);
      const __m256d wr = _mm256_loadu_pd(src + i + 1);
      const __m256d fa = flux_value(_mm256_max_pd(wl, vs), vhq, vlin);
      const __m256d fb = flux_value(_mm256_min_pd(wr, vs), vhq, vlin);
      _mm256_storeu_pd(dst + i, _mm256_max_pd(fa, fb));
    }
  } else {
    for (; i + 4 < m; i += 4) {
      const __m256d wl = _mm256_loadu_pd(src + i);
      const __m256d wr = _mm256_loadu_pd(src + i + 1);
      const __m256d fa = flux_value(_mm256_min_pd(wl, vs), vhq, vlin);
      const __m256d fb = flux_value(_mm256_max_pd(wr, vs), vhq, vlin);
      _mm256_storeu_pd(dst + i, _mm256_min_pd(fa, fb));
    }
  }
  for (; i < m; ++i) dst[i] = godunov_closed(src[i], src[(i + 1) % m], sonic, hq, f.lin, convex);
}

void conservative_update(std::span<const double> w, std::span<const double> fluxes,
                         std::span<double> out, double ratio) {
  const std::size_t m = w.size();
  if (m == 0) return;
  out[0] = w[0] - ratio * (fluxes[0] - fluxes[m - 1]);
  const __m256d r = _mm256_set1_pd(ratio);
  std::size_t i = 1;
  for (; i + 4 <= m; i += 4) {
    const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(fluxes.data() + i), _mm256_loadu_pd(fluxes.data() + i - 1));
    _mm256_storeu_pd(out.data() + i, _mm256_sub_pd(_mm256_loadu_pd(w.data() + i), _mm256_mul_pd(r, diff)));
  }
  for (; i < m; ++i) out[i] = w[i] - ratio * (fluxes[i] - fluxes[i - 1]);
}

double max_wave_speed(std::span<const double> w, QuadraticFlux f) {
  const __m256d q = _mm256_set1_pd(f.quad);
  const __m256d l = _mm256_set1_pd(f.lin);
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= w.size(); i += 4) {
    const __m256d s = _mm256_add_pd(_mm256_mul_pd(q, _mm256_loadu_pd(w.data() + i)), l);
    acc = _mm256_max_pd(acc, _mm256_andnot_pd(sign, s));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double best = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
  for (; i < w.size(); ++i) best = std::max(best, std::abs(f.quad * w[i] + f.lin));
  return best;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= x.size(); i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x.data() + i));
    _mm256_storeu_pd(y.data() + i, _mm256_add_pd(_mm256_loadu_pd(y.data() + i), prod));
  }
  for (; i < x.size(); ++i) y[i] = y[i] + a * x[i];
}

double sum(std::span<const double> x) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= x.size(); i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x.data() + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x.data() + i + 4));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < x.size(); ++i) s += x[i];
  return s;
}

}  // namespace pertlab::kernels::avx2
