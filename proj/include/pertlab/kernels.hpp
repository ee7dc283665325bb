#pragma once
// Data-parallel inner loops with a scalar reference implementation and an
// AVX2 variant chosen at runtime. Variants agree bitwise on the element-wise
// kernels; reductions may differ by reassociation.

#include <span>
#include <string_view>

namespace pertlab::kernels {

enum class Isa { scalar, avx2 };

/// Flux f(w) = quad * w^2 / 2 + lin * w.
struct QuadraticFlux {
  double quad = 0.0;
  double lin = 0.0;
};

/// Best ISA supported by both the build and the running CPU.
Isa detected_isa() noexcept;
/// ISA used by the dispatching entry points (detected unless overridden).
Isa active_isa() noexcept;
/// Force a variant; passing the detected ISA (or scalar) is always valid.
void set_active_isa(Isa isa);
std::string_view isa_name(Isa isa) noexcept;

// Dispatching entry points.

/// Godunov numerical flux at every interface i+1/2 of a periodic grid:
/// fluxes[i] = G(w[i], w[(i+1) % M]).
void godunov_fluxes(std::span<const double> w, std::span<double> fluxes, QuadraticFlux f);
/// out[i] = w[i] - ratio * (fluxes[i] - fluxes[i-1]), periodic.
void conservative_update(std::span<const double> w, std::span<const double> fluxes,
                         std::span<double> out, double ratio);
/// max_i |f'(w[i])|.
double max_wave_speed(std::span<const double> w, QuadraticFlux f);
/// y += a * x.
void axpy(double a, std::span<const double> x, std::span<double> y);
/// sum_i x[i].
double sum(std::span<const double> x);

namespace scalar {
void godunov_fluxes(std::span<const double> w, std::span<double> fluxes, QuadraticFlux f);
void conservative_update(std::span<const double> w, std::span<const double> fluxes,
                         std::span<double> out, double ratio);
double max_wave_speed(std::span<const double> w, QuadraticFlux f);
void axpy(double a, std::span<const double> x, std::span<double> y);
double sum(std::span<const double> x);
}  // namespace scalar

#if defined(PERTLAB_HAVE_AVX2_KERNELS)
namespace avx2 {
void godunov_fluxes(std::span<const double> w, std::span<double> fluxes, QuadraticFlux f);
void conservative_update(std::span<const double> w, std::span<const double> fluxes,
                         std::span<double> out, double ratio);
double max_wave_speed(std::span<const double> w, QuadraticFlux f);
void axpy(double a, std::span<const double> x, std::span<double> y);
double sum(std::span<const double> x);
}  // namespace avx2
#endif

}  // namespace pertlab::kernels
