#include <atomic>

#include "pertlab/errors.hpp"
#include "pertlab/kernels.hpp"

namespace pertlab::kernels {

namespace {

Isa probe() noexcept {
#if defined(PERTLAB_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2")) return Isa::avx2;
#endif
  return Isa::scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detected_isa()};
  return isa;
}

}  // namespace

Isa detected_isa() noexcept {
  static const Isa isa = probe();
  return isa;
}

Isa active_isa() noexcept { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (isa == Isa::avx2 && detected_isa() != Isa::avx2)
    throw ConfigError("AVX2 kernels are not available on this build or CPU");
  active().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

#if defined(PERTLAB_HAVE_AVX2_KERNELS)
#define PERTLAB_DISPATCH(fn, ...) \
  (active_isa() == Isa::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define PERTLAB_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void godunov_fluxes(std::span<const double> w, std::span<double> fluxes, QuadraticFlux f) {
  PERTLAB_DISPATCH(godunov_fluxes, w, fluxes, f);
}

void conservative_update(std::span<const double> w, std::span<const double> fluxes,
                         std::span<double> out, double ratio) {
  PERTLAB_DISPATCH(conservative_update, w, fluxes, out, ratio);
}

double max_wave_speed(std::span<const double> w, QuadraticFlux f) {
  return PERTLAB_DISPATCH(max_wave_speed, w, f);
}

void axpy(double a, std::span<const double> x, std::span<double> y) { PERTLAB_DISPATCH(axpy, a, x, y); }

double sum(std::span<const double> x) { return PERTLAB_DISPATCH(sum, x); }

}  // namespace pertlab::kernels
