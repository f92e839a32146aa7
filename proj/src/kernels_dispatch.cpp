#include <atomic>
#include <stdexcept>

#include "pmx/kernels.hpp"

namespace pmx::kernels {

namespace {

bool detect_avx2() {
#if defined(PMX_BUILD_AVX2) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

std::atomic<Isa> g_isa{detect_avx2() ? Isa::avx2 : Isa::scalar};

}  // namespace

bool cpu_supports_avx2() { return detect_avx2(); }

Isa active_isa() { return g_isa.load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
    if (isa == Isa::avx2 && !cpu_supports_avx2())
        throw std::runtime_error("force_isa: AVX2 not available on this CPU/build");
    g_isa.store(isa, std::memory_order_relaxed);
}

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void spline4_batch(const Spline4& s, const double* xs, std::size_t n, double* out) {
#if defined(PMX_BUILD_AVX2)
    if (active_isa() == Isa::avx2) return avx2::spline4_batch(s, xs, n, out);
#endif
    base::spline4_batch(s, xs, n, out);
}

double spline4_log_likelihood_sorted(const Spline4& s, const double* xs, std::size_t n) {
#if defined(PMX_BUILD_AVX2)
    if (active_isa() == Isa::avx2) return avx2::spline4_log_likelihood_sorted(s, xs, n);
#endif
    return base::spline4_log_likelihood_sorted(s, xs, n);
}

void gauss_column(const double* xs, const double* ys, const double* inv_two_sigma2,
                  const double* log_pref, std::size_t n, double mx, double my, double* out) {
#if defined(PMX_BUILD_AVX2)
    if (active_isa() == Isa::avx2)
        return avx2::gauss_column(xs, ys, inv_two_sigma2, log_pref, n, mx, my, out);
#endif
    base::gauss_column(xs, ys, inv_two_sigma2, log_pref, n, mx, my, out);
}

double weighted_sqdist_sum(const double* xs, const double* ys, const double* w, std::size_t n,
                           double mx, double my) {
#if defined(PMX_BUILD_AVX2)
    if (active_isa() == Isa::avx2) return avx2::weighted_sqdist_sum(xs, ys, w, n, mx, my);
#endif
    return base::weighted_sqdist_sum(xs, ys, w, n, mx, my);
}

void product_column(const double* fx, const double* fy, std::size_t n, double* out) {
#if defined(PMX_BUILD_AVX2)
    if (active_isa() == Isa::avx2) return avx2::product_column(fx, fy, n, out);
#endif
    base::product_column(fx, fy, n, out);
}

}  // namespace pmx::kernels
