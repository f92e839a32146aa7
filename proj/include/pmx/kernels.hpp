#pragma once

#include <cstddef>
#include <cstdint>

namespace pmx::kernels {

/// Hot arithmetic primitives behind the sampler. Every operation has a scalar
/// reference implementation and an AVX2 variant; the variant is selected once
/// at runtime from cpuid and can be forced for equivalence testing.
enum class Isa { scalar, avx2 };

Isa active_isa();
void force_isa(Isa isa);  // throws if the requested ISA is unavailable
bool cpu_supports_avx2();
const char* isa_name(Isa isa);

/// Order-4 normalized B-spline on 5 strictly ascending knots, prepared as
/// four cubic pieces. Piece p is evaluated in locally shifted coordinates
/// t = (x - knots[0]) - shift[p], which keeps the coefficients conditioned on
/// the local knot-gap scale.
struct Spline4 {
    double t0;          // knots[0]
    double edge[4];     // knots[1..4] - t0; edge[3] is the support width
    double shift[4];    // per-piece expansion origin (in u = x - t0 coords)
    double coef[4][4];  // piece p: c0 + c1*t + c2*t^2 + c3*t^3
};

Spline4 make_spline4(const double* knots5);

/// Scalar single-point density (reference path, ISA-independent).
double spline4_value(const Spline4& s, double x);

/// out[i] = density at xs[i].
void spline4_batch(const Spline4& s, const double* xs, std::size_t n, double* out);

/// Sum of log densities over ascending-sorted xs. Returns -infinity when any
/// point falls outside the support or its density drops below 1e-300.
double spline4_log_likelihood_sorted(const Spline4& s, const double* xs, std::size_t n);

/// out[i] = exp(log_pref[i] - ((xs[i]-mx)^2 + (ys[i]-my)^2) * inv_two_sigma2[i])
void gauss_column(const double* xs, const double* ys, const double* inv_two_sigma2,
                  const double* log_pref, std::size_t n, double mx, double my, double* out);

/// sum_i w[i] * ((xs[i]-mx)^2 + (ys[i]-my)^2)
double weighted_sqdist_sum(const double* xs, const double* ys, const double* w, std::size_t n,
                           double mx, double my);

/// out[i] = fx[i] * fy[i]
void product_column(const double* fx, const double* fy, std::size_t n, double* out);

namespace base {
void spline4_batch(const Spline4& s, const double* xs, std::size_t n, double* out);
double spline4_log_likelihood_sorted(const Spline4& s, const double* xs, std::size_t n);
void gauss_column(const double* xs, const double* ys, const double* inv_two_sigma2,
                  const double* log_pref, std::size_t n, double mx, double my, double* out);
double weighted_sqdist_sum(const double* xs, const double* ys, const double* w, std::size_t n,
                           double mx, double my);
void product_column(const double* fx, const double* fy, std::size_t n, double* out);
}  // namespace base

#if defined(PMX_BUILD_AVX2)
namespace avx2 {
void spline4_batch(const Spline4& s, const double* xs, std::size_t n, double* out);
double spline4_log_likelihood_sorted(const Spline4& s, const double* xs, std::size_t n);
void gauss_column(const double* xs, const double* ys, const double* inv_two_sigma2,
                  const double* log_pref, std::size_t n, double mx, double my, double* out);
double weighted_sqdist_sum(const double* xs, const double* ys, const double* w, std::size_t n,
                           double mx, double my);
void product_column(const double* fx, const double* fy, std::size_t n, double* out);
}  // namespace avx2
#endif

}  // namespace pmx::kernels
