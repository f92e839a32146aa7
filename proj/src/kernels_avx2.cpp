#include "pmx/kernels.hpp"

#if defined(PMX_BUILD_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace pmx::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void spline4_batch(const Spline4& s, const double* xs, std::size_t n, double* out) {
    const __m256d t0 = _mm256_set1_pd(s.t0);
    const __m256d e0 = _mm256_set1_pd(s.edge[0]);
    const __m256d e1 = _mm256_set1_pd(s.edge[1]);
    const __m256d e2 = _mm256_set1_pd(s.edge[2]);
    const __m256d e3 = _mm256_set1_pd(s.edge[3]);
    __m256d c[4][4], sh[4];
    for (int p = 0; p < 4; ++p) {
        sh[p] = _mm256_set1_pd(s.shift[p]);
        for (int k = 0; k < 4; ++k) c[p][k] = _mm256_set1_pd(s.coef[p][k]);
    }
    const __m256d zero = _mm256_setzero_pd();

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d u = _mm256_sub_pd(_mm256_loadu_pd(xs + i), t0);
        const __m256d m1 = _mm256_cmp_pd(u, e0, _CMP_GE_OQ);
        const __m256d m2 = _mm256_cmp_pd(u, e1, _CMP_GE_OQ);
        const __m256d m3 = _mm256_cmp_pd(u, e2, _CMP_GE_OQ);
        __m256d c0 = c[0][0], c1 = c[0][1], c2 = c[0][2], c3 = c[0][3], so = sh[0];
        c0 = _mm256_blendv_pd(c0, c[1][0], m1);
        c1 = _mm256_blendv_pd(c1, c[1][1], m1);
        c2 = _mm256_blendv_pd(c2, c[1][2], m1);
        c3 = _mm256_blendv_pd(c3, c[1][3], m1);
        so = _mm256_blendv_pd(so, sh[1], m1);
        c0 = _mm256_blendv_pd(c0, c[2][0], m2);
        c1 = _mm256_blendv_pd(c1, c[2][1], m2);
        c2 = _mm256_blendv_pd(c2, c[2][2], m2);
        c3 = _mm256_blendv_pd(c3, c[2][3], m2);
        so = _mm256_blendv_pd(so, sh[2], m2);
        c0 = _mm256_blendv_pd(c0, c[3][0], m3);
        c1 = _mm256_blendv_pd(c1, c[3][1], m3);
        c2 = _mm256_blendv_pd(c2, c[3][2], m3);
        c3 = _mm256_blendv_pd(c3, c[3][3], m3);
        so = _mm256_blendv_pd(so, sh[3], m3);
        const __m256d t = _mm256_sub_pd(u, so);
        __m256d val = _mm256_fmadd_pd(c3, t, c2);
        val = _mm256_fmadd_pd(val, t, c1);
        val = _mm256_fmadd_pd(val, t, c0);
        const __m256d inside = _mm256_and_pd(_mm256_cmp_pd(u, zero, _CMP_GE_OQ),
                                             _mm256_cmp_pd(u, e3, _CMP_LT_OQ));
        val = _mm256_and_pd(val, inside);
        val = _mm256_max_pd(val, zero);
        _mm256_storeu_pd(out + i, val);
    }
    for (; i < n; ++i) out[i] = spline4_value(s, xs[i]);
}

double spline4_log_likelihood_sorted(const Spline4& s, const double* xs, std::size_t n) {
    constexpr double kTiny = 1e-300;
    const double* end = xs + n;
    if (std::lower_bound(xs, end, s.t0) != xs)
        return -std::numeric_limits<double>::infinity();
    const double* stop[4];
    for (int p = 0; p < 4; ++p) stop[p] = std::lower_bound(xs, end, s.t0 + s.edge[p]);
    if (stop[3] != end) return -std::numeric_limits<double>::infinity();

    const __m256d t0 = _mm256_set1_pd(s.t0);
    const __m256d tiny = _mm256_set1_pd(kTiny);
    const __m256i exp_mask = _mm256_set1_epi64x(0x7ffll);
    const __m256i exp_bias = _mm256_set1_epi64x(1023ll);
    const __m256i mant_mask = _mm256_set1_epi64x(static_cast<long long>(0x800fffffffffffffULL));
    const __m256i exp_one = _mm256_set1_epi64x(0x3ffll << 52);

    __m256d mant = _mm256_set1_pd(1.0);
    __m256i exacc = _mm256_setzero_si256();
    double mant_s = 1.0;
    std::int64_t ex_s = 0;

    const double* cur = xs;
    for (int p = 0; p < 4; ++p) {
        const double* range_end = stop[p];
        const __m256d sh = _mm256_set1_pd(s.shift[p]);
        const __m256d c0 = _mm256_set1_pd(s.coef[p][0]);
        const __m256d c1 = _mm256_set1_pd(s.coef[p][1]);
        const __m256d c2 = _mm256_set1_pd(s.coef[p][2]);
        const __m256d c3 = _mm256_set1_pd(s.coef[p][3]);
        while (cur + 4 <= range_end) {
            const __m256d u =
                _mm256_sub_pd(_mm256_sub_pd(_mm256_loadu_pd(cur), t0), sh);
            __m256d v = _mm256_fmadd_pd(c3, u, c2);
            v = _mm256_fmadd_pd(v, u, c1);
            v = _mm256_fmadd_pd(v, u, c0);
            if (_mm256_movemask_pd(_mm256_cmp_pd(v, tiny, _CMP_LT_OQ)))
                return -std::numeric_limits<double>::infinity();
            mant = _mm256_mul_pd(mant, v);
            const __m256i bits = _mm256_castpd_si256(mant);
            const __m256i e = _mm256_sub_epi64(
                _mm256_and_si256(_mm256_srli_epi64(bits, 52), exp_mask), exp_bias);
            exacc = _mm256_add_epi64(exacc, e);
            mant = _mm256_castsi256_pd(
                _mm256_or_si256(_mm256_and_si256(bits, mant_mask), exp_one));
            cur += 4;
        }
        const double* cc = s.coef[p];
        while (cur < range_end) {
            const double u = (*cur - s.t0) - s.shift[p];
            const double v = ((cc[3] * u + cc[2]) * u + cc[1]) * u + cc[0];
            if (v < kTiny) return -std::numeric_limits<double>::infinity();
            mant_s *= v;
            const auto b = std::bit_cast<std::uint64_t>(mant_s);
            ex_s += static_cast<std::int64_t>((b >> 52) & 0x7ff) - 1023;
            mant_s = std::bit_cast<double>((b & 0x800fffffffffffffULL) | (0x3ffULL << 52));
            ++cur;
        }
    }

    alignas(32) double lane_mant[4];
    alignas(32) std::int64_t lane_ex[4];
    _mm256_store_pd(lane_mant, mant);
    _mm256_store_si256(reinterpret_cast<__m256i*>(lane_ex), exacc);
    constexpr double kLn2 = 0.6931471805599453;
    double log_sum = std::log(mant_s) + static_cast<double>(ex_s) * kLn2;
    for (int l = 0; l < 4; ++l)
        log_sum += std::log(lane_mant[l]) + static_cast<double>(lane_ex[l]) * kLn2;
    return log_sum;
}

void gauss_column(const double* xs, const double* ys, const double* inv_two_sigma2,
                  const double* log_pref, std::size_t n, double mx, double my, double* out) {
    const __m256d vmx = _mm256_set1_pd(mx);
    const __m256d vmy = _mm256_set1_pd(my);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vmx);
        const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vmy);
        const __m256d qf = _mm256_fmadd_pd(dy, dy, _mm256_mul_pd(dx, dx));
        const __m256d t = _mm256_fnmadd_pd(qf, _mm256_loadu_pd(inv_two_sigma2 + i),
                                           _mm256_loadu_pd(log_pref + i));
        _mm256_storeu_pd(out + i, t);
    }
    for (; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        out[i] = log_pref[i] - (dx * dx + dy * dy) * inv_two_sigma2[i];
    }
    for (std::size_t k = 0; k < n; ++k) out[k] = std::exp(out[k]);
}

double weighted_sqdist_sum(const double* xs, const double* ys, const double* w, std::size_t n,
                           double mx, double my) {
    const __m256d vmx = _mm256_set1_pd(mx);
    const __m256d vmy = _mm256_set1_pd(my);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vmx);
        const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vmy);
        const __m256d qf = _mm256_fmadd_pd(dy, dy, _mm256_mul_pd(dx, dx));
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), qf, acc);
    }
    double total = hsum(acc);
    for (; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        total += w[i] * (dx * dx + dy * dy);
    }
    return total;
}

void product_column(const double* fx, const double* fy, std::size_t n, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i,
                         _mm256_mul_pd(_mm256_loadu_pd(fx + i), _mm256_loadu_pd(fy + i)));
    for (; i < n; ++i) out[i] = fx[i] * fy[i];
}

}  // namespace pmx::kernels::avx2

#endif  // PMX_BUILD_AVX2
