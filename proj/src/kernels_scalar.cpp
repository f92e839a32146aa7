#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pmx/kernels.hpp"

namespace pmx::kernels {

Spline4 make_spline4(const double* knots5) {
    for (int j = 0; j < 4; ++j)
        if (!(knots5[j] < knots5[j + 1]))
            throw std::invalid_argument("make_spline4: knots must be strictly ascending");

    Spline4 s;
    s.t0 = knots5[0];
    double v[5];
    for (int j = 0; j < 5; ++j) v[j] = knots5[j] - s.t0;  // shifted knots, v[0] = 0
    for (int j = 0; j < 4; ++j) s.edge[j] = v[j + 1];

    double w[5];
    for (int j = 0; j < 5; ++j) {
        w[j] = 1.0;
        for (int k = 0; k < 5; ++k)
            if (k != j) w[j] *= v[j] - v[k];
    }

    // Truncated-power form: density(u) = 4 * sum_{j: v_j > u} (v_j - u)^3 / w_j,
    // active terms j >= p+1 on piece p. Each piece is expanded around its own
    // origin so coefficients stay on the local gap scale.
    //
    // Piece 0 collapses exactly: the 4th divided difference of a cubic is
    // zero, so the sum over j >= 1 equals u^3 / w_0 — a stable monomial.
    s.shift[0] = 0.0;
    s.coef[0][0] = s.coef[0][1] = s.coef[0][2] = 0.0;
    s.coef[0][3] = 4.0 / (v[1] * v[2] * v[3] * v[4]);

    // Piece 3 is the single right-edge term 4 (v_4 - u)^3 / w_4.
    s.shift[3] = v[4];
    s.coef[3][0] = s.coef[3][1] = s.coef[3][2] = 0.0;
    s.coef[3][3] = -4.0 / w[4];

    for (int p = 1; p <= 2; ++p) {
        s.shift[p] = v[p];
        double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;
        for (int j = p + 1; j <= 4; ++j) {
            const double a = v[j] - v[p];
            const double inv_w = 1.0 / w[j];
            c0 += a * a * a * inv_w;
            c1 += a * a * inv_w;
            c2 += a * inv_w;
            c3 += inv_w;
        }
        s.coef[p][0] = 4.0 * c0;
        s.coef[p][1] = -12.0 * c1;
        s.coef[p][2] = 12.0 * c2;
        s.coef[p][3] = -4.0 * c3;
    }
    return s;
}

double spline4_value(const Spline4& s, double x) {
    const double u = x - s.t0;
    if (!(u >= 0.0) || u >= s.edge[3]) return 0.0;
    int p = 0;
    p += u >= s.edge[0];
    p += u >= s.edge[1];
    p += u >= s.edge[2];
    const double* c = s.coef[p];
    const double t = u - s.shift[p];
    const double val = ((c[3] * t + c[2]) * t + c[1]) * t + c[0];
    return val > 0.0 ? val : 0.0;  // clamp cancellation residue near the support edge
}

namespace base {

void spline4_batch(const Spline4& s, const double* xs, std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = spline4_value(s, xs[i]);
}

double spline4_log_likelihood_sorted(const Spline4& s, const double* xs, std::size_t n) {
    constexpr double kTiny = 1e-300;
    double mant = 1.0;
    std::int64_t ex = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = spline4_value(s, xs[i]);
        if (v < kTiny) return -std::numeric_limits<double>::infinity();
        mant *= v;
        const auto bits = std::bit_cast<std::uint64_t>(mant);
        ex += static_cast<std::int64_t>((bits >> 52) & 0x7ff) - 1023;
        mant = std::bit_cast<double>((bits & 0x800fffffffffffffULL) | (0x3ffULL << 52));
    }
    return std::log(mant) + static_cast<double>(ex) * 0.6931471805599453;
}

void gauss_column(const double* xs, const double* ys, const double* inv_two_sigma2,
                  const double* log_pref, std::size_t n, double mx, double my, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        out[i] = std::exp(log_pref[i] - (dx * dx + dy * dy) * inv_two_sigma2[i]);
    }
}

double weighted_sqdist_sum(const double* xs, const double* ys, const double* w, std::size_t n,
                           double mx, double my) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        acc += w[i] * (dx * dx + dy * dy);
    }
    return acc;
}

void product_column(const double* fx, const double* fy, std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fx[i] * fy[i];
}

}  // namespace base
}  // namespace pmx::kernels
