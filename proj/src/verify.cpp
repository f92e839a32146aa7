#include "pmx/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <vector>

#include "pmx/bspline.hpp"
#include "pmx/kernels.hpp"
#include "pmx/oracle.hpp"
#include "pmx/psf.hpp"
#include "pmx/rng.hpp"
#include "pmx/spectral.hpp"

namespace pmx {

namespace {

using oracle::quad_midpoint_1d;

double spline_second_moment(const KnotVector& kv) {
    auto density = [&](double x) {
        return normalized_bspline_density(4, std::span<const double>(kv.k), x);
    };
    double mean = 0.0;
    for (int p = 0; p < 4; ++p)
        mean += oracle::quad_richardson_1d([&](double x) { return x * density(x); }, kv[p],
                                           kv[p + 1], 4096);
    double central = 0.0;
    for (int p = 0; p < 4; ++p)
        central += oracle::quad_richardson_1d(
            [&](double x) { return (x - mean) * (x - mean) * density(x); }, kv[p], kv[p + 1],
            4096);
    return central;
}

KnotVector random_knots(Rng& rng, double lo, double hi) {
    return sample_knots_prior(lo, hi, rng);
}

}  // namespace

int run_verification(std::ostream& out, const VerifyOptions& opts) {
    int failures = 0;
    auto check = [&](const char* name, bool ok, double detail) {
        out << (ok ? "PASS " : "FAIL ") << name << " (err=" << detail << ")\n";
        if (!ok) ++failures;
    };

    Rng rng(20260808);

    {
        // closed-form knot variance against the quadrature second moment
        const double tol = opts.inject_failure ? 1e-30 : 1e-8;
        double worst = 0.0;
        for (int rep = 0; rep < 10; ++rep) {
            const auto kv = random_knots(rng, -5.0, 5.0);
            worst = std::max(worst, std::fabs(kv.variance() - spline_second_moment(kv)));
        }
        const double two_knots[] = {0.0, 1.0};
        const double analytic_m1 = knot_variance(std::span<const double>(two_knots));
        worst = std::max(worst, std::fabs(analytic_m1 - 1.0 / 12.0));
        KnotVector integer_knots;
        integer_knots.k = {0.0, 1.0, 2.0, 3.0, 4.0};
        worst = std::max(worst, std::fabs(integer_knots.variance() - 1.0 / 3.0));
        check("knot-variance-vs-quadrature", worst < tol, worst);
    }

    {
        double worst = 0.0;
        for (int rep = 0; rep < 5; ++rep) {
            const auto kv = random_knots(rng, -4.0, 6.0);
            double integral = 0.0;
            for (int p = 0; p < 4; ++p)
                integral += quad_midpoint_1d(
                    [&](double x) {
                        return normalized_bspline_density(4, std::span<const double>(kv.k), x);
                    },
                    kv[p], kv[p + 1], 8192);
            worst = std::max(worst, std::fabs(integral - 1.0));
        }
        check("spline-density-normalization", worst < 1e-8, worst);
    }

    {
        MapBounds b;
        const GaussianPsf psf(0.59, 1.0, 0.8, 0.07);
        double worst = 0.0;
        for (double e : {1.3, 9.0}) {
            const double integral = oracle::quad_richardson_2d(
                [&](double x, double y) { return psf.density(x, y, 1.2, -0.7, e, b); },
                b.x_min, b.x_max, b.y_min, b.y_max, 400);
            worst = std::max(worst, std::fabs(integral - 1.0));
        }
        check("psf-normalization", worst < 1e-6, worst);
    }

    {
        const double energies[] = {2.718281828459045};
        const auto [a1, b1] = gamma_pareto_update(3.196, 2.196, energies, 1.0);
        const bool exact = (a1 == 4.196) && std::fabs(b1 - 3.196) < 1e-15;
        const bool mode_one = ((3.196 - 1.0) / 2.196) == 1.0;
        check("gamma-pareto-conjugacy", exact && mode_one,
              std::fabs(b1 - 3.196) + std::fabs((3.196 - 1.0) / 2.196 - 1.0));
    }

    {
        const auto law = oracle::crp_partition_law(6, 2.0);
        double total = 0.0, e_k = 0.0;
        for (const auto& [part, p] : law) {
            total += p;
            std::size_t k = 0;
            for (auto l : part) k = std::max<std::size_t>(k, l + 1u);
            e_k += p * static_cast<double>(k);
        }
        const double err = std::fabs(total - 1.0) +
                           std::fabs(e_k - oracle::crp_expected_clusters(6, 2.0));
        check("crp-partition-law", err < 1e-12, err);
    }

    {
        // flat-kernel micro posterior: partition marginal must equal the CRP law
        oracle::DiscreteKernel flat;
        flat.atom_weights = {1.0};
        flat.atom_densities = {{1.0, 1.0, 1.0, 1.0, 1.0}};
        const auto post = oracle::enumerate_exact_posterior(5, flat, flat, 1.0, 1.7, 1.7);
        const auto law = oracle::crp_partition_law(5, 1.7);
        // P(partition of side 0 | all five on side 0)
        double norm = 0.0;
        double err = 0.0;
        for (const auto& [st, p] : post)
            if (st.z_mask == 0) norm += p;
        for (const auto& [st, p] : post)
            if (st.z_mask == 0) err = std::max(err, std::fabs(p / norm - law.at(st.part0)));
        check("micro-posterior-vs-crp", err < 1e-12, err);
    }

    {
        const double median = pareto_inverse_cdf(1.0, 2.0, 0.5);
        const double err = std::fabs(median - std::pow(2.0, 0.5));
        check("pareto-quantile", err < 1e-15, err);
    }

    if (kernels::cpu_supports_avx2()) {
        // scalar and AVX2 variants must agree on shared inputs
        double worst = 0.0;
        for (int rep = 0; rep < 20; ++rep) {
            const auto kv = random_knots(rng, -3.0, 3.0);
            const auto s = kernels::make_spline4(kv.k.data());
            std::vector<double> xs, o1(257), o2(257);
            for (int i = 0; i < 257; ++i) xs.push_back(rng.uniform(-3.5, 3.5));
            kernels::base::spline4_batch(s, xs.data(), xs.size(), o1.data());
            kernels::avx2::spline4_batch(s, xs.data(), xs.size(), o2.data());
            for (std::size_t i = 0; i < xs.size(); ++i)
                worst = std::max(worst, std::fabs(o1[i] - o2[i]));
            std::sort(xs.begin(), xs.end());
            const auto inside_lo = std::lower_bound(xs.begin(), xs.end(), kv[0] + 1e-9);
            const auto inside_hi = std::lower_bound(xs.begin(), xs.end(), kv[4] - 1e-9);
            const auto n_inside = static_cast<std::size_t>(inside_hi - inside_lo);
            if (n_inside > 0) {
                const double l1 = kernels::base::spline4_log_likelihood_sorted(
                    s, &*inside_lo, n_inside);
                const double l2 = kernels::avx2::spline4_log_likelihood_sorted(
                    s, &*inside_lo, n_inside);
                worst = std::max(worst, std::fabs(l1 - l2));
            }
        }
        check("kernel-variant-equivalence", worst < 1e-9, worst);
    } else {
        out << "SKIP kernel-variant-equivalence (no AVX2)\n";
    }

    return failures;
}

}  // namespace pmx
