#include <doctest.h>

#include <cmath>

#include "pmx/bspline.hpp"
#include "pmx/oracle.hpp"
#include "pmx/rng.hpp"

using namespace pmx;
using namespace pmx::oracle;

TEST_CASE("midpoint rule: exact on constants, accurate on x^2") {
    CHECK(quad_midpoint_2d([](double, double) { return 1.0; }, 0.0, 1.0, 0.0, 1.0, 16, 16) ==
          doctest::Approx(1.0));
    const double x2 = quad_midpoint_1d([](double x) { return x * x; }, 0.0, 1.0, 2048);
    CHECK(std::fabs(x2 - 1.0 / 3.0) < 1e-6);
}

TEST_CASE("midpoint rule integrates a normalized spline to one") {
    KnotVector kv;
    kv.k = {0.0, 1.0, 2.0, 3.0, 4.0};
    const double integral = quad_midpoint_1d(
        [&](double x) { return normalized_bspline_density(4, std::span<const double>(kv.k), x); },
        0.0, 4.0, 16384);
    CHECK(std::fabs(integral - 1.0) < 1e-8);
}

TEST_CASE("CRP law: single item, expected cluster count, normalization") {
    const auto single = crp_partition_law(1, 2.0);
    REQUIRE(single.size() == 1);
    CHECK(single.begin()->second == doctest::Approx(1.0));

    for (double alpha : {0.5, 2.0, 5.0}) {
        for (int n : {2, 5, 8}) {
            const auto law = crp_partition_law(n, alpha);
            double total = 0.0, e_k = 0.0;
            for (const auto& [part, p] : law) {
                total += p;
                std::size_t k = 0;
                for (auto l : part) k = std::max<std::size_t>(k, l + 1u);
                e_k += p * static_cast<double>(k);
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(std::fabs(e_k - crp_expected_clusters(n, alpha)) < 1e-12);
        }
    }
}

TEST_CASE("prior cluster expectation at survey scale is about sixteen") {
    // lambda = 1 makes the source count uniform over {0..n}; average the
    // harmonic-sum formula over Monte Carlo draws of it
    Rng rng(12);
    const std::int64_t n = 10000;
    std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
    for (std::int64_t i = 1; i <= n; ++i)
        prefix[static_cast<std::size_t>(i)] =
            prefix[static_cast<std::size_t>(i - 1)] + 2.0 / (2.0 + static_cast<double>(i) - 1.0);
    double mean = 0.0;
    const int reps = 200000;
    for (int r = 0; r < reps; ++r) {
        const auto n_s = static_cast<std::size_t>(rng.uniform_index(n + 1));
        mean += prefix[n_s];
    }
    mean /= reps;
    CHECK(std::fabs(mean - 16.0) < 1.5);
}

TEST_CASE("micro posterior: one event splits by marginal likelihood") {
    DiscreteKernel strong, weak;
    strong.atom_weights = {1.0};
    strong.atom_densities = {{2.0}};
    weak.atom_weights = {1.0};
    weak.atom_densities = {{1.0}};
    const auto post = enumerate_exact_posterior(1, strong, weak, 1.0, 1.3, 0.7);
    double p_side0 = 0.0;
    for (const auto& [st, p] : post)
        if (st.z_mask == 0) p_side0 += p;
    CHECK(p_side0 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("micro posterior: symmetric setups give label-swap symmetry") {
    DiscreteKernel k;
    k.atom_weights = {0.5, 0.5};
    k.atom_densities = {{1.4, 0.6}, {0.6, 1.4}};
    const auto post = enumerate_exact_posterior(2, k, k, 1.0, 1.1, 1.1);
    for (const auto& [st, p] : post) {
        MicroState mirrored;
        mirrored.z_mask = ~st.z_mask & 0x3u;
        mirrored.part0 = st.part1;
        mirrored.part1 = st.part0;
        CHECK(post.at(mirrored) == doctest::Approx(p).epsilon(1e-12));
    }
}

TEST_CASE("micro posterior: flat kernels reduce the partition marginal to the CRP") {
    DiscreteKernel flat;
    flat.atom_weights = {1.0};
    flat.atom_densities = {{1.0, 1.0, 1.0, 1.0, 1.0}};
    const auto post = enumerate_exact_posterior(5, flat, flat, 2.0, 1.3, 1.3);
    const auto law = crp_partition_law(5, 1.3);
    double norm = 0.0;
    for (const auto& [st, p] : post)
        if (st.z_mask == 0) norm += p;
    for (const auto& [st, p] : post) {
        if (st.z_mask != 0) continue;
        CHECK(p / norm == doctest::Approx(law.at(st.part0)).epsilon(1e-10));
    }
}

TEST_CASE("micro posterior refuses oversized instances") {
    DiscreteKernel flat;
    flat.atom_weights = {1.0};
    flat.atom_densities = {{1.0}};
    CHECK_THROWS_AS(enumerate_exact_posterior(9, flat, flat, 1.0, 1.0, 1.0),
                    std::invalid_argument);
}

TEST_CASE("total variation distance: identical, disjoint, halfway") {
    std::map<MicroState, double> p, q;
    MicroState a, b;
    a.z_mask = 0;
    b.z_mask = 1;
    p[a] = 1.0;
    q[b] = 1.0;
    CHECK(total_variation(p, p) == doctest::Approx(0.0));
    CHECK(total_variation(p, q) == doctest::Approx(1.0));
    std::map<MicroState, double> h;
    h[a] = 0.5;
    h[b] = 0.5;
    CHECK(total_variation(p, h) == doctest::Approx(0.5));
}
