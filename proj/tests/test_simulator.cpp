#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pmx/psf.hpp"
#include "pmx/simulate.hpp"

using namespace pmx;

namespace {

SimScenario base_scenario() {
    SimScenario sc;
    sc.bounds.x_min = -5.0;
    sc.bounds.x_max = 5.0;
    sc.bounds.y_min = -5.0;
    sc.bounds.y_max = 5.0;
    sc.bounds.e_min = 1.0;
    sc.bounds.e_max = 316.2277660168379;
    sc.pixel_size = 0.05;
    sc.energy_bins = 25;
    sc.exposure = 1.0;
    return sc;
}

GaussianPsf default_psf() { return GaussianPsf(0.59, 1.0, 0.8, 0.07); }

double power_law_sum(const SimScenario& sc, double rho) {
    const auto edges = energy_bin_edges(sc);
    double total = 0.0;
    for (int z = 0; z < sc.energy_bins; ++z)
        total += std::pow(energy_bin_centroid(edges, static_cast<std::size_t>(z)), -rho);
    return total;
}

}  // namespace

TEST_CASE("energy bins: 25 log-equispaced bins over [1, 316.23]") {
    const auto sc = base_scenario();
    const auto edges = energy_bin_edges(sc);
    REQUIRE(edges.size() == 26);
    CHECK(edges.front() == doctest::Approx(1.0));
    CHECK(edges.back() == doctest::Approx(316.2277660168379));
    for (std::size_t z = 0; z + 1 < edges.size(); ++z)
        CHECK(std::log10(edges[z + 1] / edges[z]) == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(energy_bin_centroid(edges, 0) == doctest::Approx(std::pow(10.0, 0.05)));
}

TEST_CASE("source expectation: zero amplitude, exposure linearity") {
    auto sc = base_scenario();
    sc.sources.push_back({0.5, -0.3, 0.0, 2.0});
    const auto psf = default_psf();
    CHECK(source_expectation(sc, psf, 0, 100, 100, 0) == 0.0);

    sc.sources[0].f0 = 2.5e-3;
    const double lam1 = source_expectation(sc, psf, 0, 101, 95, 3);
    sc.exposure = 2.0;
    CHECK(source_expectation(sc, psf, 0, 101, 95, 3) == doctest::Approx(2.0 * lam1));
}

TEST_CASE("summed source expectation matches the power-law budget") {
    auto sc = base_scenario();
    sc.pixel_size = 0.1;  // 100x100 pixels keeps the scan quick
    sc.sources.push_back({0.2, 0.1, 4.0e-2, 2.0});
    const auto psf = default_psf();
    double total = 0.0;
    for (std::size_t z = 0; z < 25; ++z)
        for (std::size_t v = 0; v < sc.ny(); ++v)
            for (std::size_t u = 0; u < sc.nx(); ++u)
                total += source_expectation(sc, psf, 0, u, v, z);
    const double expected = sc.sources[0].f0 * power_law_sum(sc, 2.0) * sc.exposure;
    CHECK(std::fabs(total - expected) / expected < 0.01);
}

TEST_CASE("simulate: empty scenario yields nothing") {
    const auto sc = base_scenario();
    const auto psf = default_psf();
    Rng rng(1);
    const auto result = simulate(sc, psf, rng);
    CHECK(result.events.empty());
    CHECK(result.total_counts == 0);
}

TEST_CASE("simulate: totals fluctuate like a Poisson count") {
    auto sc = base_scenario();
    sc.pixel_size = 0.25;
    sc.sources.push_back({0.0, 0.0, 30.0, 2.0});
    const auto psf = default_psf();
    const double expected = sc.sources[0].f0 * power_law_sum(sc, 2.0);

    double mean = 0.0;
    Rng rng(2);
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        const auto result = simulate(sc, psf, rng);
        mean += static_cast<double>(result.total_counts);
    }
    mean /= reps;
    const double se = std::sqrt(expected / reps);
    CHECK(std::fabs(mean - expected) < 4.0 * se);
}

TEST_CASE("simulate: survey-scale smoke test lands on its calibration") {
    auto sc = base_scenario();
    const double per_source = 1000.0;
    const double f0 = 1e-9;
    sc.exposure = per_source / (f0 * power_law_sum(sc, 2.0));
    for (int s = 0; s < 9; ++s)
        sc.sources.push_back({-3.0 + 2.0 * (s % 3), -3.0 + 2.0 * (s / 3), f0, 2.0});

    RealGrid flat(sc.bounds, sc.pixel_size);
    const double bg_total = 16000.0;
    for (auto& v : flat.data) v = bg_total / static_cast<double>(flat.data.size());
    sc.background_template = std::move(flat);
    sc.background_rho = 1.2;

    const auto psf = default_psf();
    Rng rng(3);
    const auto result = simulate(sc, psf, rng);
    const double expected = 9.0 * per_source + bg_total;  // ~ 25,000
    CHECK(std::fabs(static_cast<double>(result.total_counts) - expected) <
          3.0 * std::sqrt(expected));

    // ground-truth labels cover every event and name every component
    REQUIRE(result.origins.size() == result.events.size());
    std::size_t n_bg = 0, n_src1 = 0;
    for (const auto& o : result.origins) {
        n_bg += o == "background";
        n_src1 += o == "source_1";
    }
    CHECK(n_bg > 14000);
    CHECK(n_src1 > 700);
}

TEST_CASE("counts become centroid events") {
    auto sc = base_scenario();
    sc.pixel_size = 0.05;
    sc.sources.push_back({0.0, 0.0, 200.0, 2.0});
    // squeeze the PSF so everything lands in the central pixels
    const GaussianPsf tight(0.01, 1.0, 0.0, 0.0);
    Rng rng(4);
    const auto result = simulate(sc, tight, rng);
    REQUIRE(!result.events.empty());
    const auto edges = energy_bin_edges(sc);
    for (const auto& ev : result.events) {
        // arithmetic-mean spatial centroids sit on the half-pixel lattice
        const double fx = (ev.x - sc.bounds.x_min) / sc.pixel_size;
        CHECK(std::fabs(fx - std::floor(fx) - 0.5) < 1e-9);
        // geometric-mean energy centroids
        bool matches_bin = false;
        for (std::size_t z = 0; z < 25; ++z)
            if (std::fabs(ev.energy - energy_bin_centroid(edges, z)) < 1e-9) matches_bin = true;
        CHECK(matches_bin);
    }
}

TEST_CASE("count cube: centroid conversion and conservation") {
    auto sc = base_scenario();
    sc.pixel_size = 0.5;
    sc.energy_bins = 4;
    CountCube cube;
    cube.nx = sc.nx();
    cube.ny = sc.ny();
    cube.nz = 4;
    cube.data.assign(cube.nx * cube.ny * cube.nz, 0);
    cube.at(3, 7, 2) = 1;
    cube.at(10, 10, 0) = 3;
    const auto events = counts_to_events(cube, sc);
    REQUIRE(events.size() == cube.total());
    REQUIRE(events.size() == 4);
    const auto edges = energy_bin_edges(sc);
    // the single count sits at its cell centroid
    bool found = false;
    for (const auto& ev : events)
        if (std::fabs(ev.x - (-5.0 + 3.5 * 0.5)) < 1e-12 &&
            std::fabs(ev.y - (-5.0 + 7.5 * 0.5)) < 1e-12 &&
            std::fabs(ev.energy - energy_bin_centroid(edges, 2)) < 1e-12)
            found = true;
    CHECK(found);

    // Poisson cube from an empty scenario is all zero
    Rng rng(12);
    const auto empty = simulate_counts(sc, default_psf(), rng);
    CHECK(empty.total() == 0);
    CHECK(counts_to_events(empty, sc).empty());
}

TEST_CASE("geometric-mean energy centroid of the first default bin") {
    auto sc = base_scenario();
    const auto edges = energy_bin_edges(sc);
    CHECK(edges[1] == doctest::Approx(std::pow(10.0, 0.1)));
    CHECK(energy_bin_centroid(edges, 0) == doctest::Approx(std::pow(10.0, 0.05)));
}

TEST_CASE("thinning: full and empty subsets, proportions preserved") {
    Rng rng(5);
    CHECK(thin_indices(100, 100, rng).size() == 100);
    CHECK(thin_indices(100, 0, rng).empty());
    CHECK_THROWS_AS(thin_indices(10, 11, rng), std::invalid_argument);

    const auto all = thin_indices(50, 50, rng);
    for (std::size_t i = 0; i < 50; ++i) CHECK(all[i] == i);

    // hypergeometric mean: first 600 of 2000 are "special"; thin to 500
    double mean_special = 0.0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        const auto keep = thin_indices(2000, 500, rng);
        std::size_t special = 0;
        for (auto idx : keep) special += idx < 600;
        mean_special += static_cast<double>(special);
    }
    mean_special /= reps;
    const double expected = 500.0 * 600.0 / 2000.0;
    const double var = 500.0 * 0.3 * 0.7 * (1500.0 / 1999.0);
    CHECK(std::fabs(mean_special - expected) < 4.0 * std::sqrt(var / reps));
}

TEST_CASE("scenario files parse sources and catch mistakes") {
    std::stringstream good(
        "x_min = -5\nx_max = 5\ny_min = -5\ny_max = 5\n"
        "e_min = 1\ne_max = 316.227766\npixel_size = 0.05\nenergy_bins = 25\n"
        "exposure = 2.0\nseed = 17\nthin_to = 1000\n"
        "[[source]]\nx = -2.5\ny = -2.5\nf0 = 1e-4\nrho = 2\n"
        "[[source]]\nx = 2.0\ny = 1.0\nf0 = 2e-4\nrho = 1.8\n");
    const auto sc = parse_scenario(good);
    REQUIRE(sc.sources.size() == 2);
    CHECK(sc.sources[1].rho == doctest::Approx(1.8));
    CHECK(sc.exposure == doctest::Approx(2.0));
    CHECK(sc.seed == 17);
    REQUIRE(sc.thin_to.has_value());
    CHECK(*sc.thin_to == 1000);

    std::stringstream bad_key("x_min = -5\nx_max = 5\nwhatever = 3\n");
    CHECK_THROWS_AS(parse_scenario(bad_key), std::invalid_argument);

    std::stringstream missing_template("background_template = /nonexistent/file.grid\n");
    CHECK_THROWS_AS(parse_scenario(missing_template), std::runtime_error);
}

TEST_CASE("thinned simulation keeps labels aligned") {
    auto sc = base_scenario();
    sc.pixel_size = 0.25;
    sc.sources.push_back({-2.0, -2.0, 100.0, 2.0});
    RealGrid flat(sc.bounds, sc.pixel_size);
    for (auto& v : flat.data) v = 500.0 / static_cast<double>(flat.data.size());
    sc.background_template = std::move(flat);
    sc.thin_to = 400;
    const auto psf = default_psf();
    Rng rng(6);
    const auto result = simulate(sc, psf, rng);
    REQUIRE(result.events.size() == 400);
    REQUIRE(result.origins.size() == 400);
    // source events cluster near the injected location
    for (std::size_t i = 0; i < 400; ++i)
        if (result.origins[i] == "source_1") {
            CHECK(std::hypot(result.events[i].x + 2.0, result.events[i].y + 2.0) < 5.0);
        }
}
