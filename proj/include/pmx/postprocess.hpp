#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pmx/geometry.hpp"
#include "pmx/rng.hpp"
#include "pmx/sampler.hpp"

namespace pmx {

/// Retained posterior draws pooled across chains.
struct DrawSet {
    struct Iteration {
        std::vector<double> mu_x, mu_y;          // source locations, cluster order
        std::vector<std::uint64_t> counts;       // source cluster occupancy
        std::uint64_t n_src = 0, n_total = 0;
        std::vector<TraceIteration::BgSnap> background;
    };
    std::vector<Iteration> iterations;

    std::size_t size() const { return iterations.size(); }
    /// Most frequent source mixture size; ties go to the smaller value.
    int k_star() const;
};

/// Drop the first burn_in_fraction of each chain's retained records, pool the
/// rest.
DrawSet pool_chains(const std::vector<Trace>& chains, double burn_in_fraction);

/// Bin every pooled location draw into a pixel grid.
PixelGrid pool_draws(const DrawSet& draws, const MapBounds& bounds, double pixel_size);

struct GridPixel {
    std::size_t ix = 0, iy = 0;
    bool operator==(const GridPixel&) const = default;
};

/// Seed pixels: local maxima of the pooled grid (counts >= all 8 neighbors;
/// equal-count plateaus keep only their best-ranked pixel), ranked by
/// (count, 3x3 neighborhood sum, row-major index) and truncated to k_star.
/// Sets *shortfall when fewer candidates than k_star exist.
std::vector<GridPixel> find_candidate_regions(const PixelGrid& pooled, int k_star,
                                              bool* shortfall = nullptr);

struct Region {
    int id = 0;  // 1-based
    GridPixel seed;
    std::vector<GridPixel> pixels;
    double presence_prob = 0.0;
};

/// Fraction of iterations with at least one location draw inside the pixels.
double region_presence_probability(const std::vector<GridPixel>& pixels, const DrawSet& draws,
                                   const PixelGrid& geometry);

/// Greedy growth of every seed: repeatedly add the adjacent in-window pixel
/// with the largest presence gain until p_star is reached or the d_r x d_r
/// window is exhausted. Pixels are never shared between regions; seeds are
/// owned from the start.
std::vector<Region> grow_regions(const std::vector<GridPixel>& seeds, const DrawSet& draws,
                                 const PixelGrid& geometry, double p_star, int d_r);

/// Per-iteration, per-draw region labels: id of the containing region, 0 when
/// outside all regions. Throws if the regions overlap.
std::vector<std::vector<int>> relabel_draws(const DrawSet& draws,
                                            const std::vector<Region>& regions,
                                            const PixelGrid& geometry);

/// Empirical distribution of the in-region draw count conditioned on > 0.
std::map<int, double> conditional_count_distribution(int region_id,
                                                     const std::vector<std::vector<int>>& labels);

/// Shortest interval containing ceil(prob * n) of the samples.
std::pair<double, double> hpd_interval(std::vector<double> samples, double prob);

struct IntensitySummary {
    bool available = false;
    double mean = 0.0;
    double hpd68_lo = 0.0, hpd68_hi = 0.0;
    double hpd95_lo = 0.0, hpd95_hi = 0.0;
};

/// Posterior relative intensity (delta times the cluster's recovered DP
/// weight) over iterations where the region holds exactly one cluster.
IntensitySummary relative_intensity(int region_id, const DrawSet& draws,
                                    const std::vector<std::vector<int>>& labels, double lambda,
                                    double alpha_s, Rng& rng);

struct RegionReport {
    Region region;
    double p_multi = 0.0;                  // Pr(K > 1 | K > 0)
    std::map<int, double> count_dist;      // conditional on K > 0
    bool location_available = false;
    std::vector<double> location_posterior;  // parallel to region.pixels, K = 1
    IntensitySummary intensity;
    double centroid_x = 0.0, centroid_y = 0.0;
};

std::vector<RegionReport> build_region_reports(const DrawSet& draws,
                                               const PixelGrid& geometry,
                                               const std::vector<Region>& regions,
                                               double lambda, double alpha_s, Rng& rng);

void write_region_csv(const std::string& path, const std::vector<RegionReport>& reports);

/// Monte Carlo posterior expected background counts per pixel: for every
/// retained iteration, n_background photons are drawn from the recorded
/// component mixture and binned; the average across iterations is returned.
RealGrid posterior_background_map(const DrawSet& draws, const MapBounds& bounds,
                                  double pixel_size, double alpha_b, double c_ell, double c_b,
                                  Rng& rng);

}  // namespace pmx
