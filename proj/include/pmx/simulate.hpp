#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pmx/event_io.hpp"
#include "pmx/geometry.hpp"
#include "pmx/psf.hpp"
#include "pmx/rng.hpp"

namespace pmx {

struct SimSource {
    double x = 0.0, y = 0.0;  // true location, degrees
    double f0 = 0.0;          // amplitude
    double rho = 2.0;         // spectral index of the power law
};

/// Ground-truthed synthetic sky: binned Poisson counts from point sources
/// (PSF x power law x exposure) plus an optional background template, turned
/// into centroid events with per-event origin labels.
struct SimScenario {
    MapBounds bounds;
    double pixel_size = 0.05;
    int energy_bins = 25;
    double exposure = 1.0;
    /// One exposure value per energy bin; overrides the scalar when set.
    /// (With log-spaced bins, a bin-width-proportional exposure makes the
    /// photon energy density a Pareto with shape rho - 1.)
    std::optional<std::vector<double>> exposure_per_bin;
    std::uint64_t seed = 1;
    std::vector<SimSource> sources;

    // either a 2-D spatial template (expected total counts per pixel) with a
    // Pareto-style energy index, or a full per-bin 3-D template
    std::optional<RealGrid> background_template;
    double background_rho = 1.2;
    std::optional<GridStack> background_template_3d;

    std::optional<std::size_t> thin_to;

    std::size_t nx() const;
    std::size_t ny() const;
    double exposure_of_bin(std::size_t z) const {
        return exposure_per_bin ? (*exposure_per_bin)[z] : exposure;
    }
    void validate() const;
};

/// Flat key-value file plus repeated [[source]] blocks; template paths are
/// resolved relative to the current working directory.
SimScenario parse_scenario(std::istream& in);
SimScenario parse_scenario_file(const std::string& path);

/// Log10-equispaced bin edges over [e_min, e_max]; size energy_bins + 1.
std::vector<double> energy_bin_edges(const SimScenario& scenario);
/// Geometric-mean centroid energy of bin z.
double energy_bin_centroid(const std::vector<double>& edges, std::size_t z);

/// Expected counts from one source in one (pixel, energy-bin) cell:
/// f0 * E_z^(-rho) * PSF(pixel center | psi, E_z) * pixel area * exposure.
double source_expectation(const SimScenario& scenario, const Psf& psf, std::size_t source_idx,
                          std::size_t u, std::size_t v, std::size_t z);

/// Expected background counts in one cell.
double background_expectation(const SimScenario& scenario, std::size_t u, std::size_t v,
                              std::size_t z);

/// Binned photon counts over (pixel, energy bin) cells, data[(z * ny + v) * nx + u].
struct CountCube {
    std::size_t nx = 0, ny = 0, nz = 0;
    std::vector<std::uint32_t> data;

    std::uint32_t& at(std::size_t u, std::size_t v, std::size_t z) {
        return data[(z * ny + v) * nx + u];
    }
    std::uint32_t at(std::size_t u, std::size_t v, std::size_t z) const {
        return data[(z * ny + v) * nx + u];
    }
    std::uint64_t total() const;
};

/// Independent Poisson draw per cell from the summed source + background
/// expectation.
CountCube simulate_counts(const SimScenario& scenario, const Psf& psf, Rng& rng);

/// One event per count, placed at the cell centroid (arithmetic-mean spatial
/// center, geometric-mean energy).
std::vector<PhotonEvent> counts_to_events(const CountCube& counts,
                                          const SimScenario& scenario);

struct SimResult {
    std::vector<PhotonEvent> events;
    /// Parallel to events: "source_<k>" (1-based, in scenario order) or
    /// "background".
    std::vector<std::string> origins;
    std::uint64_t total_counts = 0;  // before optional thinning
};

/// Poisson-draw every component separately (so each event keeps its true
/// origin), convert counts to centroid events, then optionally thin.
SimResult simulate(const SimScenario& scenario, const Psf& psf, Rng& rng);

/// Uniform subsample without replacement, original order preserved.
std::vector<std::size_t> thin_indices(std::size_t n, std::size_t target, Rng& rng);

void write_truth_labels(const std::string& path, const std::vector<std::string>& origins);

}  // namespace pmx
