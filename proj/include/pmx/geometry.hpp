#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pmx {

/// Rectangular sky patch plus instrumental energy range. Coordinates are
/// plain degrees on a flat patch; energies are GeV.
struct MapBounds {
    double x_min = -5.0, x_max = 5.0;
    double y_min = -5.0, y_max = 5.0;
    double e_min = 1.0, e_max = 316.2277660168379;

    void validate() const;
    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    bool contains(double x, double y) const {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }
};

struct PhotonEvent {
    double x = 0.0;
    double y = 0.0;
    double energy = 0.0;
};

/// 2-D histogram of integer counts over a MapBounds-aligned pixel grid.
/// Storage is row-major from y_min upward: data[iy * nx + ix].
struct PixelGrid {
    MapBounds bounds;
    double pixel_size = 0.05;
    std::size_t nx = 0, ny = 0;
    std::vector<std::int64_t> data;

    PixelGrid() = default;
    PixelGrid(const MapBounds& b, double pix);

    std::int64_t& at(std::size_t ix, std::size_t iy) { return data[iy * nx + ix]; }
    std::int64_t at(std::size_t ix, std::size_t iy) const { return data[iy * nx + ix]; }
    std::int64_t total() const;

    /// Half-open binning [lo, hi) with the top/right map edge closed, so every
    /// in-bounds point lands in exactly one pixel.
    std::size_t x_index(double x) const;
    std::size_t y_index(double y) const;
    double x_center(std::size_t ix) const { return bounds.x_min + (ix + 0.5) * pixel_size; }
    double y_center(std::size_t iy) const { return bounds.y_min + (iy + 0.5) * pixel_size; }
};

/// Same layout as PixelGrid but real-valued (expected counts, templates,
/// posterior maps).
struct RealGrid {
    MapBounds bounds;
    double pixel_size = 0.05;
    std::size_t nx = 0, ny = 0;
    std::vector<double> data;

    RealGrid() = default;
    RealGrid(const MapBounds& b, double pix);

    double& at(std::size_t ix, std::size_t iy) { return data[iy * nx + ix]; }
    double at(std::size_t ix, std::size_t iy) const { return data[iy * nx + ix]; }
    double total() const;
    double x_center(std::size_t ix) const { return bounds.x_min + (ix + 0.5) * pixel_size; }
    double y_center(std::size_t iy) const { return bounds.y_min + (iy + 0.5) * pixel_size; }
};

/// All tunable constants of the inference model in one bundle.
struct Hyperparameters {
    double lambda = 1.0;          // symmetric Beta/Dirichlet weight prior
    double alpha_s = 2.0;         // DP concentration, source level
    double alpha_b = 1.5;         // DP concentration, background level
    double a_eta_s = 3.196, b_eta_s = 2.196;  // Gamma prior on source Pareto shape
    double a_eta_b = 1.79, b_eta_b = 0.714;   // Gamma prior on background Pareto shape
    double c_ell = 1.0, c_b = 1.0;            // smoothness floors, degrees
    int h_s = 5, h_b = 5;                     // auxiliary draws per sweep
    double prop_sd2 = 0.001;                  // Metropolis jump variance, degrees^2

    void validate() const;
};

/// Bin events into a grid; conserves the total count exactly.
PixelGrid bin_events(const std::vector<PhotonEvent>& events, const MapBounds& bounds,
                     double pixel_size);

}  // namespace pmx
