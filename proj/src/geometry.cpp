#include "pmx/geometry.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pmx {

void MapBounds::validate() const {
    if (!(x_min < x_max)) throw std::invalid_argument("MapBounds: x_min must be < x_max");
    if (!(y_min < y_max)) throw std::invalid_argument("MapBounds: y_min must be < y_max");
    if (!(0.0 < e_min && e_min < e_max))
        throw std::invalid_argument("MapBounds: need 0 < e_min < e_max");
}

void Hyperparameters::validate() const {
    auto pos = [](double v, const char* name) {
        if (!(v > 0.0)) throw std::invalid_argument(std::string("Hyperparameters: ") + name +
                                                    " must be > 0");
    };
    pos(lambda, "lambda");
    pos(alpha_s, "alpha_s");
    pos(alpha_b, "alpha_b");
    pos(a_eta_s, "a_eta_s");
    pos(b_eta_s, "b_eta_s");
    pos(a_eta_b, "a_eta_b");
    pos(b_eta_b, "b_eta_b");
    pos(c_ell, "c_ell");
    pos(c_b, "c_b");
    pos(prop_sd2, "prop_sd2");
    if (h_s < 1 || h_b < 1) throw std::invalid_argument("Hyperparameters: h_s, h_b must be >= 1");
}

namespace {

std::size_t grid_extent(double lo, double hi, double pix, const char* axis) {
    if (!(pix > 0.0)) throw std::invalid_argument("grid: pixel_size must be > 0");
    const double n = std::round((hi - lo) / pix);
    if (n < 1.0) throw std::invalid_argument(std::string("grid: no pixels along ") + axis);
    return static_cast<std::size_t>(n);
}

std::size_t clamp_index(double v, double lo, double pix, std::size_t n) {
    // half-open [lo, hi); a point on the closing edge belongs to the last pixel
    auto i = static_cast<std::ptrdiff_t>(std::floor((v - lo) / pix));
    if (i < 0) i = 0;
    if (i >= static_cast<std::ptrdiff_t>(n)) i = static_cast<std::ptrdiff_t>(n) - 1;
    return static_cast<std::size_t>(i);
}

}  // namespace

PixelGrid::PixelGrid(const MapBounds& b, double pix) : bounds(b), pixel_size(pix) {
    b.validate();
    nx = grid_extent(b.x_min, b.x_max, pix, "x");
    ny = grid_extent(b.y_min, b.y_max, pix, "y");
    data.assign(nx * ny, 0);
}

std::int64_t PixelGrid::total() const {
    return std::accumulate(data.begin(), data.end(), std::int64_t{0});
}

std::size_t PixelGrid::x_index(double x) const {
    return clamp_index(x, bounds.x_min, pixel_size, nx);
}

std::size_t PixelGrid::y_index(double y) const {
    return clamp_index(y, bounds.y_min, pixel_size, ny);
}

RealGrid::RealGrid(const MapBounds& b, double pix) : bounds(b), pixel_size(pix) {
    b.validate();
    nx = grid_extent(b.x_min, b.x_max, pix, "x");
    ny = grid_extent(b.y_min, b.y_max, pix, "y");
    data.assign(nx * ny, 0.0);
}

double RealGrid::total() const {
    return std::accumulate(data.begin(), data.end(), 0.0);
}

PixelGrid bin_events(const std::vector<PhotonEvent>& events, const MapBounds& bounds,
                     double pixel_size) {
    PixelGrid grid(bounds, pixel_size);
    for (const auto& ev : events) {
        if (!bounds.contains(ev.x, ev.y))
            throw std::invalid_argument("bin_events: event outside map bounds");
        ++grid.at(grid.x_index(ev.x), grid.y_index(ev.y));
    }
    return grid;
}

}  // namespace pmx
