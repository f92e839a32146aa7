#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pmx/geometry.hpp"

namespace pmx {

/// Event-list CSV. Header `x_deg,y_deg,energy_gev`, one event per row,
/// '.' decimal separator. Every row is validated against the map bounds
/// (spatial box closed, energy >= e_min); errors name the offending line.
std::vector<PhotonEvent> read_event_list(const std::string& path, const MapBounds& bounds);
std::vector<PhotonEvent> read_event_list(std::istream& in, const MapBounds& bounds);

void write_event_list(const std::string& path, const std::vector<PhotonEvent>& events);
void write_event_list(std::ostream& out, const std::vector<PhotonEvent>& events);

/// Plain-text grid files. Line 1: `nx ny x_min x_max y_min y_max`, then ny
/// lines of nx whitespace-separated values, row-major from y_min upward.
void write_grid(const std::string& path, const RealGrid& grid);
void write_grid(std::ostream& out, const RealGrid& grid);
void write_grid(const std::string& path, const PixelGrid& grid);
RealGrid read_grid(const std::string& path);
RealGrid read_grid(std::istream& in);

/// Stacked 3-D grid (energy-resolved templates). Line 1:
/// `nx ny nz x_min x_max y_min y_max`, then nz consecutive 2-D blocks.
struct GridStack {
    std::vector<RealGrid> layers;
};
GridStack read_grid_stack(const std::string& path);
void write_grid_stack(const std::string& path, const GridStack& stack);

}  // namespace pmx
