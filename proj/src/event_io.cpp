#include "pmx/event_io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pmx {

namespace {

std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_field(const std::string& field, std::size_t line_no) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(field, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("event list: malformed number '" + field + "' on line " +
                                 std::to_string(line_no));
    }
    if (strip(field.substr(pos)) != "")
        throw std::runtime_error("event list: trailing junk '" + field + "' on line " +
                                 std::to_string(line_no));
    return v;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot create file: " + path);
    return out;
}

}  // namespace

std::vector<PhotonEvent> read_event_list(std::istream& in, const MapBounds& bounds) {
    bounds.validate();
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("event list: empty file (no header)");
    if (strip(line) != "x_deg,y_deg,energy_gev")
        throw std::runtime_error("event list: bad header '" + strip(line) + "'");

    std::vector<PhotonEvent> events;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        std::stringstream row(line);
        std::string field;
        double vals[3];
        for (int f = 0; f < 3; ++f) {
            if (!std::getline(row, field, ','))
                throw std::runtime_error("event list: expected 3 fields on line " +
                                         std::to_string(line_no));
            vals[f] = parse_field(field, line_no);
        }
        if (std::getline(row, field, ','))
            throw std::runtime_error("event list: too many fields on line " +
                                     std::to_string(line_no));
        const PhotonEvent ev{vals[0], vals[1], vals[2]};
        const std::size_t idx = events.size();
        if (!bounds.contains(ev.x, ev.y))
            throw std::runtime_error("event list: event " + std::to_string(idx) + " (line " +
                                     std::to_string(line_no) + ") outside map bounds");
        if (!(ev.energy >= bounds.e_min))
            throw std::runtime_error("event list: event " + std::to_string(idx) + " (line " +
                                     std::to_string(line_no) + ") has energy below e_min");
        events.push_back(ev);
    }
    return events;
}

std::vector<PhotonEvent> read_event_list(const std::string& path, const MapBounds& bounds) {
    auto in = open_input(path);
    return read_event_list(in, bounds);
}

void write_event_list(std::ostream& out, const std::vector<PhotonEvent>& events) {
    out << "x_deg,y_deg,energy_gev\n";
    char buf[96];
    for (const auto& ev : events) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", ev.x, ev.y, ev.energy);
        out << buf;
    }
}

void write_event_list(const std::string& path, const std::vector<PhotonEvent>& events) {
    auto out = open_output(path);
    write_event_list(out, events);
}

namespace {

void write_grid_body(std::ostream& out, const MapBounds& b, std::size_t nx, std::size_t ny,
                     const double* vals) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%zu %zu ", nx, ny);
    out << buf;
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", b.x_min, b.x_max, b.y_min,
                  b.y_max);
    out << buf;
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            std::snprintf(buf, sizeof buf, "%.17g", vals[iy * nx + ix]);
            out << buf << (ix + 1 == nx ? '\n' : ' ');
        }
    }
}

}  // namespace

void write_grid(std::ostream& out, const RealGrid& grid) {
    write_grid_body(out, grid.bounds, grid.nx, grid.ny, grid.data.data());
}

void write_grid(const std::string& path, const RealGrid& grid) {
    auto out = open_output(path);
    write_grid(out, grid);
}

void write_grid(const std::string& path, const PixelGrid& grid) {
    RealGrid rg;
    rg.bounds = grid.bounds;
    rg.pixel_size = grid.pixel_size;
    rg.nx = grid.nx;
    rg.ny = grid.ny;
    rg.data.assign(grid.data.begin(), grid.data.end());
    write_grid(path, rg);
}

RealGrid read_grid(std::istream& in) {
    RealGrid grid;
    if (!(in >> grid.nx >> grid.ny >> grid.bounds.x_min >> grid.bounds.x_max >>
          grid.bounds.y_min >> grid.bounds.y_max))
        throw std::runtime_error("grid: malformed header line");
    if (grid.nx == 0 || grid.ny == 0) throw std::runtime_error("grid: empty dimensions");
    grid.pixel_size = (grid.bounds.x_max - grid.bounds.x_min) / static_cast<double>(grid.nx);
    grid.data.resize(grid.nx * grid.ny);
    for (auto& v : grid.data)
        if (!(in >> v)) throw std::runtime_error("grid: truncated data section");
    return grid;
}

RealGrid read_grid(const std::string& path) {
    auto in = open_input(path);
    return read_grid(in);
}

GridStack read_grid_stack(const std::string& path) {
    auto in = open_input(path);
    std::size_t nx, ny, nz;
    MapBounds b;
    if (!(in >> nx >> ny >> nz >> b.x_min >> b.x_max >> b.y_min >> b.y_max))
        throw std::runtime_error("grid stack: malformed header line");
    GridStack stack;
    for (std::size_t z = 0; z < nz; ++z) {
        RealGrid g;
        g.bounds = b;
        g.nx = nx;
        g.ny = ny;
        g.pixel_size = (b.x_max - b.x_min) / static_cast<double>(nx);
        g.data.resize(nx * ny);
        for (auto& v : g.data)
            if (!(in >> v)) throw std::runtime_error("grid stack: truncated data section");
        stack.layers.push_back(std::move(g));
    }
    return stack;
}

void write_grid_stack(const std::string& path, const GridStack& stack) {
    if (stack.layers.empty()) throw std::invalid_argument("grid stack: no layers");
    auto out = open_output(path);
    const auto& g0 = stack.layers.front();
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu %zu %zu %.17g %.17g %.17g %.17g\n", g0.nx, g0.ny,
                  stack.layers.size(), g0.bounds.x_min, g0.bounds.x_max, g0.bounds.y_min,
                  g0.bounds.y_max);
    out << buf;
    for (const auto& g : stack.layers) {
        for (std::size_t iy = 0; iy < g.ny; ++iy)
            for (std::size_t ix = 0; ix < g.nx; ++ix) {
                std::snprintf(buf, sizeof buf, "%.17g", g.at(ix, iy));
                out << buf << (ix + 1 == g.nx ? '\n' : ' ');
            }
    }
}

}  // namespace pmx
