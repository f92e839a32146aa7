#include "pmx/simulate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pmx {

std::size_t SimScenario::nx() const {
    return static_cast<std::size_t>(std::round(bounds.width() / pixel_size));
}

std::size_t SimScenario::ny() const {
    return static_cast<std::size_t>(std::round(bounds.height() / pixel_size));
}

void SimScenario::validate() const {
    bounds.validate();
    if (!(pixel_size > 0.0)) throw std::invalid_argument("scenario: pixel_size must be > 0");
    if (energy_bins < 1) throw std::invalid_argument("scenario: energy_bins must be >= 1");
    if (!(exposure >= 0.0)) throw std::invalid_argument("scenario: exposure must be >= 0");
    if (exposure_per_bin) {
        if (exposure_per_bin->size() != static_cast<std::size_t>(energy_bins))
            throw std::invalid_argument("scenario: exposure_per_bin needs one value per bin");
        for (double v : *exposure_per_bin)
            if (!(v >= 0.0))
                throw std::invalid_argument("scenario: exposure_per_bin must be >= 0");
    }
    for (const auto& s : sources) {
        if (!(s.f0 >= 0.0)) throw std::invalid_argument("scenario: source f0 must be >= 0");
        if (!(s.rho > 0.0)) throw std::invalid_argument("scenario: source rho must be > 0");
        if (!bounds.contains(s.x, s.y))
            throw std::invalid_argument("scenario: source location outside the map");
    }
    if (background_template && background_template_3d)
        throw std::invalid_argument("scenario: choose one background template form");
    if (background_template) {
        if (background_template->nx != nx() || background_template->ny != ny())
            throw std::invalid_argument("scenario: background template grid mismatch");
        if (!(background_rho > 0.0))
            throw std::invalid_argument("scenario: background_rho must be > 0");
        for (double v : background_template->data)
            if (!(v >= 0.0)) throw std::invalid_argument("scenario: negative template value");
    }
    if (background_template_3d) {
        if (background_template_3d->layers.size() != static_cast<std::size_t>(energy_bins))
            throw std::invalid_argument("scenario: 3-D template must have one layer per bin");
        for (const auto& layer : background_template_3d->layers) {
            if (layer.nx != nx() || layer.ny != ny())
                throw std::invalid_argument("scenario: background template grid mismatch");
            for (double v : layer.data)
                if (!(v >= 0.0)) throw std::invalid_argument("scenario: negative template value");
        }
    }
}

namespace {

std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double num(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (strip(v.substr(pos)) != "") throw std::invalid_argument("junk");
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("scenario: bad numeric value '" + v + "' for key '" + key +
                                    "'");
    }
}

}  // namespace

SimScenario parse_scenario(std::istream& in) {
    SimScenario sc;
    std::string line;
    SimSource* current_source = nullptr;
    std::string template_path, template3d_path;

    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = strip(line);
        if (line.empty()) continue;
        if (line == "[[source]]") {
            sc.sources.emplace_back();
            current_source = &sc.sources.back();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("scenario: expected 'key = value', got '" + line + "'");
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));

        if (current_source) {
            if (key == "x") { current_source->x = num(key, value); continue; }
            if (key == "y") { current_source->y = num(key, value); continue; }
            if (key == "f0") { current_source->f0 = num(key, value); continue; }
            if (key == "rho") { current_source->rho = num(key, value); continue; }
            // anything else closes the source block and falls through
            current_source = nullptr;
        }
        if (key == "x_min") sc.bounds.x_min = num(key, value);
        else if (key == "x_max") sc.bounds.x_max = num(key, value);
        else if (key == "y_min") sc.bounds.y_min = num(key, value);
        else if (key == "y_max") sc.bounds.y_max = num(key, value);
        else if (key == "e_min") sc.bounds.e_min = num(key, value);
        else if (key == "e_max") sc.bounds.e_max = num(key, value);
        else if (key == "pixel_size") sc.pixel_size = num(key, value);
        else if (key == "energy_bins") sc.energy_bins = static_cast<int>(num(key, value));
        else if (key == "exposure") sc.exposure = num(key, value);
        else if (key == "exposure_per_bin") {
            std::vector<double> v;
            std::stringstream list(value);
            std::string tok;
            while (list >> tok) v.push_back(num(key, tok));
            sc.exposure_per_bin = std::move(v);
        }
        else if (key == "seed") sc.seed = static_cast<std::uint64_t>(num(key, value));
        else if (key == "thin_to") sc.thin_to = static_cast<std::size_t>(num(key, value));
        else if (key == "background_rho") sc.background_rho = num(key, value);
        else if (key == "background_template") template_path = value;
        else if (key == "background_template_3d") template3d_path = value;
        else throw std::invalid_argument("scenario: unknown key '" + key + "'");
    }

    if (!template_path.empty()) sc.background_template = read_grid(template_path);
    if (!template3d_path.empty()) sc.background_template_3d = read_grid_stack(template3d_path);
    sc.validate();
    return sc;
}

SimScenario parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    return parse_scenario(in);
}

std::vector<double> energy_bin_edges(const SimScenario& sc) {
    const double lo = std::log10(sc.bounds.e_min);
    const double hi = std::log10(sc.bounds.e_max);
    std::vector<double> edges(static_cast<std::size_t>(sc.energy_bins) + 1);
    for (std::size_t z = 0; z < edges.size(); ++z)
        edges[z] = std::pow(10.0, lo + (hi - lo) * static_cast<double>(z) / sc.energy_bins);
    return edges;
}

double energy_bin_centroid(const std::vector<double>& edges, std::size_t z) {
    return std::sqrt(edges[z] * edges[z + 1]);
}

double source_expectation(const SimScenario& sc, const Psf& psf, std::size_t source_idx,
                          std::size_t u, std::size_t v, std::size_t z) {
    const auto edges = energy_bin_edges(sc);
    const double e = energy_bin_centroid(edges, z);
    const auto& s = sc.sources.at(source_idx);
    const double cx = sc.bounds.x_min + (u + 0.5) * sc.pixel_size;
    const double cy = sc.bounds.y_min + (v + 0.5) * sc.pixel_size;
    const double pix_prob =
        psf.density(cx, cy, s.x, s.y, e, sc.bounds) * sc.pixel_size * sc.pixel_size;
    return s.f0 * std::pow(e, -s.rho) * pix_prob * sc.exposure_of_bin(z);
}

namespace {

/// Per-bin weights of the 2-D background template: mass of E^-rho over each
/// bin, normalized across bins.
std::vector<double> background_bin_weights(const SimScenario& sc) {
    const auto edges = energy_bin_edges(sc);
    std::vector<double> w(static_cast<std::size_t>(sc.energy_bins), 0.0);
    double total = 0.0;
    for (std::size_t z = 0; z < w.size(); ++z) {
        const double rho = sc.background_rho;
        double mass;
        if (std::fabs(rho - 1.0) < 1e-12)
            mass = std::log(edges[z + 1] / edges[z]);
        else
            mass = (std::pow(edges[z], 1.0 - rho) - std::pow(edges[z + 1], 1.0 - rho)) /
                   (rho - 1.0);
        w[z] = mass;
        total += mass;
    }
    for (auto& v : w) v /= total;
    return w;
}

}  // namespace

double background_expectation(const SimScenario& sc, std::size_t u, std::size_t v,
                              std::size_t z) {
    if (sc.background_template_3d)
        return sc.background_template_3d->layers[z].at(u, v);
    if (!sc.background_template) return 0.0;
    return sc.background_template->at(u, v) * background_bin_weights(sc)[z];
}

std::uint64_t CountCube::total() const {
    std::uint64_t t = 0;
    for (auto c : data) t += c;
    return t;
}

CountCube simulate_counts(const SimScenario& sc, const Psf& psf, Rng& rng) {
    sc.validate();
    CountCube cube;
    cube.nx = sc.nx();
    cube.ny = sc.ny();
    cube.nz = static_cast<std::size_t>(sc.energy_bins);
    cube.data.assign(cube.nx * cube.ny * cube.nz, 0);
    for (std::size_t z = 0; z < cube.nz; ++z)
        for (std::size_t v = 0; v < cube.ny; ++v)
            for (std::size_t u = 0; u < cube.nx; ++u) {
                double lam = background_expectation(sc, u, v, z);
                for (std::size_t s = 0; s < sc.sources.size(); ++s)
                    lam += source_expectation(sc, psf, s, u, v, z);
                if (lam > 0.0)
                    cube.at(u, v, z) = static_cast<std::uint32_t>(rng.poisson(lam));
            }
    return cube;
}

std::vector<PhotonEvent> counts_to_events(const CountCube& cube, const SimScenario& sc) {
    const auto edges = energy_bin_edges(sc);
    std::vector<PhotonEvent> events;
    for (std::size_t z = 0; z < cube.nz; ++z) {
        const double e = energy_bin_centroid(edges, z);
        for (std::size_t v = 0; v < cube.ny; ++v) {
            const double cy = sc.bounds.y_min + (v + 0.5) * sc.pixel_size;
            for (std::size_t u = 0; u < cube.nx; ++u) {
                const auto c = cube.at(u, v, z);
                if (c == 0) continue;
                const double cx = sc.bounds.x_min + (u + 0.5) * sc.pixel_size;
                for (std::uint32_t i = 0; i < c; ++i) events.push_back({cx, cy, e});
            }
        }
    }
    return events;
}

SimResult simulate(const SimScenario& sc, const Psf& psf, Rng& rng) {
    sc.validate();
    const std::size_t nx = sc.nx(), ny = sc.ny();
    const auto nz = static_cast<std::size_t>(sc.energy_bins);
    const auto edges = energy_bin_edges(sc);
    const double pix_area = sc.pixel_size * sc.pixel_size;

    SimResult result;
    auto emit = [&](std::size_t u, std::size_t v, std::size_t z, std::uint64_t count,
                    const std::string& origin) {
        const double cx = sc.bounds.x_min + (u + 0.5) * sc.pixel_size;
        const double cy = sc.bounds.y_min + (v + 0.5) * sc.pixel_size;
        const double ce = energy_bin_centroid(edges, z);
        for (std::uint64_t c = 0; c < count; ++c) {
            result.events.push_back({cx, cy, ce});
            result.origins.push_back(origin);
        }
        result.total_counts += count;
    };

    const auto* gauss = dynamic_cast<const GaussianPsf*>(&psf);
    for (std::size_t s = 0; s < sc.sources.size(); ++s) {
        const std::string origin = "source_" + std::to_string(s + 1);
        const auto& src = sc.sources[s];
        for (std::size_t z = 0; z < nz; ++z) {
            const double e = energy_bin_centroid(edges, z);
            const double flux = src.f0 * std::pow(e, -src.rho) * sc.exposure_of_bin(z) * pix_area;
            if (flux == 0.0) continue;
            if (gauss) {
                // shared per-bin prefactor; only the quadratic form varies by pixel
                const double sig = gauss->sigma(e);
                const double inv2s2 = 1.0 / (2.0 * sig * sig);
                const double log_pref =
                    std::log(flux) - std::log(6.283185307179586 * sig * sig) -
                    GaussianPsf::log_truncation_mass(src.x, src.y, sig, sc.bounds);
                for (std::size_t v = 0; v < ny; ++v) {
                    const double dy = sc.bounds.y_min + (v + 0.5) * sc.pixel_size - src.y;
                    for (std::size_t u = 0; u < nx; ++u) {
                        const double dx = sc.bounds.x_min + (u + 0.5) * sc.pixel_size - src.x;
                        const double lam =
                            std::exp(log_pref - (dx * dx + dy * dy) * inv2s2);
                        const auto c = rng.poisson(lam);
                        if (c) emit(u, v, z, c, origin);
                    }
                }
            } else {
                for (std::size_t v = 0; v < ny; ++v)
                    for (std::size_t u = 0; u < nx; ++u) {
                        const double cx = sc.bounds.x_min + (u + 0.5) * sc.pixel_size;
                        const double cy = sc.bounds.y_min + (v + 0.5) * sc.pixel_size;
                        const double lam =
                            flux * psf.density(cx, cy, src.x, src.y, e, sc.bounds);
                        const auto c = rng.poisson(lam);
                        if (c) emit(u, v, z, c, origin);
                    }
            }
        }
    }

    if (sc.background_template || sc.background_template_3d) {
        const std::vector<double> bin_w =
            sc.background_template ? background_bin_weights(sc) : std::vector<double>{};
        for (std::size_t z = 0; z < nz; ++z)
            for (std::size_t v = 0; v < ny; ++v)
                for (std::size_t u = 0; u < nx; ++u) {
                    const double lam = sc.background_template_3d
                                           ? sc.background_template_3d->layers[z].at(u, v)
                                           : sc.background_template->at(u, v) * bin_w[z];
                    if (lam == 0.0) continue;
                    const auto c = rng.poisson(lam);
                    if (c) emit(u, v, z, c, "background");
                }
    }

    if (sc.thin_to) {
        if (*sc.thin_to > result.events.size())
            throw std::runtime_error("simulate: thin_to exceeds the simulated count");
        const auto keep = thin_indices(result.events.size(), *sc.thin_to, rng);
        std::vector<PhotonEvent> ev;
        std::vector<std::string> org;
        ev.reserve(keep.size());
        org.reserve(keep.size());
        for (auto idx : keep) {
            ev.push_back(result.events[idx]);
            org.push_back(result.origins[idx]);
        }
        result.events = std::move(ev);
        result.origins = std::move(org);
    }
    return result;
}

std::vector<std::size_t> thin_indices(std::size_t n, std::size_t target, Rng& rng) {
    if (target > n) throw std::invalid_argument("thin_indices: target exceeds population");
    // partial Fisher-Yates over the index vector, then restore original order
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < target; ++i) {
        const auto r = i + static_cast<std::size_t>(rng.uniform_index(n - i));
        std::swap(idx[i], idx[r]);
    }
    idx.resize(target);
    std::sort(idx.begin(), idx.end());
    return idx;
}

void write_truth_labels(const std::string& path, const std::vector<std::string>& origins) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot create truth file: " + path);
    out << "event_index,origin\n";
    for (std::size_t i = 0; i < origins.size(); ++i) out << i << ',' << origins[i] << "\n";
}

}  // namespace pmx
