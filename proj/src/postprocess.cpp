#include "pmx/postprocess.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "pmx/bspline.hpp"

namespace pmx {

int DrawSet::k_star() const {
    std::map<std::size_t, std::size_t> freq;
    for (const auto& it : iterations) ++freq[it.mu_x.size()];
    std::size_t best_k = 0, best_n = 0;
    for (const auto& [k, n] : freq)
        if (n > best_n) {  // map iterates ascending, so ties keep the smaller k
            best_k = k;
            best_n = n;
        }
    return static_cast<int>(best_k);
}

DrawSet pool_chains(const std::vector<Trace>& chains, double burn_in_fraction) {
    DrawSet out;
    for (const auto& chain : chains) {
        const std::size_t t = chain.iterations.size();
        const auto skip = static_cast<std::size_t>(std::floor(burn_in_fraction * t));
        for (std::size_t i = skip; i < t; ++i) {
            const auto& rec = chain.iterations[i];
            DrawSet::Iteration it;
            it.n_src = rec.n_src;
            it.n_total = chain.n_events;
            for (const auto& s : rec.sources) {
                it.mu_x.push_back(s.x);
                it.mu_y.push_back(s.y);
                it.counts.push_back(s.count);
            }
            it.background = rec.background;
            out.iterations.push_back(std::move(it));
        }
    }
    return out;
}

PixelGrid pool_draws(const DrawSet& draws, const MapBounds& bounds, double pixel_size) {
    PixelGrid grid(bounds, pixel_size);
    for (const auto& it : draws.iterations)
        for (std::size_t l = 0; l < it.mu_x.size(); ++l)
            ++grid.at(grid.x_index(it.mu_x[l]), grid.y_index(it.mu_y[l]));
    return grid;
}

namespace {

std::int64_t neighborhood_sum(const PixelGrid& g, std::size_t ix, std::size_t iy) {
    std::int64_t s = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            const auto jx = static_cast<std::ptrdiff_t>(ix) + dx;
            const auto jy = static_cast<std::ptrdiff_t>(iy) + dy;
            if (jx < 0 || jy < 0 || jx >= static_cast<std::ptrdiff_t>(g.nx) ||
                jy >= static_cast<std::ptrdiff_t>(g.ny))
                continue;
            s += g.at(static_cast<std::size_t>(jx), static_cast<std::size_t>(jy));
        }
    return s;
}

struct RankedPixel {
    std::int64_t count;
    std::int64_t nb_sum;
    std::size_t row_major;
    std::size_t ix, iy;
};

bool outranks(const RankedPixel& a, const RankedPixel& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.nb_sum != b.nb_sum) return a.nb_sum > b.nb_sum;
    return a.row_major < b.row_major;
}

}  // namespace

std::vector<GridPixel> find_candidate_regions(const PixelGrid& pooled, int k_star,
                                              bool* shortfall) {
    if (pooled.total() == 0) throw std::invalid_argument("find_candidate_regions: empty grid");

    std::vector<RankedPixel> cands;
    for (std::size_t iy = 0; iy < pooled.ny; ++iy)
        for (std::size_t ix = 0; ix < pooled.nx; ++ix) {
            const auto c = pooled.at(ix, iy);
            if (c <= 0) continue;
            bool weak_max = true;
            for (int dy = -1; dy <= 1 && weak_max; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const auto jx = static_cast<std::ptrdiff_t>(ix) + dx;
                    const auto jy = static_cast<std::ptrdiff_t>(iy) + dy;
                    if (jx < 0 || jy < 0 || jx >= static_cast<std::ptrdiff_t>(pooled.nx) ||
                        jy >= static_cast<std::ptrdiff_t>(pooled.ny))
                        continue;
                    if (pooled.at(static_cast<std::size_t>(jx), static_cast<std::size_t>(jy)) >
                        c) {
                        weak_max = false;
                        break;
                    }
                }
            if (weak_max)
                cands.push_back({c, neighborhood_sum(pooled, ix, iy), iy * pooled.nx + ix, ix,
                                 iy});
        }

    // plateau pruning: an equal-count 8-neighbor candidate that outranks this
    // one removes it (strict maxima are unaffected)
    std::vector<RankedPixel> kept;
    for (const auto& p : cands) {
        bool dominated = false;
        for (const auto& q : cands) {
            if (&p == &q || q.count != p.count) continue;
            const auto dx = std::llabs(static_cast<long long>(q.ix) - static_cast<long long>(p.ix));
            const auto dy = std::llabs(static_cast<long long>(q.iy) - static_cast<long long>(p.iy));
            if (dx <= 1 && dy <= 1 && outranks(q, p)) {
                dominated = true;
                break;
            }
        }
        if (!dominated) kept.push_back(p);
    }

    std::sort(kept.begin(), kept.end(), outranks);
    if (shortfall) *shortfall = kept.size() < static_cast<std::size_t>(k_star);
    if (kept.size() > static_cast<std::size_t>(k_star)) kept.resize(static_cast<std::size_t>(k_star));

    std::vector<GridPixel> out;
    for (const auto& p : kept) out.push_back({p.ix, p.iy});
    return out;
}

double region_presence_probability(const std::vector<GridPixel>& pixels, const DrawSet& draws,
                                   const PixelGrid& geometry) {
    if (draws.iterations.empty()) return 0.0;
    if (pixels.empty()) return 0.0;
    std::size_t hit = 0;
    for (const auto& it : draws.iterations) {
        bool inside = false;
        for (std::size_t l = 0; l < it.mu_x.size() && !inside; ++l) {
            const GridPixel p{geometry.x_index(it.mu_x[l]), geometry.y_index(it.mu_y[l])};
            for (const auto& q : pixels)
                if (p == q) {
                    inside = true;
                    break;
                }
        }
        hit += inside;
    }
    return static_cast<double>(hit) / static_cast<double>(draws.iterations.size());
}

namespace {

/// Per-pixel iteration bitsets over a d x d window, for fast presence unions.
struct WindowPresence {
    std::size_t x0, y0, w, h;  // window extent, clamped to the grid
    std::size_t t = 0;
    std::size_t blocks = 0;
    std::vector<std::uint64_t> bits;  // [pixel][block]

    WindowPresence(const GridPixel& seed, int d_r, const PixelGrid& geom, const DrawSet& draws) {
        const auto half = static_cast<std::size_t>(d_r / 2);
        x0 = seed.ix >= half ? seed.ix - half : 0;
        y0 = seed.iy >= half ? seed.iy - half : 0;
        const std::size_t x1 = std::min(geom.nx - 1, seed.ix + half);
        const std::size_t y1 = std::min(geom.ny - 1, seed.iy + half);
        w = x1 - x0 + 1;
        h = y1 - y0 + 1;
        t = draws.iterations.size();
        blocks = (t + 63) / 64;
        bits.assign(w * h * blocks, 0);
        for (std::size_t ti = 0; ti < t; ++ti) {
            const auto& it = draws.iterations[ti];
            for (std::size_t l = 0; l < it.mu_x.size(); ++l) {
                const std::size_t ix = geom.x_index(it.mu_x[l]);
                const std::size_t iy = geom.y_index(it.mu_y[l]);
                if (ix < x0 || iy < y0 || ix >= x0 + w || iy >= y0 + h) continue;
                auto* blk = &bits[((iy - y0) * w + (ix - x0)) * blocks];
                blk[ti / 64] |= 1ull << (ti % 64);
            }
        }
    }

    const std::uint64_t* pixel_bits(std::size_t ix, std::size_t iy) const {
        return &bits[((iy - y0) * w + (ix - x0)) * blocks];
    }
};

std::size_t popcount_or(const std::vector<std::uint64_t>& a, const std::uint64_t* b,
                        std::size_t blocks) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < blocks; ++i) c += std::popcount(a[i] | b[i]);
    return c;
}

}  // namespace

std::vector<Region> grow_regions(const std::vector<GridPixel>& seeds, const DrawSet& draws,
                                 const PixelGrid& geometry, double p_star, int d_r) {
    if (d_r < 1 || d_r % 2 == 0)
        throw std::invalid_argument("grow_regions: d_r must be odd and >= 1");
    std::map<std::pair<std::size_t, std::size_t>, int> owner;
    for (std::size_t s = 0; s < seeds.size(); ++s)
        if (!owner.emplace(std::make_pair(seeds[s].ix, seeds[s].iy), static_cast<int>(s) + 1)
                 .second)
            throw std::invalid_argument("grow_regions: duplicate seeds");

    const std::size_t t = draws.iterations.size();
    std::vector<Region> regions;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        Region region;
        region.id = static_cast<int>(s) + 1;
        region.seed = seeds[s];
        region.pixels.push_back(seeds[s]);

        WindowPresence wp(seeds[s], d_r, geometry, draws);
        std::vector<std::uint64_t> current(wp.blocks, 0);
        {
            const auto* b = wp.pixel_bits(seeds[s].ix, seeds[s].iy);
            for (std::size_t i = 0; i < wp.blocks; ++i) current[i] = b[i];
        }
        auto popcount = [&](const std::vector<std::uint64_t>& v) {
            std::size_t c = 0;
            for (auto x : v) c += std::popcount(x);
            return c;
        };
        region.presence_prob = t ? static_cast<double>(popcount(current)) / t : 0.0;

        while (region.presence_prob < p_star && region.pixels.size() < wp.w * wp.h) {
            // candidate pixels: in the window, unowned, 8-adjacent to the region
            GridPixel best{};
            std::ptrdiff_t best_gain = -1;
            std::size_t best_rm = 0;
            for (std::size_t iy = wp.y0; iy < wp.y0 + wp.h; ++iy)
                for (std::size_t ix = wp.x0; ix < wp.x0 + wp.w; ++ix) {
                    if (owner.count({ix, iy})) continue;
                    bool adjacent = false;
                    for (const auto& p : region.pixels) {
                        const auto ddx = std::llabs(static_cast<long long>(p.ix) -
                                                    static_cast<long long>(ix));
                        const auto ddy = std::llabs(static_cast<long long>(p.iy) -
                                                    static_cast<long long>(iy));
                        if (ddx <= 1 && ddy <= 1) {
                            adjacent = true;
                            break;
                        }
                    }
                    if (!adjacent) continue;
                    const auto gain = static_cast<std::ptrdiff_t>(
                        popcount_or(current, wp.pixel_bits(ix, iy), wp.blocks) -
                        popcount(current));
                    const std::size_t rm = iy * geometry.nx + ix;
                    if (gain > best_gain || (gain == best_gain && rm < best_rm)) {
                        best_gain = gain;
                        best_rm = rm;
                        best = {ix, iy};
                    }
                }
            if (best_gain < 0) break;  // window exhausted by ownership conflicts
            region.pixels.push_back(best);
            owner.emplace(std::make_pair(best.ix, best.iy), region.id);
            const auto* b = wp.pixel_bits(best.ix, best.iy);
            for (std::size_t i = 0; i < wp.blocks; ++i) current[i] |= b[i];
            region.presence_prob = t ? static_cast<double>(popcount(current)) / t : 0.0;
        }
        regions.push_back(std::move(region));
    }
    return regions;
}

std::vector<std::vector<int>> relabel_draws(const DrawSet& draws,
                                            const std::vector<Region>& regions,
                                            const PixelGrid& geometry) {
    std::map<std::pair<std::size_t, std::size_t>, int> owner;
    for (const auto& r : regions)
        for (const auto& p : r.pixels)
            if (!owner.emplace(std::make_pair(p.ix, p.iy), r.id).second)
                throw std::invalid_argument("relabel_draws: regions overlap");

    std::vector<std::vector<int>> labels;
    labels.reserve(draws.iterations.size());
    for (const auto& it : draws.iterations) {
        std::vector<int> row(it.mu_x.size(), 0);
        for (std::size_t l = 0; l < it.mu_x.size(); ++l) {
            const auto found =
                owner.find({geometry.x_index(it.mu_x[l]), geometry.y_index(it.mu_y[l])});
            if (found != owner.end()) row[l] = found->second;
        }
        labels.push_back(std::move(row));
    }
    return labels;
}

std::map<int, double> conditional_count_distribution(int region_id,
                                                     const std::vector<std::vector<int>>& labels) {
    std::map<int, std::size_t> hist;
    std::size_t conditioning = 0;
    for (const auto& row : labels) {
        const int k = static_cast<int>(std::count(row.begin(), row.end(), region_id));
        if (k > 0) {
            ++hist[k];
            ++conditioning;
        }
    }
    if (conditioning == 0)
        throw std::runtime_error("conditional_count_distribution: empty conditioning set");
    std::map<int, double> out;
    for (const auto& [k, n] : hist)
        out[k] = static_cast<double>(n) / static_cast<double>(conditioning);
    return out;
}

std::pair<double, double> hpd_interval(std::vector<double> samples, double prob) {
    if (samples.empty()) throw std::invalid_argument("hpd_interval: no samples");
    if (!(prob > 0.0 && prob <= 1.0))
        throw std::invalid_argument("hpd_interval: prob must be in (0, 1]");
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    auto m = static_cast<std::size_t>(std::ceil(prob * static_cast<double>(n)));
    m = std::clamp<std::size_t>(m, 1, n);
    std::size_t best = 0;
    double best_width = samples[m - 1] - samples[0];
    for (std::size_t i = 1; i + m <= n; ++i) {
        const double width = samples[i + m - 1] - samples[i];
        if (width < best_width) {
            best_width = width;
            best = i;
        }
    }
    return {samples[best], samples[best + m - 1]};
}

IntensitySummary relative_intensity(int region_id, const DrawSet& draws,
                                    const std::vector<std::vector<int>>& labels, double lambda,
                                    double alpha_s, Rng& rng) {
    std::vector<double> samples;
    for (std::size_t t = 0; t < draws.iterations.size(); ++t) {
        const auto& row = labels[t];
        if (std::count(row.begin(), row.end(), region_id) != 1) continue;
        const auto l = static_cast<std::size_t>(
            std::find(row.begin(), row.end(), region_id) - row.begin());
        const auto& it = draws.iterations[t];
        const auto rec = recover_weights(it.counts, it.n_src, it.n_total, lambda, alpha_s, rng);
        samples.push_back(rec.delta * rec.weights[l]);
    }
    IntensitySummary out;
    if (samples.empty()) return out;
    out.available = true;
    double sum = 0.0;
    for (double v : samples) sum += v;
    out.mean = sum / static_cast<double>(samples.size());
    std::tie(out.hpd68_lo, out.hpd68_hi) = hpd_interval(samples, 0.68);
    std::tie(out.hpd95_lo, out.hpd95_hi) = hpd_interval(samples, 0.95);
    return out;
}

std::vector<RegionReport> build_region_reports(const DrawSet& draws,
                                               const PixelGrid& geometry,
                                               const std::vector<Region>& regions,
                                               double lambda, double alpha_s, Rng& rng) {
    const auto labels = relabel_draws(draws, regions, geometry);
    std::vector<RegionReport> reports;
    for (const auto& region : regions) {
        RegionReport rep;
        rep.region = region;

        bool any_inside = false;
        for (const auto& row : labels)
            if (std::count(row.begin(), row.end(), region.id) > 0) {
                any_inside = true;
                break;
            }
        if (any_inside) {
            rep.count_dist = conditional_count_distribution(region.id, labels);
            double multi = 0.0;
            for (const auto& [k, p] : rep.count_dist)
                if (k > 1) multi += p;
            rep.p_multi = multi;
        }

        // location posterior given exactly one draw inside
        rep.location_posterior.assign(region.pixels.size(), 0.0);
        std::size_t singles = 0;
        double cx = 0.0, cy = 0.0;
        std::size_t n_inside = 0;
        for (std::size_t t = 0; t < draws.iterations.size(); ++t) {
            const auto& row = labels[t];
            const auto& it = draws.iterations[t];
            for (std::size_t l = 0; l < row.size(); ++l)
                if (row[l] == region.id) {
                    cx += it.mu_x[l];
                    cy += it.mu_y[l];
                    ++n_inside;
                }
            if (std::count(row.begin(), row.end(), region.id) != 1) continue;
            const auto l = static_cast<std::size_t>(
                std::find(row.begin(), row.end(), region.id) - row.begin());
            const GridPixel p{geometry.x_index(it.mu_x[l]), geometry.y_index(it.mu_y[l])};
            for (std::size_t q = 0; q < region.pixels.size(); ++q)
                if (region.pixels[q] == p) {
                    rep.location_posterior[q] += 1.0;
                    break;
                }
            ++singles;
        }
        if (singles > 0) {
            rep.location_available = true;
            for (auto& v : rep.location_posterior) v /= static_cast<double>(singles);
        }
        if (n_inside > 0) {
            rep.centroid_x = cx / static_cast<double>(n_inside);
            rep.centroid_y = cy / static_cast<double>(n_inside);
        } else {
            rep.centroid_x = geometry.x_center(region.seed.ix);
            rep.centroid_y = geometry.y_center(region.seed.iy);
        }

        rep.intensity = relative_intensity(region.id, draws, labels, lambda, alpha_s, rng);
        reports.push_back(std::move(rep));
    }
    return reports;
}

void write_region_csv(const std::string& path, const std::vector<RegionReport>& reports) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot create region report: " + path);
    out << "region_id,n_pixels,presence_prob,p_multi,intensity_mean,hpd68_lo,hpd68_hi,"
           "hpd95_lo,hpd95_hi,centroid_x,centroid_y\n";
    char buf[512];
    for (const auto& r : reports) {
        const auto& i = r.intensity;
        const double nan = std::nan("");
        std::snprintf(buf, sizeof buf, "%d,%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                      r.region.id, r.region.pixels.size(), r.region.presence_prob, r.p_multi,
                      i.available ? i.mean : nan, i.available ? i.hpd68_lo : nan,
                      i.available ? i.hpd68_hi : nan, i.available ? i.hpd95_lo : nan,
                      i.available ? i.hpd95_hi : nan, r.centroid_x, r.centroid_y);
        out << buf;
    }
}

RealGrid posterior_background_map(const DrawSet& draws, const MapBounds& bounds,
                                  double pixel_size, double alpha_b, double c_ell, double c_b,
                                  Rng& rng) {
    RealGrid grid(bounds, pixel_size);
    PixelGrid counter(bounds, pixel_size);
    std::size_t used = 0;
    for (const auto& it : draws.iterations) {
        if (it.background.empty()) continue;
        ++used;
        const std::uint64_t n_b = it.n_total - it.n_src;
        if (n_b == 0) continue;
        std::vector<std::uint64_t> counts;
        for (const auto& c : it.background) counts.push_back(c.count);
        const auto rec = recover_weights(counts, n_b, it.n_total, 1.0, alpha_b, rng);

        for (std::uint64_t p = 0; p < n_b; ++p) {
            const double u = rng.uniform();
            double acc = 0.0;
            std::ptrdiff_t pick = -1;
            for (std::size_t l = 0; l < rec.weights.size(); ++l) {
                acc += rec.weights[l];
                if (u < acc) {
                    pick = static_cast<std::ptrdiff_t>(l);
                    break;
                }
            }
            KnotVector ell, b;
            if (pick >= 0) {
                ell.k = it.background[static_cast<std::size_t>(pick)].ell;
                b.k = it.background[static_cast<std::size_t>(pick)].b;
            } else {
                // leftover stick mass: a fresh component from the constrained prior
                const auto comp = sample_component_prior(bounds, c_ell, c_b, rng);
                ell = comp.ell;
                b = comp.b;
            }
            const double x = sample_bspline4(ell, rng);
            const double y = sample_bspline4(b, rng);
            if (bounds.contains(x, y)) ++counter.at(counter.x_index(x), counter.y_index(y));
        }
    }
    if (used > 0)
        for (std::size_t i = 0; i < grid.data.size(); ++i)
            grid.data[i] = static_cast<double>(counter.data[i]) / static_cast<double>(used);
    return grid;
}

}  // namespace pmx
