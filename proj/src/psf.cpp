#include "pmx/psf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace pmx {

namespace {
constexpr double kTwoPi = 6.283185307179586;
constexpr double kSqrt2 = 1.4142135623730951;
}  // namespace

double Psf::containment_radius(double energy, double frac) const {
    if (!(frac > 0.0 && frac < 1.0))
        throw std::invalid_argument("containment_radius: frac must be in (0, 1)");
    double lo = 0.0, hi = 1.0;
    while (radial_cdf(energy, hi) < frac) {
        hi *= 2.0;
        if (hi > 1e6) throw std::runtime_error("containment_radius: CDF does not reach frac");
    }
    while (hi - lo > 1e-6) {
        const double mid = 0.5 * (lo + hi);
        (radial_cdf(energy, mid) < frac ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

GaussianPsf::GaussianPsf(double sigma_ref, double e_ref, double index, double sigma_floor)
    : sigma_ref_(sigma_ref), e_ref_(e_ref), index_(index), sigma_floor_(sigma_floor) {
    if (!(sigma_ref > 0.0) || !(e_ref > 0.0) || !(sigma_floor >= 0.0))
        throw std::invalid_argument("GaussianPsf: bad parameters");
}

double GaussianPsf::sigma(double energy) const {
    return sigma_ref_ * std::pow(energy / e_ref_, -index_) + sigma_floor_;
}

double GaussianPsf::log_truncation_mass(double mu_x, double mu_y, double s,
                                        const MapBounds& b) {
    const double inv = 1.0 / (s * kSqrt2);
    const double zx = 0.5 * (std::erf((b.x_max - mu_x) * inv) - std::erf((b.x_min - mu_x) * inv));
    const double zy = 0.5 * (std::erf((b.y_max - mu_y) * inv) - std::erf((b.y_min - mu_y) * inv));
    return std::log(zx) + std::log(zy);
}

double GaussianPsf::density(double x, double y, double mu_x, double mu_y, double energy,
                            const MapBounds& bounds) const {
    if (!bounds.contains(x, y)) return 0.0;
    const double s = sigma(energy);
    const double dx = x - mu_x, dy = y - mu_y;
    const double log_density = -std::log(kTwoPi * s * s) - (dx * dx + dy * dy) / (2.0 * s * s) -
                               log_truncation_mass(mu_x, mu_y, s, bounds);
    return std::exp(log_density);
}

void GaussianPsf::sample(double mu_x, double mu_y, double energy, const MapBounds& bounds,
                         Rng& rng, double& x, double& y) const {
    const double s = sigma(energy);
    for (long attempt = 0; attempt < kMaxSampleAttempts; ++attempt) {
        const auto [n1, n2] = rng.normal2();
        x = mu_x + s * n1;
        y = mu_y + s * n2;
        if (bounds.contains(x, y)) return;
    }
    throw std::runtime_error("GaussianPsf::sample: too many rejections against map edges");
}

double GaussianPsf::radial_cdf(double energy, double r) const {
    const double s = sigma(energy);
    return 1.0 - std::exp(-r * r / (2.0 * s * s));
}

double GaussianPsf::unnormalized_log_density(double x, double y, double mu_x, double mu_y,
                                             double energy) const {
    const double s = sigma(energy);
    const double dx = x - mu_x, dy = y - mu_y;
    return -std::log(kTwoPi * s * s) - (dx * dx + dy * dy) / (2.0 * s * s);
}

double GaussianPsf::log_normalization(double mu_x, double mu_y, double energy,
                                      const MapBounds& bounds) const {
    return log_truncation_mass(mu_x, mu_y, sigma(energy), bounds);
}

double circle_fraction_inside(double cx, double cy, double radius, const MapBounds& b) {
    if (radius <= 0.0) return b.contains(cx, cy) ? 1.0 : 0.0;
    // collect the angles where the circle crosses a map edge, then test the
    // midpoint of every resulting arc
    std::vector<double> cuts{0.0, kTwoPi};
    auto add_cos_cuts = [&](double bound, double c) {
        const double t = (bound - c) / radius;
        if (t > -1.0 && t < 1.0) {
            const double a = std::acos(t);
            cuts.push_back(a);
            cuts.push_back(kTwoPi - a);
        }
    };
    auto add_sin_cuts = [&](double bound, double c) {
        const double t = (bound - c) / radius;
        if (t > -1.0 && t < 1.0) {
            double a = std::asin(t);
            if (a < 0.0) a += kTwoPi;
            cuts.push_back(a);
            double b2 = 3.141592653589793 - std::asin(t);
            if (b2 < 0.0) b2 += kTwoPi;
            if (b2 >= kTwoPi) b2 -= kTwoPi;
            cuts.push_back(b2);
        }
    };
    add_cos_cuts(b.x_min, cx);
    add_cos_cuts(b.x_max, cx);
    add_sin_cuts(b.y_min, cy);
    add_sin_cuts(b.y_max, cy);
    std::sort(cuts.begin(), cuts.end());
    double inside = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double span = cuts[i + 1] - cuts[i];
        if (span <= 0.0) continue;
        const double mid = cuts[i] + 0.5 * span;
        if (b.contains(cx + radius * std::cos(mid), cy + radius * std::sin(mid)))
            inside += span;
    }
    return inside / kTwoPi;
}

TabulatedPsf::TabulatedPsf(std::vector<double> energies, std::vector<double> offsets,
                           std::vector<double> table)
    : energies_(std::move(energies)), offsets_(std::move(offsets)), table_(std::move(table)) {
    if (energies_.size() < 2 || offsets_.size() < 2)
        throw std::invalid_argument("TabulatedPsf: need at least a 2x2 table");
    if (table_.size() != energies_.size() * offsets_.size())
        throw std::invalid_argument("TabulatedPsf: table size mismatch");
    if (!(offsets_.front() >= 0.0))
        throw std::invalid_argument("TabulatedPsf: offsets must start at >= 0");
    for (std::size_t i = 0; i + 1 < energies_.size(); ++i)
        if (!(energies_[i] < energies_[i + 1]))
            throw std::invalid_argument("TabulatedPsf: energies must ascend");
    for (std::size_t i = 0; i + 1 < offsets_.size(); ++i)
        if (!(offsets_[i] < offsets_[i + 1]))
            throw std::invalid_argument("TabulatedPsf: offsets must ascend");
    for (double v : table_)
        if (!(v >= 0.0)) throw std::invalid_argument("TabulatedPsf: negative density");

    // rescale each energy row so that the untruncated radial mass is 1
    const std::size_t nr = offsets_.size();
    for (std::size_t e = 0; e < energies_.size(); ++e) {
        double mass = 0.0;
        for (std::size_t r = 0; r + 1 < nr; ++r) {
            const double f0 = table_[e * nr + r] * kTwoPi * offsets_[r];
            const double f1 = table_[e * nr + r + 1] * kTwoPi * offsets_[r + 1];
            mass += 0.5 * (f0 + f1) * (offsets_[r + 1] - offsets_[r]);
        }
        if (!(mass > 0.0)) throw std::invalid_argument("TabulatedPsf: zero-mass energy row");
        for (std::size_t r = 0; r < nr; ++r) table_[e * nr + r] /= mass;
    }
}

TabulatedPsf TabulatedPsf::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open PSF table: " + path);
    std::size_t ne, nr;
    if (!(in >> ne >> nr)) throw std::runtime_error("PSF table: malformed header");
    std::vector<double> energies(ne), offsets(nr), table(ne * nr);
    for (auto& v : energies)
        if (!(in >> v)) throw std::runtime_error("PSF table: truncated energy grid");
    for (auto& v : offsets)
        if (!(in >> v)) throw std::runtime_error("PSF table: truncated offset grid");
    for (auto& v : table)
        if (!(in >> v)) throw std::runtime_error("PSF table: truncated density block");
    return TabulatedPsf(std::move(energies), std::move(offsets), std::move(table));
}

double TabulatedPsf::radial_profile(double energy, double r) const {
    if (!(energy >= energies_.front() && energy <= energies_.back()))
        throw std::out_of_range("TabulatedPsf: energy outside table range");
    if (r < offsets_.front() || r > offsets_.back()) return 0.0;

    const auto eit = std::upper_bound(energies_.begin(), energies_.end(), energy);
    std::size_t e1 = std::min<std::size_t>(energies_.size() - 1,
                                           static_cast<std::size_t>(eit - energies_.begin()));
    if (e1 == 0) e1 = 1;
    const std::size_t e0 = e1 - 1;
    const double le = std::log(energy);
    const double te = (le - std::log(energies_[e0])) /
                      (std::log(energies_[e1]) - std::log(energies_[e0]));

    const auto rit = std::upper_bound(offsets_.begin(), offsets_.end(), r);
    std::size_t r1 = std::min<std::size_t>(offsets_.size() - 1,
                                           static_cast<std::size_t>(rit - offsets_.begin()));
    if (r1 == 0) r1 = 1;
    const std::size_t r0 = r1 - 1;
    const double tr = (r - offsets_[r0]) / (offsets_[r1] - offsets_[r0]);

    const std::size_t nr = offsets_.size();
    const double v00 = table_[e0 * nr + r0], v01 = table_[e0 * nr + r1];
    const double v10 = table_[e1 * nr + r0], v11 = table_[e1 * nr + r1];
    return (1.0 - te) * ((1.0 - tr) * v00 + tr * v01) + te * ((1.0 - tr) * v10 + tr * v11);
}

double TabulatedPsf::truncation_mass(double mu_x, double mu_y, double energy,
                                     const MapBounds& b) const {
    // radial quadrature weighted by the in-map arc fraction of each ring
    const double corner_max =
        std::max({std::hypot(b.x_min - mu_x, b.y_min - mu_y),
                  std::hypot(b.x_min - mu_x, b.y_max - mu_y),
                  std::hypot(b.x_max - mu_x, b.y_min - mu_y),
                  std::hypot(b.x_max - mu_x, b.y_max - mu_y)});
    const double r_max = std::min(offsets_.back(), corner_max);
    const int n = 512;
    const double h = r_max / n;
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = (i + 0.5) * h;
        mass += radial_profile(energy, r) * kTwoPi * r *
                circle_fraction_inside(mu_x, mu_y, r, b) * h;
    }
    return mass;
}

double TabulatedPsf::density(double x, double y, double mu_x, double mu_y, double energy,
                             const MapBounds& bounds) const {
    if (!bounds.contains(x, y)) return 0.0;
    const double r = std::hypot(x - mu_x, y - mu_y);
    const double f = radial_profile(energy, r);
    if (f == 0.0) return 0.0;
    return f / truncation_mass(mu_x, mu_y, energy, bounds);
}

void TabulatedPsf::sample(double mu_x, double mu_y, double energy, const MapBounds& bounds,
                          Rng& rng, double& x, double& y) const {
    // envelope rejection on g(r) = profile(r) * r, then a uniform angle
    const double r_hi = offsets_.back();
    double gmax = 0.0;
    for (int i = 0; i < 256; ++i) {
        const double r = (i + 0.5) / 256.0 * r_hi;
        gmax = std::max(gmax, radial_profile(energy, r) * r);
    }
    double envelope = gmax * 1.5;
    for (long attempt = 0; attempt < kMaxSampleAttempts; ++attempt) {
        const double r = rng.uniform(0.0, r_hi);
        const double g = radial_profile(energy, r) * r;
        if (g > envelope) {
            envelope *= 2.0;
            continue;
        }
        if (rng.uniform() * envelope >= g) continue;
        const double theta = rng.uniform(0.0, kTwoPi);
        x = mu_x + r * std::cos(theta);
        y = mu_y + r * std::sin(theta);
        if (bounds.contains(x, y)) return;
    }
    throw std::runtime_error("TabulatedPsf::sample: too many rejections against map edges");
}

double TabulatedPsf::unnormalized_log_density(double x, double y, double mu_x, double mu_y,
                                              double energy) const {
    const double f = radial_profile(energy, std::hypot(x - mu_x, y - mu_y));
    return f > 0.0 ? std::log(f) : -std::numeric_limits<double>::infinity();
}

double TabulatedPsf::log_normalization(double mu_x, double mu_y, double energy,
                                       const MapBounds& bounds) const {
    return std::log(truncation_mass(mu_x, mu_y, energy, bounds));
}

double TabulatedPsf::radial_cdf(double energy, double r) const {
    if (r <= 0.0) return 0.0;
    const double r_top = std::min(r, offsets_.back());
    const int n = 2048;
    const double h = r_top / n;
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
        const double rr = (i + 0.5) * h;
        mass += radial_profile(energy, rr) * kTwoPi * rr * h;
    }
    return std::min(mass, 1.0);
}

}  // namespace pmx
