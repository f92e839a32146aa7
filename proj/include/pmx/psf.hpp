#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pmx/geometry.hpp"
#include "pmx/rng.hpp"

namespace pmx {

/// Point-spread function: spatial density of an observed photon given the
/// true source location and the photon energy. Densities are per square
/// degree and are truncated-and-renormalized over the map, so that for every
/// (mu, energy) the density integrates to 1 over the bounds.
class Psf {
public:
    virtual ~Psf() = default;

    virtual double density(double x, double y, double mu_x, double mu_y, double energy,
                           const MapBounds& bounds) const = 0;

    /// Draw an observed position; resamples against the map edges (guarded at
    /// 10^6 attempts).
    virtual void sample(double mu_x, double mu_y, double energy, const MapBounds& bounds,
                        Rng& rng, double& x, double& y) const = 0;

    /// Radius enclosing the given fraction of the (untruncated) radial mass,
    /// found by bisection on the radial CDF to 1e-4.
    double containment_radius(double energy, double frac) const;

    /// CDF of the photon offset |x - mu| at the given energy, untruncated.
    virtual double radial_cdf(double energy, double r) const = 0;

    /// density = exp(unnormalized_log_density - log_normalization); split out
    /// so callers can share the normalization across events of one energy.
    virtual double unnormalized_log_density(double x, double y, double mu_x, double mu_y,
                                            double energy) const = 0;
    virtual double log_normalization(double mu_x, double mu_y, double energy,
                                     const MapBounds& bounds) const = 0;

protected:
    static constexpr long kMaxSampleAttempts = 1000000;
};

/// Isotropic Gaussian with energy-dependent width
/// sigma(E) = sigma_ref * (E / e_ref)^(-index) + sigma_floor.
class GaussianPsf final : public Psf {
public:
    GaussianPsf(double sigma_ref, double e_ref, double index, double sigma_floor);

    double sigma(double energy) const;
    double density(double x, double y, double mu_x, double mu_y, double energy,
                   const MapBounds& bounds) const override;
    void sample(double mu_x, double mu_y, double energy, const MapBounds& bounds, Rng& rng,
                double& x, double& y) const override;
    double radial_cdf(double energy, double r) const override;
    double unnormalized_log_density(double x, double y, double mu_x, double mu_y,
                                    double energy) const override;
    double log_normalization(double mu_x, double mu_y, double energy,
                             const MapBounds& bounds) const override;

    /// log of the mass the untruncated Gaussian centered at mu places inside
    /// the bounds (the renormalization divisor).
    static double log_truncation_mass(double mu_x, double mu_y, double sigma,
                                      const MapBounds& bounds);

private:
    double sigma_ref_, e_ref_, index_, sigma_floor_;
};

/// Radial-profile table over an (energy, offset) grid; bilinear interpolation
/// in (log energy, offset). Each energy row is rescaled at load time so the
/// untruncated radial mass integrates to 1.
class TabulatedPsf final : public Psf {
public:
    TabulatedPsf(std::vector<double> energies, std::vector<double> offsets,
                 std::vector<double> table);  // table[e * n_r + r]

    static TabulatedPsf load(const std::string& path);

    double density(double x, double y, double mu_x, double mu_y, double energy,
                   const MapBounds& bounds) const override;
    void sample(double mu_x, double mu_y, double energy, const MapBounds& bounds, Rng& rng,
                double& x, double& y) const override;
    double radial_cdf(double energy, double r) const override;
    double unnormalized_log_density(double x, double y, double mu_x, double mu_y,
                                    double energy) const override;
    double log_normalization(double mu_x, double mu_y, double energy,
                             const MapBounds& bounds) const override;

    /// Interpolated radial profile after renormalization (per deg^2).
    double radial_profile(double energy, double r) const;
    double max_offset() const { return offsets_.back(); }

private:
    double truncation_mass(double mu_x, double mu_y, double energy,
                           const MapBounds& bounds) const;

    std::vector<double> energies_;  // ascending
    std::vector<double> offsets_;   // ascending from 0
    std::vector<double> table_;     // renormalized profile values
};

/// Fraction of the circle of the given radius around (cx, cy) lying inside
/// the bounds (arc-measure / 2*pi). Exposed for the tabulated-PSF tests.
double circle_fraction_inside(double cx, double cy, double radius, const MapBounds& bounds);

}  // namespace pmx
