#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "pmx/bspline.hpp"
#include "pmx/geometry.hpp"
#include "pmx/psf.hpp"
#include "pmx/rng.hpp"

namespace pmx {

/// Events in SoA layout, shared read-only by the sampler machinery.
struct EventData {
    std::vector<double> x, y, energy;
    MapBounds bounds;

    EventData() = default;
    EventData(const std::vector<PhotonEvent>& events, const MapBounds& b);
    std::size_t size() const { return x.size(); }
};

/// One side of the two-level mixture. A family owns its cluster parameters,
/// an auxiliary-value pool, and per-sweep density rows (cluster x event).
class ComponentFamily {
public:
    virtual ~ComponentFamily() = default;

    virtual void bind(const EventData& events) = 0;
    virtual std::size_t cluster_count() const = 0;
    virtual int aux_count() const = 0;

    /// Redraw the auxiliary pool and refresh all density rows. Called once at
    /// the start of every sweep.
    virtual void begin_sweep(Rng& rng) = 0;

    virtual double cluster_density(std::size_t l, std::size_t event) const = 0;
    virtual double aux_density(int h, std::size_t event) const = 0;

    /// Log-density fallbacks for events where every plain density underflows.
    virtual double cluster_log_density(std::size_t l, std::size_t event) const = 0;
    virtual double aux_log_density(int h, std::size_t event) const = 0;

    /// Open a new cluster seeded by auxiliary slot h and the given event;
    /// refreshes the slot afterwards. Returns the new cluster index.
    virtual std::size_t birth_from_aux(int h, std::size_t event, Rng& rng) = 0;

    /// First cluster of an initial all-in-one state. Must give every event a
    /// positive density where the family can achieve that.
    virtual std::size_t birth_initial(std::size_t event, Rng& rng) {
        return birth_from_aux(0, event, rng);
    }

    /// Swap-with-last removal; the caller re-labels events of the moved
    /// cluster.
    virtual void kill_cluster(std::size_t l) = 0;

    /// Parameter refresh given current membership (event indices per cluster).
    virtual void update_parameters(const std::vector<std::vector<std::uint32_t>>& members,
                                   Rng& rng) = 0;

    virtual void save_params(std::ostream& os) const = 0;
    virtual void load_params(std::istream& is) = 0;
};

/// Point-source side: kernel is the (map-renormalized) PSF, base measure is
/// uniform source locations over the map.
class SourceFamily final : public ComponentFamily {
public:
    SourceFamily(const Psf& psf, double prop_sd2, int aux_count);

    void bind(const EventData& events) override;
    std::size_t cluster_count() const override { return mu_x_.size(); }
    int aux_count() const override { return static_cast<int>(aux_x_.size()); }
    void begin_sweep(Rng& rng) override;
    double cluster_density(std::size_t l, std::size_t event) const override {
        return rows_[l][event];
    }
    double aux_density(int h, std::size_t event) const override {
        return aux_rows_[static_cast<std::size_t>(h)][event];
    }
    double cluster_log_density(std::size_t l, std::size_t event) const override;
    double aux_log_density(int h, std::size_t event) const override;
    std::size_t birth_from_aux(int h, std::size_t event, Rng& rng) override;
    void kill_cluster(std::size_t l) override;
    void update_parameters(const std::vector<std::vector<std::uint32_t>>& members,
                           Rng& rng) override;
    void save_params(std::ostream& os) const override;
    void load_params(std::istream& is) override;

    const std::vector<double>& locations_x() const { return mu_x_; }
    const std::vector<double>& locations_y() const { return mu_y_; }

    /// Random-walk acceptance tracking, restricted to clusters with at least
    /// kTrackedOccupancy members (singleton clusters would swamp the rate).
    static constexpr std::size_t kTrackedOccupancy = 100;
    long metropolis_proposals() const { return mh_proposals_; }
    long metropolis_accepts() const { return mh_accepts_; }

private:
    void fill_row(double mx, double my, std::vector<double>& row) const;
    double log_density_at(double mx, double my, std::size_t event) const;
    double member_log_likelihood(double mx, double my,
                                 const std::vector<std::uint32_t>& members) const;

    const Psf& psf_;
    const GaussianPsf* gaussian_ = nullptr;  // fast path when the PSF is Gaussian
    double prop_sd_;
    const EventData* events_ = nullptr;

    // per-event precomputation (identical across sweeps)
    std::vector<double> inv_two_sigma2_, log_norm_;  // Gaussian path
    std::vector<std::uint32_t> energy_group_;        // distinct-energy group per event
    std::vector<double> group_energy_;               // representative energy per group
    std::vector<double> group_sigma_;                // Gaussian width per group

    std::vector<double> mu_x_, mu_y_;
    std::vector<std::vector<double>> rows_;
    std::vector<double> aux_x_, aux_y_;
    std::vector<std::vector<double>> aux_rows_;

    // scratch for parameter updates
    mutable std::vector<double> sx_, sy_, sw_, spref_;
    long mh_proposals_ = 0, mh_accepts_ = 0;
};

/// Diffuse side: kernel is the separable pair of order-4 spline densities,
/// base measure is the ordered-knot prior restricted by the smoothness floors.
class BackgroundFamily final : public ComponentFamily {
public:
    BackgroundFamily(double c_ell, double c_b, int aux_count);

    void bind(const EventData& events) override;
    std::size_t cluster_count() const override { return comps_.size(); }
    int aux_count() const override { return static_cast<int>(aux_comps_.size()); }
    void begin_sweep(Rng& rng) override;
    double cluster_density(std::size_t l, std::size_t event) const override {
        return rows_[l][event];
    }
    double aux_density(int h, std::size_t event) const override {
        return aux_rows_[static_cast<std::size_t>(h)][event];
    }
    double cluster_log_density(std::size_t l, std::size_t event) const override;
    double aux_log_density(int h, std::size_t event) const override;
    std::size_t birth_from_aux(int h, std::size_t event, Rng& rng) override;
    std::size_t birth_initial(std::size_t event, Rng& rng) override;
    void kill_cluster(std::size_t l) override;
    void update_parameters(const std::vector<std::vector<std::uint32_t>>& members,
                           Rng& rng) override;
    void save_params(std::ostream& os) const override;
    void load_params(std::istream& is) override;

    const std::vector<BackgroundComponent>& components() const { return comps_; }
    const KnotSamplerStats& sampler_stats() const { return stats_; }
    long prior_resamples() const { return stats_.prior_resamples; }

private:
    void fill_row(const BackgroundComponent& comp, std::vector<double>& row) const;

    double c_ell_, c_b_;
    int n_aux_;
    const EventData* events_ = nullptr;

    std::vector<BackgroundComponent> comps_;
    std::vector<std::vector<double>> rows_;
    std::vector<BackgroundComponent> aux_comps_;
    std::vector<std::vector<double>> aux_rows_;

    mutable std::vector<double> fx_, fy_, coord_;
    KnotSamplerStats stats_;
};

/// Finite-atom kernel family for exact micro-instance checks: the base
/// measure has a handful of atoms and the per-atom density of every event is
/// tabulated, so all conditionals are exact finite sums.
class GridFamily final : public ComponentFamily {
public:
    GridFamily(std::vector<double> atom_weights,
               std::vector<std::vector<double>> atom_densities, int aux_count);

    void bind(const EventData& events) override;
    std::size_t cluster_count() const override { return atoms_.size(); }
    int aux_count() const override { return static_cast<int>(aux_atoms_.size()); }
    void begin_sweep(Rng& rng) override;
    double cluster_density(std::size_t l, std::size_t event) const override {
        return atom_densities_[atoms_[l]][event];
    }
    double aux_density(int h, std::size_t event) const override {
        return atom_densities_[aux_atoms_[static_cast<std::size_t>(h)]][event];
    }
    double cluster_log_density(std::size_t l, std::size_t event) const override;
    double aux_log_density(int h, std::size_t event) const override;
    std::size_t birth_from_aux(int h, std::size_t event, Rng& rng) override;
    void kill_cluster(std::size_t l) override;
    void update_parameters(const std::vector<std::vector<std::uint32_t>>& members,
                           Rng& rng) override;
    void save_params(std::ostream& os) const override;
    void load_params(std::istream& is) override;

    const std::vector<std::size_t>& cluster_atoms() const { return atoms_; }
    /// Test support: install cluster parameters directly.
    void set_clusters(std::vector<std::size_t> atoms) { atoms_ = std::move(atoms); }

private:
    std::size_t draw_atom_prior(Rng& rng) const;
    std::size_t draw_atom_posterior(std::size_t event, Rng& rng) const;

    std::vector<double> atom_weights_;
    std::vector<std::vector<double>> atom_densities_;
    int n_aux_;
    std::vector<std::size_t> atoms_;      // cluster parameter = atom index
    std::vector<std::size_t> aux_atoms_;
};

}  // namespace pmx
