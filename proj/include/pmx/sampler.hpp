#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pmx/config.hpp"
#include "pmx/families.hpp"
#include "pmx/geometry.hpp"
#include "pmx/rng.hpp"

namespace pmx {

struct TraceIteration {
    int iter = 0;
    std::uint32_t k_b = 0;  // background mixture size (snapshots optional)
    double eta_s = 0.0, eta_b = 0.0;
    std::uint64_t n_src = 0;

    struct SourceSnap {
        double x = 0.0, y = 0.0;
        std::uint64_t count = 0;
    };
    std::vector<SourceSnap> sources;

    struct BgSnap {
        std::array<double, 5> ell{}, b{};
        std::uint64_t count = 0;
    };
    std::vector<BgSnap> background;  // present only when recording is enabled
};

struct ChainDiagnostics {
    long mh_proposals = 0;   // tracked-occupancy Metropolis proposals
    long mh_accepts = 0;
    long prior_resamples = 0;
    long envelope_doublings = 0;
};

struct Trace {
    int chain_index = 0;
    std::uint64_t seed = 0;
    std::uint64_t n_events = 0;
    ModelKind model = ModelKind::spatial;
    std::vector<TraceIteration> iterations;
    ChainDiagnostics diag;
};

/// Collapsed Gibbs engine for the two-level mixture: symmetric-Dirichlet
/// level weights (marginalized), per-level DP clustering via auxiliary-value
/// updates, optional per-level Pareto energy factors.
class MixtureEngine {
public:
    struct SpectralPrior {
        double a = 1.0, b = 1.0;
    };

    MixtureEngine(const EventData& events,
                  std::vector<std::unique_ptr<ComponentFamily>> families,
                  std::vector<double> alphas, double lambda, bool random_scan = false);

    /// Put every event into one fresh cluster of level j (initial state).
    void init_all_in_level(std::size_t j, Rng& rng);

    /// Turn on the joint spatial-spectral factors; draws initial shapes from
    /// their Gamma priors. The optional response transform maps observed to
    /// effective energies before the Pareto kernels see them (instrument
    /// response hook; pass-through when empty).
    void enable_spectral(std::vector<SpectralPrior> priors, double e_min, Rng& rng,
                         std::function<double(double)> response = {});

    /// Refresh auxiliary pools and density rows without moving any label
    /// (exposed for diagnostics and tests).
    void prepare_sweep(Rng& rng);

    /// One full iteration: prepare, per-event label updates, parameter
    /// refresh, spectral refresh.
    void sweep(Rng& rng);

    std::size_t n_events() const { return events_->size(); }
    std::size_t n_levels() const { return families_.size(); }
    std::uint8_t level_of(std::size_t i) const { return z_[i]; }
    std::uint32_t cluster_of(std::size_t i) const { return h_[i]; }
    std::uint64_t level_count(std::size_t j) const { return n_level_[j]; }
    const std::vector<std::uint64_t>& occupancy(std::size_t j) const { return occupancy_[j]; }
    ComponentFamily& family(std::size_t j) { return *families_[j]; }
    const ComponentFamily& family(std::size_t j) const { return *families_[j]; }
    bool spectral_enabled() const { return spectral_.has_value(); }
    double eta(std::size_t j) const;

    /// Level-assignment probabilities for event i under the current state
    /// (event i's own membership excluded from all tallies). Requires fresh
    /// density rows (prepare_sweep or sweep must have run).
    std::vector<double> level1_probabilities(std::size_t i) const;

    /// Validates label/occupancy consistency, dense indexing and non-empty
    /// clusters; throws on violation.
    void check_invariants() const;

    /// Overwrite all labels at once (families must already hold the clusters
    /// the labels reference); tallies are rebuilt and validated.
    void set_labels(const std::vector<std::uint8_t>& z, const std::vector<std::uint32_t>& h);

    void save_state(std::ostream& os) const;
    void load_state(std::istream& is);

private:
    struct Spectral {
        std::vector<SpectralPrior> priors;
        std::vector<double> etas;
        double e_min = 1.0;
        std::function<double(double)> response;  // empty = identity

        double effective_energy(double e) const { return response ? response(e) : e; }
    };

    void remove_event(std::size_t i);
    void assign_event(std::size_t i, std::size_t j, std::uint32_t cluster);
    void update_event(std::size_t i, Rng& rng);
    void update_event_logspace(std::size_t i, double u_level, double u_within, Rng& rng);
    double spectral_factor(std::size_t j, std::size_t i) const;
    double spectral_log_factor(std::size_t j, std::size_t i) const;

    const EventData* events_;
    std::vector<std::unique_ptr<ComponentFamily>> families_;
    std::vector<double> alphas_;
    double lambda_;
    bool random_scan_;

    std::vector<std::uint8_t> z_;
    std::vector<std::uint32_t> h_;
    std::vector<std::vector<std::uint64_t>> occupancy_;
    std::vector<std::uint64_t> n_level_;
    std::optional<Spectral> spectral_;

    // scratch
    std::vector<double> weights_;
    std::vector<std::uint32_t> scan_order_;
};

/// Posterior draw of the level weight and within-level stick-breaking weights
/// given the cluster occupancies of one recorded iteration.
struct RecoveredWeights {
    double delta = 0.0;               // weight of this level in the level-1 mixture
    std::vector<double> weights;      // per recorded cluster, in index order
    double tail = 0.0;                // leftover stick mass
};
RecoveredWeights recover_weights(std::span<const std::uint64_t> counts, std::uint64_t n_level,
                                 std::uint64_t n_total, double lambda, double alpha, Rng& rng);

/// One MCMC chain bound to an event list: owns the engine, the RNG stream and
/// the recorded trace. Supports snapshot/restore with bit-identical
/// continuation.
class ChainRunner {
public:
    ChainRunner(const EventData& events, const RunConfig& cfg, const Psf& psf,
                int chain_index);

    void run(int iterations);
    int completed() const { return completed_; }
    const Trace& trace() const { return trace_; }
    Trace take_trace() { return std::move(trace_); }

    void save(std::ostream& os) const;
    void restore(std::istream& is);

    const MixtureEngine& engine() const { return *engine_; }
    MixtureEngine& engine() { return *engine_; }

private:
    void record(int iter);
    void sync_diagnostics();

    const RunConfig cfg_;
    EventData events_;
    std::unique_ptr<MixtureEngine> engine_;
    SourceFamily* source_ = nullptr;
    BackgroundFamily* background_ = nullptr;
    Rng rng_;
    int completed_ = 0;
    Trace trace_;
};

/// Fresh chain, run to completion, trace returned.
Trace run_chain(const std::vector<PhotonEvent>& events, const RunConfig& cfg, const Psf& psf,
                int chain_index);

/// Build the PSF named by the config (analytic defaults or a table file).
std::unique_ptr<Psf> make_psf(const RunConfig& cfg);

}  // namespace pmx
