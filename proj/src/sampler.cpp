#include "pmx/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "pmx/spectral.hpp"

namespace pmx {

MixtureEngine::MixtureEngine(const EventData& events,
                             std::vector<std::unique_ptr<ComponentFamily>> families,
                             std::vector<double> alphas, double lambda, bool random_scan)
    : events_(&events),
      families_(std::move(families)),
      alphas_(std::move(alphas)),
      lambda_(lambda),
      random_scan_(random_scan) {
    if (families_.empty() || families_.size() != alphas_.size())
        throw std::invalid_argument("MixtureEngine: families/alphas mismatch");
    if (families_.size() > 8) throw std::invalid_argument("MixtureEngine: at most 8 levels");
    if (!(lambda_ > 0.0)) throw std::invalid_argument("MixtureEngine: lambda must be > 0");
    for (auto& f : families_) f->bind(events);
    z_.assign(events.size(), 0);
    h_.assign(events.size(), 0);
    occupancy_.resize(families_.size());
    n_level_.assign(families_.size(), 0);
}

void MixtureEngine::init_all_in_level(std::size_t j, Rng& rng) {
    if (events_->size() == 0) throw std::invalid_argument("MixtureEngine: no events");
    if (j >= families_.size()) throw std::invalid_argument("MixtureEngine: bad init level");
    for (auto& f : families_) f->begin_sweep(rng);  // populate auxiliary pools
    const std::size_t c = families_[j]->birth_initial(0, rng);
    z_.assign(events_->size(), static_cast<std::uint8_t>(j));
    h_.assign(events_->size(), static_cast<std::uint32_t>(c));
    for (auto& occ : occupancy_) occ.clear();
    occupancy_[j].assign(1, events_->size());
    n_level_.assign(families_.size(), 0);
    n_level_[j] = events_->size();
}

void MixtureEngine::enable_spectral(std::vector<SpectralPrior> priors, double e_min, Rng& rng,
                                    std::function<double(double)> response) {
    if (priors.size() != families_.size())
        throw std::invalid_argument("MixtureEngine: one spectral prior per level required");
    Spectral sp;
    sp.priors = std::move(priors);
    sp.e_min = e_min;
    sp.response = std::move(response);
    for (const auto& p : sp.priors) sp.etas.push_back(rng.gamma(p.a, p.b));
    spectral_ = std::move(sp);
}

double MixtureEngine::eta(std::size_t j) const {
    if (!spectral_) throw std::logic_error("MixtureEngine: spectral factors not enabled");
    return spectral_->etas[j];
}

double MixtureEngine::spectral_factor(std::size_t j, std::size_t i) const {
    if (!spectral_) return 1.0;
    return pareto_density(spectral_->effective_energy(events_->energy[i]), spectral_->e_min,
                          spectral_->etas[j]);
}

double MixtureEngine::spectral_log_factor(std::size_t j, std::size_t i) const {
    if (!spectral_) return 0.0;
    return pareto_log_density(spectral_->effective_energy(events_->energy[i]),
                              spectral_->e_min, spectral_->etas[j]);
}

void MixtureEngine::remove_event(std::size_t i) {
    const std::size_t j = z_[i];
    const std::uint32_t c = h_[i];
    auto& occ = occupancy_[j];
    --n_level_[j];
    if (--occ[c] > 0) return;

    // empty cluster: discard it and compact indices (swap with the last)
    const auto last = static_cast<std::uint32_t>(occ.size() - 1);
    families_[j]->kill_cluster(c);
    if (c != last) {
        occ[c] = occ[last];
        for (std::size_t e = 0; e < z_.size(); ++e)
            if (z_[e] == j && h_[e] == last) h_[e] = c;
    }
    occ.pop_back();
}

void MixtureEngine::assign_event(std::size_t i, std::size_t j, std::uint32_t cluster) {
    z_[i] = static_cast<std::uint8_t>(j);
    h_[i] = cluster;
    ++occupancy_[j][cluster];
    ++n_level_[j];
}

void MixtureEngine::update_event(std::size_t i, Rng& rng) {
    remove_event(i);
    const double u_level = rng.uniform();
    const double u_within = rng.uniform();

    const std::size_t n_j = families_.size();
    double level_weight[8];
    double within_sum[8];
    std::size_t offset[8];
    weights_.clear();

    double total = 0.0;
    for (std::size_t j = 0; j < n_j; ++j) {
        const auto& fam = *families_[j];
        const auto& occ = occupancy_[j];
        const int n_aux = fam.aux_count();
        offset[j] = weights_.size();
        double s = 0.0;
        for (std::size_t l = 0; l < occ.size(); ++l) {
            const double w = static_cast<double>(occ[l]) * fam.cluster_density(l, i);
            weights_.push_back(w);
            s += w;
        }
        const double aux_scale = alphas_[j] / n_aux;
        for (int h = 0; h < n_aux; ++h) {
            const double w = aux_scale * fam.aux_density(h, i);
            weights_.push_back(w);
            s += w;
        }
        within_sum[j] = s;
        const double nj = static_cast<double>(n_level_[j]);
        level_weight[j] = (nj + lambda_) * s / (nj + alphas_[j]) * spectral_factor(j, i);
        total += level_weight[j];
    }

    if (!(total > 0.0) || !std::isfinite(total)) {
        update_event_logspace(i, u_level, u_within, rng);
        return;
    }

    std::size_t j_pick = n_j - 1;
    double acc = 0.0;
    const double target = u_level * total;
    for (std::size_t j = 0; j < n_j; ++j) {
        acc += level_weight[j];
        if (target < acc) {
            j_pick = j;
            break;
        }
    }

    const auto& fam = *families_[j_pick];
    const std::size_t k = occupancy_[j_pick].size();
    const std::size_t cnt = k + static_cast<std::size_t>(fam.aux_count());
    const double* w = weights_.data() + offset[j_pick];
    std::size_t pick = cnt - 1;
    double acc2 = 0.0;
    const double target2 = u_within * within_sum[j_pick];
    for (std::size_t l = 0; l < cnt; ++l) {
        acc2 += w[l];
        if (target2 < acc2) {
            pick = l;
            break;
        }
    }

    if (pick < k) {
        assign_event(i, j_pick, static_cast<std::uint32_t>(pick));
    } else {
        const auto new_cluster =
            families_[j_pick]->birth_from_aux(static_cast<int>(pick - k), i, rng);
        occupancy_[j_pick].push_back(0);
        assign_event(i, j_pick, static_cast<std::uint32_t>(new_cluster));
    }
}

void MixtureEngine::update_event_logspace(std::size_t i, double u_level, double u_within,
                                          Rng& rng) {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    const std::size_t n_j = families_.size();
    std::vector<std::vector<double>> logw(n_j);
    std::vector<double> log_level(n_j, kNegInf);

    for (std::size_t j = 0; j < n_j; ++j) {
        const auto& fam = *families_[j];
        const auto& occ = occupancy_[j];
        const int n_aux = fam.aux_count();
        auto& lw = logw[j];
        lw.reserve(occ.size() + n_aux);
        double lmax = kNegInf;
        for (std::size_t l = 0; l < occ.size(); ++l) {
            const double v = std::log(static_cast<double>(occ[l])) + fam.cluster_log_density(l, i);
            lw.push_back(v);
            lmax = std::max(lmax, v);
        }
        const double log_aux_scale = std::log(alphas_[j] / n_aux);
        for (int h = 0; h < n_aux; ++h) {
            const double v = log_aux_scale + fam.aux_log_density(h, i);
            lw.push_back(v);
            lmax = std::max(lmax, v);
        }
        if (lmax == kNegInf) continue;
        double s = 0.0;
        for (double v : lw) s += std::exp(v - lmax);
        const double nj = static_cast<double>(n_level_[j]);
        log_level[j] = std::log(nj + lambda_) + lmax + std::log(s) -
                       std::log(nj + alphas_[j]) + spectral_log_factor(j, i);
    }

    const double gmax = *std::max_element(log_level.begin(), log_level.end());
    if (gmax == kNegInf)
        throw std::runtime_error(
            "MixtureEngine: an event has zero density under every component");

    double total = 0.0;
    for (double v : log_level) total += std::exp(v - gmax);
    std::size_t j_pick = n_j - 1;
    double acc = 0.0;
    const double target = u_level * total;
    for (std::size_t j = 0; j < n_j; ++j) {
        acc += std::exp(log_level[j] - gmax);
        if (target < acc) {
            j_pick = j;
            break;
        }
    }

    const auto& lw = logw[j_pick];
    const double lmax = *std::max_element(lw.begin(), lw.end());
    double within_total = 0.0;
    for (double v : lw) within_total += std::exp(v - lmax);
    std::size_t pick = lw.size() - 1;
    double acc2 = 0.0;
    const double target2 = u_within * within_total;
    for (std::size_t l = 0; l < lw.size(); ++l) {
        acc2 += std::exp(lw[l] - lmax);
        if (target2 < acc2) {
            pick = l;
            break;
        }
    }

    const std::size_t k = occupancy_[j_pick].size();
    if (pick < k) {
        assign_event(i, j_pick, static_cast<std::uint32_t>(pick));
    } else {
        const auto new_cluster =
            families_[j_pick]->birth_from_aux(static_cast<int>(pick - k), i, rng);
        occupancy_[j_pick].push_back(0);
        assign_event(i, j_pick, static_cast<std::uint32_t>(new_cluster));
    }
}

void MixtureEngine::prepare_sweep(Rng& rng) {
    for (auto& f : families_) f->begin_sweep(rng);
}

void MixtureEngine::sweep(Rng& rng) {
    prepare_sweep(rng);

    const std::size_t n = events_->size();
    if (random_scan_) {
        scan_order_.resize(n);
        for (std::size_t i = 0; i < n; ++i) scan_order_[i] = static_cast<std::uint32_t>(i);
        for (std::size_t i = n; i > 1; --i) {
            const auto r = static_cast<std::size_t>(rng.uniform_index(i));
            std::swap(scan_order_[i - 1], scan_order_[r]);
        }
        for (auto i : scan_order_) update_event(i, rng);
    } else {
        for (std::size_t i = 0; i < n; ++i) update_event(i, rng);
    }

    // Step 4: refresh cluster parameters given the final membership
    for (std::size_t j = 0; j < families_.size(); ++j) {
        std::vector<std::vector<std::uint32_t>> members(occupancy_[j].size());
        for (std::size_t l = 0; l < members.size(); ++l)
            members[l].reserve(occupancy_[j][l]);
        for (std::size_t i = 0; i < n; ++i)
            if (z_[i] == j) members[h_[i]].push_back(static_cast<std::uint32_t>(i));
        families_[j]->update_parameters(members, rng);
    }

    // Step 5: conjugate refresh of the Pareto shapes
    if (spectral_) {
        std::vector<double> energies;
        for (std::size_t j = 0; j < families_.size(); ++j) {
            energies.clear();
            for (std::size_t i = 0; i < n; ++i)
                if (z_[i] == j)
                    energies.push_back(spectral_->effective_energy(events_->energy[i]));
            const auto [a, b] = gamma_pareto_update(spectral_->priors[j].a,
                                                    spectral_->priors[j].b, energies,
                                                    spectral_->e_min);
            spectral_->etas[j] = rng.gamma(a, b);
        }
    }
}

std::vector<double> MixtureEngine::level1_probabilities(std::size_t i) const {
    const std::size_t n_j = families_.size();
    std::vector<double> w(n_j, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < n_j; ++j) {
        const auto& fam = *families_[j];
        const auto& occ = occupancy_[j];
        const bool own = (z_[i] == j);
        double s = 0.0;
        for (std::size_t l = 0; l < occ.size(); ++l) {
            const double c = static_cast<double>(occ[l]) - (own && h_[i] == l ? 1.0 : 0.0);
            s += c * fam.cluster_density(l, i);
        }
        const double aux_scale = alphas_[j] / fam.aux_count();
        for (int h = 0; h < fam.aux_count(); ++h) s += aux_scale * fam.aux_density(h, i);
        const double nj = static_cast<double>(n_level_[j]) - (own ? 1.0 : 0.0);
        w[j] = (nj + lambda_) * s / (nj + alphas_[j]) * spectral_factor(j, i);
        total += w[j];
    }
    if (!(total > 0.0))
        throw std::runtime_error("level1_probabilities: all level weights are zero");
    for (auto& v : w) v /= total;
    return w;
}

void MixtureEngine::check_invariants() const {
    std::vector<std::vector<std::uint64_t>> occ(families_.size());
    std::vector<std::uint64_t> n_level(families_.size(), 0);
    for (std::size_t j = 0; j < families_.size(); ++j)
        occ[j].assign(families_[j]->cluster_count(), 0);
    for (std::size_t i = 0; i < z_.size(); ++i) {
        const std::size_t j = z_[i];
        if (j >= families_.size()) throw std::logic_error("invariant: bad level label");
        if (h_[i] >= occ[j].size()) throw std::logic_error("invariant: dangling cluster label");
        ++occ[j][h_[i]];
        ++n_level[j];
    }
    for (std::size_t j = 0; j < families_.size(); ++j) {
        if (occ[j] != occupancy_[j]) throw std::logic_error("invariant: occupancy tally drift");
        if (n_level[j] != n_level_[j]) throw std::logic_error("invariant: level tally drift");
        for (auto c : occ[j])
            if (c == 0) throw std::logic_error("invariant: empty cluster retained");
    }
    if (spectral_)
        for (double e : spectral_->etas)
            if (!(e > 0.0)) throw std::logic_error("invariant: non-positive Pareto shape");
}

void MixtureEngine::set_labels(const std::vector<std::uint8_t>& z,
                               const std::vector<std::uint32_t>& h) {
    if (z.size() != z_.size() || h.size() != h_.size())
        throw std::invalid_argument("set_labels: size mismatch");
    z_ = z;
    h_ = h;
    for (std::size_t j = 0; j < families_.size(); ++j)
        occupancy_[j].assign(families_[j]->cluster_count(), 0);
    n_level_.assign(families_.size(), 0);
    for (std::size_t i = 0; i < z_.size(); ++i) {
        if (z_[i] >= families_.size() || h_[i] >= occupancy_[z_[i]].size())
            throw std::invalid_argument("set_labels: label outside cluster range");
        ++occupancy_[z_[i]][h_[i]];
        ++n_level_[z_[i]];
    }
    check_invariants();
}

void MixtureEngine::save_state(std::ostream& os) const {
    os << std::setprecision(17);
    os << z_.size() << ' ' << families_.size() << "\n";
    for (std::size_t i = 0; i < z_.size(); ++i)
        os << static_cast<int>(z_[i]) << ' ' << h_[i] << "\n";
    for (const auto& f : families_) f->save_params(os);
    os << (spectral_ ? 1 : 0) << "\n";
    if (spectral_) {
        for (double e : spectral_->etas) os << e << ' ';
        os << "\n";
    }
}

void MixtureEngine::load_state(std::istream& is) {
    std::size_t n, nj;
    if (!(is >> n >> nj)) throw std::runtime_error("engine snapshot: truncated header");
    if (n != z_.size() || nj != families_.size())
        throw std::runtime_error("engine snapshot: shape mismatch with current setup");
    for (std::size_t i = 0; i < n; ++i) {
        int zi;
        if (!(is >> zi >> h_[i])) throw std::runtime_error("engine snapshot: truncated labels");
        z_[i] = static_cast<std::uint8_t>(zi);
    }
    for (auto& f : families_) f->load_params(is);
    int has_spectral;
    if (!(is >> has_spectral)) throw std::runtime_error("engine snapshot: truncated payload");
    if (has_spectral) {
        if (!spectral_)
            throw std::runtime_error("engine snapshot: spectral state without spectral model");
        for (double& e : spectral_->etas)
            if (!(is >> e)) throw std::runtime_error("engine snapshot: truncated shapes");
    }

    // rebuild tallies from the labels
    for (std::size_t j = 0; j < families_.size(); ++j)
        occupancy_[j].assign(families_[j]->cluster_count(), 0);
    n_level_.assign(families_.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (h_[i] >= occupancy_[z_[i]].size())
            throw std::runtime_error("engine snapshot: label outside cluster range");
        ++occupancy_[z_[i]][h_[i]];
        ++n_level_[z_[i]];
    }
    check_invariants();
}

RecoveredWeights recover_weights(std::span<const std::uint64_t> counts, std::uint64_t n_level,
                                 std::uint64_t n_total, double lambda, double alpha, Rng& rng) {
    std::uint64_t sum = 0;
    for (auto c : counts) sum += c;
    if (sum != n_level || n_level > n_total)
        throw std::invalid_argument("recover_weights: inconsistent occupancy tallies");

    RecoveredWeights out;
    out.delta = rng.beta(lambda + static_cast<double>(n_level),
                         lambda + static_cast<double>(n_total - n_level));
    double stick = 1.0;
    std::uint64_t remaining = n_level;
    for (auto c : counts) {
        remaining -= c;
        const double v = rng.beta(static_cast<double>(c),
                                  alpha + static_cast<double>(remaining));
        out.weights.push_back(stick * v);
        stick *= 1.0 - v;
    }
    out.tail = stick;
    return out;
}

std::unique_ptr<Psf> make_psf(const RunConfig& cfg) {
    if (!cfg.psf_table.empty())
        return std::make_unique<TabulatedPsf>(TabulatedPsf::load(cfg.psf_table));
    return std::make_unique<GaussianPsf>(cfg.psf_sigma_ref, cfg.psf_e_ref, cfg.psf_index,
                                         cfg.psf_sigma_floor);
}

ChainRunner::ChainRunner(const EventData& events, const RunConfig& cfg, const Psf& psf,
                         int chain_index)
    : cfg_(cfg), events_(events), rng_(cfg.seed, static_cast<std::uint64_t>(chain_index)) {
    if (events_.size() == 0) throw std::invalid_argument("ChainRunner: no events");
    cfg_.validate();

    auto source = std::make_unique<SourceFamily>(psf, cfg.hyper.prop_sd2, cfg.hyper.h_s);
    auto background = std::make_unique<BackgroundFamily>(cfg.hyper.c_ell, cfg.hyper.c_b,
                                                         cfg.hyper.h_b);
    source_ = source.get();
    background_ = background.get();
    std::vector<std::unique_ptr<ComponentFamily>> families;
    families.push_back(std::move(source));
    families.push_back(std::move(background));
    engine_ = std::make_unique<MixtureEngine>(events_, std::move(families),
                                              std::vector<double>{cfg.hyper.alpha_s,
                                                                  cfg.hyper.alpha_b},
                                              cfg.hyper.lambda, cfg.random_scan);
    if (cfg.model == ModelKind::joint)
        engine_->enable_spectral({{cfg.hyper.a_eta_s, cfg.hyper.b_eta_s},
                                  {cfg.hyper.a_eta_b, cfg.hyper.b_eta_b}},
                                 cfg.bounds.e_min, rng_);
    engine_->init_all_in_level(1, rng_);

    trace_.chain_index = chain_index;
    trace_.seed = cfg.seed;
    trace_.n_events = events_.size();
    trace_.model = cfg.model;
}

void ChainRunner::record(int iter) {
    TraceIteration rec;
    rec.iter = iter;
    if (engine_->spectral_enabled()) {
        rec.eta_s = engine_->eta(0);
        rec.eta_b = engine_->eta(1);
    }
    rec.n_src = engine_->level_count(0);
    rec.k_b = static_cast<std::uint32_t>(engine_->occupancy(1).size());
    const auto& occ_s = engine_->occupancy(0);
    const auto& mx = source_->locations_x();
    const auto& my = source_->locations_y();
    for (std::size_t l = 0; l < occ_s.size(); ++l)
        rec.sources.push_back({mx[l], my[l], occ_s[l]});
    if (cfg_.record_background) {
        const auto& occ_b = engine_->occupancy(1);
        const auto& comps = background_->components();
        for (std::size_t l = 0; l < occ_b.size(); ++l) {
            TraceIteration::BgSnap snap;
            snap.ell = comps[l].ell.k;
            snap.b = comps[l].b.k;
            snap.count = occ_b[l];
            rec.background.push_back(snap);
        }
    }
    trace_.iterations.push_back(std::move(rec));
}

void ChainRunner::sync_diagnostics() {
    trace_.diag.mh_proposals = source_->metropolis_proposals();
    trace_.diag.mh_accepts = source_->metropolis_accepts();
    trace_.diag.prior_resamples = background_->prior_resamples();
    trace_.diag.envelope_doublings = background_->sampler_stats().envelope_doublings;
}

void ChainRunner::run(int iterations) {
    for (int step = 0; step < iterations; ++step) {
        const int iter = completed_ + 1;
        engine_->sweep(rng_);
        if (iter % cfg_.thin == 0) record(iter);
        completed_ = iter;
    }
    sync_diagnostics();
}

void ChainRunner::save(std::ostream& os) const {
    os << std::setprecision(17);
    os << "photonmix-snapshot 1\n";
    os << "chain " << trace_.chain_index << " completed " << completed_ << " model "
       << to_string(cfg_.model) << "\n";
    rng_.save(os);
    os << "\n";
    engine_->save_state(os);
}

void ChainRunner::restore(std::istream& is) {
    std::string magic;
    int version;
    if (!(is >> magic >> version) || magic != "photonmix-snapshot" || version != 1)
        throw std::runtime_error("snapshot: unrecognized header");
    std::string tok, model_name;
    int chain_idx;
    if (!(is >> tok >> chain_idx) || tok != "chain")
        throw std::runtime_error("snapshot: malformed chain line");
    if (!(is >> tok >> completed_) || tok != "completed")
        throw std::runtime_error("snapshot: malformed chain line");
    if (!(is >> tok >> model_name) || tok != "model" ||
        model_from_string(model_name) != cfg_.model)
        throw std::runtime_error("snapshot: model mismatch");
    if (chain_idx != trace_.chain_index)
        throw std::runtime_error("snapshot: chain index mismatch");
    rng_.load(is);
    engine_->load_state(is);
    trace_.iterations.clear();
    sync_diagnostics();
}

Trace run_chain(const std::vector<PhotonEvent>& events, const RunConfig& cfg, const Psf& psf,
                int chain_index) {
    EventData data(events, cfg.bounds);
    ChainRunner runner(data, cfg, psf, chain_index);
    runner.run(cfg.iterations);
    return runner.take_trace();
}

}  // namespace pmx
