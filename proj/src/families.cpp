#include "pmx/families.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include "pmx/kernels.hpp"

namespace pmx {

EventData::EventData(const std::vector<PhotonEvent>& events, const MapBounds& b) : bounds(b) {
    x.reserve(events.size());
    y.reserve(events.size());
    energy.reserve(events.size());
    for (const auto& ev : events) {
        x.push_back(ev.x);
        y.push_back(ev.y);
        energy.push_back(ev.energy);
    }
}

// ---------------------------------------------------------------------------
// SourceFamily

SourceFamily::SourceFamily(const Psf& psf, double prop_sd2, int aux_count)
    : psf_(psf), prop_sd_(std::sqrt(prop_sd2)) {
    if (aux_count < 1) throw std::invalid_argument("SourceFamily: aux_count must be >= 1");
    gaussian_ = dynamic_cast<const GaussianPsf*>(&psf);
    aux_x_.resize(static_cast<std::size_t>(aux_count));
    aux_y_.resize(static_cast<std::size_t>(aux_count));
    aux_rows_.resize(static_cast<std::size_t>(aux_count));
}

void SourceFamily::bind(const EventData& events) {
    events_ = &events;
    const std::size_t n = events.size();

    // group events by exact energy so per-cluster renormalization masses are
    // computed once per distinct energy
    energy_group_.assign(n, 0);
    group_energy_.clear();
    std::map<double, std::uint32_t> seen;
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, inserted] = seen.try_emplace(events.energy[i],
                                               static_cast<std::uint32_t>(group_energy_.size()));
        if (inserted) group_energy_.push_back(events.energy[i]);
        energy_group_[i] = it->second;
    }

    group_sigma_.clear();
    inv_two_sigma2_.clear();
    log_norm_.clear();
    if (gaussian_) {
        group_sigma_.reserve(group_energy_.size());
        for (double e : group_energy_) group_sigma_.push_back(gaussian_->sigma(e));
        inv_two_sigma2_.resize(n);
        log_norm_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = group_sigma_[energy_group_[i]];
            inv_two_sigma2_[i] = 1.0 / (2.0 * s * s);
            log_norm_[i] = -std::log(6.283185307179586 * s * s);
        }
    }
    spref_.resize(n);
    for (auto& row : aux_rows_) row.resize(n);
}

void SourceFamily::fill_row(double mx, double my, std::vector<double>& row) const {
    const std::size_t n = events_->size();
    row.resize(n);
    if (gaussian_) {
        std::vector<double> log_z(group_energy_.size());
        for (std::size_t g = 0; g < group_energy_.size(); ++g)
            log_z[g] = GaussianPsf::log_truncation_mass(mx, my, group_sigma_[g],
                                                        events_->bounds);
        for (std::size_t i = 0; i < n; ++i)
            spref_[i] = log_norm_[i] - log_z[energy_group_[i]];
        kernels::gauss_column(events_->x.data(), events_->y.data(), inv_two_sigma2_.data(),
                              spref_.data(), n, mx, my, row.data());
        return;
    }
    std::vector<double> log_z(group_energy_.size());
    for (std::size_t g = 0; g < group_energy_.size(); ++g)
        log_z[g] = psf_.log_normalization(mx, my, group_energy_[g], events_->bounds);
    for (std::size_t i = 0; i < n; ++i)
        row[i] = std::exp(psf_.unnormalized_log_density(events_->x[i], events_->y[i], mx, my,
                                                        events_->energy[i]) -
                          log_z[energy_group_[i]]);
}

double SourceFamily::log_density_at(double mx, double my, std::size_t event) const {
    if (gaussian_) {
        const double s = group_sigma_[energy_group_[event]];
        const double dx = events_->x[event] - mx;
        const double dy = events_->y[event] - my;
        return log_norm_[event] - (dx * dx + dy * dy) * inv_two_sigma2_[event] -
               GaussianPsf::log_truncation_mass(mx, my, s, events_->bounds);
    }
    return psf_.unnormalized_log_density(events_->x[event], events_->y[event], mx, my,
                                         events_->energy[event]) -
           psf_.log_normalization(mx, my, events_->energy[event], events_->bounds);
}

double SourceFamily::cluster_log_density(std::size_t l, std::size_t event) const {
    return log_density_at(mu_x_[l], mu_y_[l], event);
}

double SourceFamily::aux_log_density(int h, std::size_t event) const {
    const auto hh = static_cast<std::size_t>(h);
    return log_density_at(aux_x_[hh], aux_y_[hh], event);
}

void SourceFamily::begin_sweep(Rng& rng) {
    const MapBounds& b = events_->bounds;
    for (std::size_t h = 0; h < aux_x_.size(); ++h) {
        aux_x_[h] = rng.uniform(b.x_min, b.x_max);
        aux_y_[h] = rng.uniform(b.y_min, b.y_max);
        fill_row(aux_x_[h], aux_y_[h], aux_rows_[h]);
    }
    for (std::size_t l = 0; l < mu_x_.size(); ++l) fill_row(mu_x_[l], mu_y_[l], rows_[l]);
}

std::size_t SourceFamily::birth_from_aux(int h, std::size_t event, Rng& rng) {
    // new-cluster parameter: posterior draw given the seeding event — the
    // map-truncated PSF centered on the event
    double mx, my;
    psf_.sample(events_->x[event], events_->y[event], events_->energy[event], events_->bounds,
                rng, mx, my);
    mu_x_.push_back(mx);
    mu_y_.push_back(my);
    rows_.emplace_back();
    fill_row(mx, my, rows_.back());

    const auto hh = static_cast<std::size_t>(h);
    const MapBounds& b = events_->bounds;
    aux_x_[hh] = rng.uniform(b.x_min, b.x_max);
    aux_y_[hh] = rng.uniform(b.y_min, b.y_max);
    fill_row(aux_x_[hh], aux_y_[hh], aux_rows_[hh]);
    return mu_x_.size() - 1;
}

void SourceFamily::kill_cluster(std::size_t l) {
    mu_x_[l] = mu_x_.back();
    mu_y_[l] = mu_y_.back();
    rows_[l] = std::move(rows_.back());
    mu_x_.pop_back();
    mu_y_.pop_back();
    rows_.pop_back();
}

double SourceFamily::member_log_likelihood(double mx, double my,
                                           const std::vector<std::uint32_t>& members) const {
    double acc = 0.0;
    for (auto i : members) acc += log_density_at(mx, my, i);
    return acc;
}

void SourceFamily::update_parameters(const std::vector<std::vector<std::uint32_t>>& members,
                                     Rng& rng) {
    const MapBounds& b = events_->bounds;
    for (std::size_t l = 0; l < mu_x_.size(); ++l) {
        const auto& mem = members[l];
        const bool tracked = mem.size() >= kTrackedOccupancy;
        if (tracked) ++mh_proposals_;

        const auto [n1, n2] = rng.normal2();
        const double px = mu_x_[l] + prop_sd_ * n1;
        const double py = mu_y_[l] + prop_sd_ * n2;
        if (!b.contains(px, py)) continue;  // uniform location prior is zero off the map

        double log_a;
        if (gaussian_) {
            sx_.clear();
            sy_.clear();
            sw_.clear();
            for (auto i : mem) {
                sx_.push_back(events_->x[i]);
                sy_.push_back(events_->y[i]);
                sw_.push_back(inv_two_sigma2_[i]);
            }
            const double qf_old = kernels::weighted_sqdist_sum(
                sx_.data(), sy_.data(), sw_.data(), sx_.size(), mu_x_[l], mu_y_[l]);
            const double qf_new = kernels::weighted_sqdist_sum(
                sx_.data(), sy_.data(), sw_.data(), sx_.size(), px, py);
            double z_term = 0.0;
            std::map<std::uint32_t, std::size_t> group_counts;
            for (auto i : mem) ++group_counts[energy_group_[i]];
            for (auto [g, c] : group_counts) {
                const double s = group_sigma_[g];
                z_term += static_cast<double>(c) *
                          (GaussianPsf::log_truncation_mass(mu_x_[l], mu_y_[l], s, b) -
                           GaussianPsf::log_truncation_mass(px, py, s, b));
            }
            log_a = (qf_old - qf_new) + z_term;
        } else {
            log_a = member_log_likelihood(px, py, mem) -
                    member_log_likelihood(mu_x_[l], mu_y_[l], mem);
        }

        if (std::log(rng.uniform_pos()) < log_a) {
            mu_x_[l] = px;
            mu_y_[l] = py;
            if (tracked) ++mh_accepts_;
        }
    }
}

void SourceFamily::save_params(std::ostream& os) const {
    os << mu_x_.size() << "\n";
    for (std::size_t l = 0; l < mu_x_.size(); ++l) os << mu_x_[l] << ' ' << mu_y_[l] << "\n";
    os << mh_proposals_ << ' ' << mh_accepts_ << "\n";
}

void SourceFamily::load_params(std::istream& is) {
    std::size_t k;
    if (!(is >> k)) throw std::runtime_error("SourceFamily: truncated snapshot");
    mu_x_.resize(k);
    mu_y_.resize(k);
    rows_.assign(k, {});
    for (std::size_t l = 0; l < k; ++l)
        if (!(is >> mu_x_[l] >> mu_y_[l]))
            throw std::runtime_error("SourceFamily: truncated snapshot");
    if (!(is >> mh_proposals_ >> mh_accepts_))
        throw std::runtime_error("SourceFamily: truncated snapshot");
    for (auto& row : rows_) row.assign(events_ ? events_->size() : 0, 0.0);
}

// ---------------------------------------------------------------------------
// BackgroundFamily

BackgroundFamily::BackgroundFamily(double c_ell, double c_b, int aux_count)
    : c_ell_(c_ell), c_b_(c_b), n_aux_(aux_count) {
    if (aux_count < 1) throw std::invalid_argument("BackgroundFamily: aux_count must be >= 1");
    aux_comps_.resize(static_cast<std::size_t>(aux_count));
    aux_rows_.resize(static_cast<std::size_t>(aux_count));
}

void BackgroundFamily::bind(const EventData& events) {
    events_ = &events;
    fx_.resize(events.size());
    fy_.resize(events.size());
    for (auto& row : aux_rows_) row.resize(events.size());
}

void BackgroundFamily::fill_row(const BackgroundComponent& comp,
                                std::vector<double>& row) const {
    const std::size_t n = events_->size();
    row.resize(n);
    const auto sx = kernels::make_spline4(comp.ell.k.data());
    const auto sy = kernels::make_spline4(comp.b.k.data());
    kernels::spline4_batch(sx, events_->x.data(), n, fx_.data());
    kernels::spline4_batch(sy, events_->y.data(), n, fy_.data());
    kernels::product_column(fx_.data(), fy_.data(), n, row.data());
}

double BackgroundFamily::cluster_log_density(std::size_t l, std::size_t event) const {
    const double v = bivariate_kernel(events_->x[event], events_->y[event], comps_[l]);
    return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
}

double BackgroundFamily::aux_log_density(int h, std::size_t event) const {
    const double v = bivariate_kernel(events_->x[event], events_->y[event],
                                      aux_comps_[static_cast<std::size_t>(h)]);
    return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
}

void BackgroundFamily::begin_sweep(Rng& rng) {
    for (std::size_t h = 0; h < aux_comps_.size(); ++h) {
        aux_comps_[h] = sample_component_prior(events_->bounds, c_ell_, c_b_, rng);
        fill_row(aux_comps_[h], aux_rows_[h]);
    }
    for (std::size_t l = 0; l < comps_.size(); ++l) fill_row(comps_[l], rows_[l]);
}

std::size_t BackgroundFamily::birth_from_aux(int h, std::size_t /*event*/, Rng& rng) {
    // no tractable single-event posterior for the knots: keep the auxiliary
    // value as the new cluster parameter
    const auto hh = static_cast<std::size_t>(h);
    comps_.push_back(aux_comps_[hh]);
    rows_.push_back(aux_rows_[hh]);
    aux_comps_[hh] = sample_component_prior(events_->bounds, c_ell_, c_b_, rng);
    fill_row(aux_comps_[hh], aux_rows_[hh]);
    return comps_.size() - 1;
}

std::size_t BackgroundFamily::birth_initial(std::size_t /*event*/, Rng& rng) {
    // a full-span component covers every interior event; random prior draws
    // generally would not, which breaks an all-in-one initial state
    const MapBounds& b = events_->bounds;
    BackgroundComponent span;
    for (int i = 0; i < 5; ++i) {
        span.ell[i] = b.x_min + b.width() * i / 4.0;
        span.b[i] = b.y_min + b.height() * i / 4.0;
    }
    if (!check_smoothness(span, c_ell_, c_b_))
        span = sample_component_prior(b, c_ell_, c_b_, rng);
    comps_.push_back(span);
    rows_.emplace_back();
    fill_row(span, rows_.back());
    return comps_.size() - 1;
}

void BackgroundFamily::kill_cluster(std::size_t l) {
    comps_[l] = comps_.back();
    rows_[l] = std::move(rows_.back());
    comps_.pop_back();
    rows_.pop_back();
}

void BackgroundFamily::update_parameters(const std::vector<std::vector<std::uint32_t>>& members,
                                         Rng& rng) {
    const MapBounds& b = events_->bounds;
    for (std::size_t l = 0; l < comps_.size(); ++l) {
        const auto& mem = members[l];
        bool redraw = false;

        coord_.clear();
        for (auto i : mem) coord_.push_back(events_->x[i]);
        std::sort(coord_.begin(), coord_.end());
        for (int k = 1; k <= 5 && !redraw; ++k)
            redraw = !sample_knot_full_conditional(k, comps_[l].ell, coord_, b.x_min, b.x_max,
                                                   c_ell_, rng, &stats_);
        if (!redraw) {
            coord_.clear();
            for (auto i : mem) coord_.push_back(events_->y[i]);
            std::sort(coord_.begin(), coord_.end());
            for (int k = 1; k <= 5 && !redraw; ++k)
                redraw = !sample_knot_full_conditional(k, comps_[l].b, coord_, b.y_min, b.y_max,
                                                       c_b_, rng, &stats_);
        }
        if (redraw) {
            // degenerate support: redraw the whole component from the
            // constrained prior and count the event for diagnostics
            comps_[l] = sample_component_prior(b, c_ell_, c_b_, rng);
            ++stats_.prior_resamples;
        }
    }
}

void BackgroundFamily::save_params(std::ostream& os) const {
    os << comps_.size() << "\n";
    for (const auto& c : comps_) {
        for (double v : c.ell.k) os << v << ' ';
        for (double v : c.b.k) os << v << ' ';
        os << "\n";
    }
    os << stats_.prior_resamples << ' ' << stats_.envelope_doublings << "\n";
}

void BackgroundFamily::load_params(std::istream& is) {
    std::size_t k;
    if (!(is >> k)) throw std::runtime_error("BackgroundFamily: truncated snapshot");
    comps_.resize(k);
    rows_.assign(k, {});
    for (auto& c : comps_) {
        for (double& v : c.ell.k)
            if (!(is >> v)) throw std::runtime_error("BackgroundFamily: truncated snapshot");
        for (double& v : c.b.k)
            if (!(is >> v)) throw std::runtime_error("BackgroundFamily: truncated snapshot");
    }
    if (!(is >> stats_.prior_resamples >> stats_.envelope_doublings))
        throw std::runtime_error("BackgroundFamily: truncated snapshot");
    for (auto& row : rows_) row.assign(events_ ? events_->size() : 0, 0.0);
}

// ---------------------------------------------------------------------------
// GridFamily

GridFamily::GridFamily(std::vector<double> atom_weights,
                       std::vector<std::vector<double>> atom_densities, int aux_count)
    : atom_weights_(std::move(atom_weights)),
      atom_densities_(std::move(atom_densities)),
      n_aux_(aux_count) {
    if (atom_weights_.empty() || atom_weights_.size() != atom_densities_.size())
        throw std::invalid_argument("GridFamily: atom table mismatch");
    if (aux_count < 1) throw std::invalid_argument("GridFamily: aux_count must be >= 1");
    aux_atoms_.resize(static_cast<std::size_t>(aux_count));
}

void GridFamily::bind(const EventData& events) {
    for (const auto& row : atom_densities_)
        if (row.size() != events.size())
            throw std::invalid_argument("GridFamily: density table does not match events");
}

std::size_t GridFamily::draw_atom_prior(Rng& rng) const {
    double total = 0.0;
    for (double w : atom_weights_) total += w;
    double u = rng.uniform() * total;
    for (std::size_t a = 0; a + 1 < atom_weights_.size(); ++a) {
        u -= atom_weights_[a];
        if (u < 0.0) return a;
    }
    return atom_weights_.size() - 1;
}

std::size_t GridFamily::draw_atom_posterior(std::size_t event, Rng& rng) const {
    double total = 0.0;
    for (std::size_t a = 0; a < atom_weights_.size(); ++a)
        total += atom_weights_[a] * atom_densities_[a][event];
    if (total <= 0.0) return draw_atom_prior(rng);
    double u = rng.uniform() * total;
    for (std::size_t a = 0; a + 1 < atom_weights_.size(); ++a) {
        u -= atom_weights_[a] * atom_densities_[a][event];
        if (u < 0.0) return a;
    }
    return atom_weights_.size() - 1;
}

double GridFamily::cluster_log_density(std::size_t l, std::size_t event) const {
    const double v = cluster_density(l, event);
    return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
}

double GridFamily::aux_log_density(int h, std::size_t event) const {
    const double v = aux_density(h, event);
    return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
}

void GridFamily::begin_sweep(Rng& rng) {
    for (auto& a : aux_atoms_) a = draw_atom_prior(rng);
}

std::size_t GridFamily::birth_from_aux(int h, std::size_t event, Rng& rng) {
    (void)aux_atoms_[static_cast<std::size_t>(h)];
    atoms_.push_back(draw_atom_posterior(event, rng));
    aux_atoms_[static_cast<std::size_t>(h)] = draw_atom_prior(rng);
    return atoms_.size() - 1;
}

void GridFamily::kill_cluster(std::size_t l) {
    atoms_[l] = atoms_.back();
    atoms_.pop_back();
}

void GridFamily::update_parameters(const std::vector<std::vector<std::uint32_t>>& members,
                                   Rng& rng) {
    for (std::size_t l = 0; l < atoms_.size(); ++l) {
        std::vector<double> w(atom_weights_.size());
        double total = 0.0;
        for (std::size_t a = 0; a < w.size(); ++a) {
            double lw = std::log(atom_weights_[a]);
            for (auto i : members[l]) {
                const double d = atom_densities_[a][i];
                lw += d > 0.0 ? std::log(d) : -std::numeric_limits<double>::infinity();
            }
            w[a] = lw;
        }
        const double m = *std::max_element(w.begin(), w.end());
        if (!std::isfinite(m)) continue;  // all atoms excluded; keep the current one
        for (auto& v : w) total += (v = std::exp(v - m));
        double u = rng.uniform() * total;
        std::size_t pick = w.size() - 1;
        for (std::size_t a = 0; a + 1 < w.size(); ++a) {
            u -= w[a];
            if (u < 0.0) {
                pick = a;
                break;
            }
        }
        atoms_[l] = pick;
    }
}

void GridFamily::save_params(std::ostream& os) const {
    os << atoms_.size() << "\n";
    for (auto a : atoms_) os << a << ' ';
    os << "\n";
}

void GridFamily::load_params(std::istream& is) {
    std::size_t k;
    if (!(is >> k)) throw std::runtime_error("GridFamily: truncated snapshot");
    atoms_.resize(k);
    for (auto& a : atoms_)
        if (!(is >> a)) throw std::runtime_error("GridFamily: truncated snapshot");
}

}  // namespace pmx
