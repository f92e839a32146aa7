#include <doctest.h>

#include <cmath>
#include <memory>
#include <sstream>

#include "pmx/config.hpp"
#include "pmx/families.hpp"
#include "pmx/oracle.hpp"
#include "pmx/sampler.hpp"
#include "pmx/trace_io.hpp"

using namespace pmx;

namespace {

MapBounds small_map() {
    MapBounds b;
    b.x_min = 0.0;
    b.x_max = 1.0;
    b.y_min = 0.0;
    b.y_max = 1.0;
    b.e_min = 1.0;
    b.e_max = 100.0;
    return b;
}

std::vector<PhotonEvent> dummy_events(std::size_t n) {
    std::vector<PhotonEvent> ev;
    for (std::size_t i = 0; i < n; ++i)
        ev.push_back({0.1 + 0.8 * static_cast<double>(i) / static_cast<double>(n),
                      0.5, 2.0});
    return ev;
}

/// Flat single-atom kernel: density `value` for every event.
std::unique_ptr<GridFamily> flat_family(std::size_t n_events, double value, int aux) {
    return std::make_unique<GridFamily>(std::vector<double>{1.0},
                                        std::vector<std::vector<double>>{
                                            std::vector<double>(n_events, value)},
                                        aux);
}

oracle::Partition canonical_partition(const MixtureEngine& eng, std::size_t level) {
    std::vector<int> relabel(eng.family(level).cluster_count(), -1);
    oracle::Partition part;
    int next = 0;
    for (std::size_t i = 0; i < eng.n_events(); ++i) {
        if (eng.level_of(i) != level) continue;
        auto& slot = relabel[eng.cluster_of(i)];
        if (slot < 0) slot = next++;
        part.push_back(static_cast<std::uint8_t>(slot));
    }
    return part;
}

oracle::MicroState state_key(const MixtureEngine& eng) {
    oracle::MicroState st;
    for (std::size_t i = 0; i < eng.n_events(); ++i)
        if (eng.level_of(i) == 1) st.z_mask |= 1u << i;
    st.part0 = canonical_partition(eng, 0);
    st.part1 = canonical_partition(eng, 1);
    return st;
}

}  // namespace

TEST_CASE("level-1 weights follow (n_j + lambda) for flat kernels") {
    const auto events = dummy_events(10);
    const EventData data(events, small_map());
    std::vector<std::unique_ptr<ComponentFamily>> fams;
    fams.push_back(flat_family(10, 1.0, 5));
    fams.push_back(flat_family(10, 1.0, 5));
    auto* f0 = static_cast<GridFamily*>(fams[0].get());
    auto* f1 = static_cast<GridFamily*>(fams[1].get());
    MixtureEngine eng(data, std::move(fams), {2.0, 1.5}, 1.0);

    f0->set_clusters({0});
    f1->set_clusters({0});
    // five events on each side, one cluster per side
    std::vector<std::uint8_t> z{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    std::vector<std::uint32_t> h(10, 0);
    eng.set_labels(z, h);
    Rng rng(99);
    eng.prepare_sweep(rng);

    // event 0 is on side 0, so n_0^{-i} = 4 and n_1^{-i} = 5
    const auto p = eng.level1_probabilities(0);
    CHECK(p[0] == doctest::Approx(5.0 / 11.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(6.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("zero kernel density on one side forces the other") {
    const auto events = dummy_events(6);
    const EventData data(events, small_map());
    std::vector<std::unique_ptr<ComponentFamily>> fams;
    fams.push_back(flat_family(6, 1.0, 3));
    // background kernel with no support at any event
    fams.push_back(flat_family(6, 0.0, 3));
    auto* f0 = static_cast<GridFamily*>(fams[0].get());
    auto* f1 = static_cast<GridFamily*>(fams[1].get());
    MixtureEngine eng(data, std::move(fams), {1.0, 1.0}, 1.0);
    f0->set_clusters({0});
    f1->set_clusters({0});
    eng.set_labels({0, 0, 0, 1, 1, 1}, {0, 0, 0, 0, 0, 0});
    Rng rng(5);
    eng.prepare_sweep(rng);
    const auto p = eng.level1_probabilities(2);
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(0.0));
}

TEST_CASE("alpha -> 0 keeps everything in the one existing cluster") {
    const auto events = dummy_events(8);
    const EventData data(events, small_map());
    std::vector<std::unique_ptr<ComponentFamily>> fams;
    fams.push_back(flat_family(8, 1.0, 5));
    MixtureEngine eng(data, std::move(fams), {1e-300}, 1.0);
    Rng rng(17);
    eng.init_all_in_level(0, rng);
    for (int it = 0; it < 50; ++it) {
        eng.sweep(rng);
        CHECK(eng.family(0).cluster_count() == 1);
        eng.check_invariants();
    }
}

TEST_CASE("a single event always sits in exactly one cluster") {
    const auto events = dummy_events(1);
    const EventData data(events, small_map());
    std::vector<std::unique_ptr<ComponentFamily>> fams;
    fams.push_back(flat_family(1, 1.0, 4));
    MixtureEngine eng(data, std::move(fams), {3.0}, 1.0);
    Rng rng(18);
    eng.init_all_in_level(0, rng);
    for (int it = 0; it < 200; ++it) {
        eng.sweep(rng);
        CHECK(eng.family(0).cluster_count() == 1);
        CHECK(eng.occupancy(0)[0] == 1);
    }
}

TEST_CASE("spatial chain: invariants hold after every sweep") {
    Rng data_rng(31);
    std::vector<PhotonEvent> events;
    const MapBounds b = small_map();
    for (int i = 0; i < 120; ++i)
        events.push_back({data_rng.uniform(0.0, 1.0), data_rng.uniform(0.0, 1.0),
                          1.0 + data_rng.uniform(0.0, 5.0)});
    const EventData data(events, b);

    const GaussianPsf psf(0.1, 1.0, 0.5, 0.02);
    std::vector<std::unique_ptr<ComponentFamily>> fams;
    fams.push_back(std::make_unique<SourceFamily>(psf, 0.001, 5));
    fams.push_back(std::make_unique<BackgroundFamily>(0.05, 0.05, 5));
    MixtureEngine eng(data, std::move(fams), {2.0, 1.5}, 1.0);
    Rng rng(32);
    eng.init_all_in_level(1, rng);
    for (int it = 0; it < 40; ++it) {
        eng.sweep(rng);
        eng.check_invariants();
    }
    // background knots stay ascending through the sweeps
    const auto& bg = static_cast<const BackgroundFamily&>(eng.family(1));
    for (const auto& comp : bg.components()) {
        CHECK(comp.ell.ascending());
        CHECK(comp.b.ascending());
    }
}

TEST_CASE("identical seeds give identical traces, different chains differ") {
    Rng data_rng(77);
    std::vector<PhotonEvent> events;
    for (int i = 0; i < 60; ++i)
        events.push_back({data_rng.uniform(0.0, 1.0), data_rng.uniform(0.0, 1.0), 2.0});

    RunConfig cfg;
    cfg.bounds = small_map();
    cfg.iterations = 25;
    cfg.chains = 1;
    cfg.seed = 123;
    cfg.hyper.c_ell = 0.05;
    cfg.hyper.c_b = 0.05;
    cfg.psf_sigma_ref = 0.1;
    const auto psf = make_psf(cfg);

    const auto t1 = run_chain(events, cfg, *psf, 0);
    const auto t2 = run_chain(events, cfg, *psf, 0);
    const auto t3 = run_chain(events, cfg, *psf, 1);

    std::stringstream s1, s2, s3;
    write_trace_header(s1, t1);
    write_trace_records(s1, t1);
    write_trace_header(s2, t2);
    write_trace_records(s2, t2);
    write_trace_header(s3, t3);
    write_trace_records(s3, t3);
    CHECK(s1.str() == s2.str());
    CHECK(s1.str() != s3.str());
}

TEST_CASE("zero iterations give an empty trace") {
    RunConfig cfg;
    cfg.bounds = small_map();
    cfg.iterations = 0;
    cfg.hyper.c_ell = 0.05;
    cfg.hyper.c_b = 0.05;
    const auto psf = make_psf(cfg);
    const auto trace = run_chain(dummy_events(10), cfg, *psf, 0);
    CHECK(trace.iterations.empty());
}

TEST_CASE("snapshot restore continues bit-identically") {
    Rng data_rng(55);
    std::vector<PhotonEvent> events;
    for (int i = 0; i < 50; ++i)
        events.push_back({data_rng.uniform(0.0, 1.0), data_rng.uniform(0.0, 1.0),
                          1.0 + data_rng.uniform(0.0, 3.0)});

    RunConfig cfg;
    cfg.bounds = small_map();
    cfg.iterations = 30;
    cfg.seed = 9;
    cfg.model = ModelKind::joint;
    cfg.hyper.c_ell = 0.05;
    cfg.hyper.c_b = 0.05;
    cfg.psf_sigma_ref = 0.1;
    const auto psf = make_psf(cfg);
    const EventData data(events, cfg.bounds);

    ChainRunner straight(data, cfg, *psf, 0);
    straight.run(30);

    ChainRunner part1(data, cfg, *psf, 0);
    part1.run(17);
    std::stringstream snap;
    part1.save(snap);

    ChainRunner part2(data, cfg, *psf, 0);
    part2.restore(snap);
    CHECK(part2.completed() == 17);
    part2.run(13);

    // records 18..30 of the resumed runner must match the straight run
    const auto& full = straight.trace().iterations;
    const auto& tail = part2.trace().iterations;
    REQUIRE(tail.size() == 13);
    REQUIRE(full.size() == 30);
    for (std::size_t i = 0; i < tail.size(); ++i) {
        const auto& a = full[17 + i];
        const auto& bb = tail[i];
        CHECK(a.iter == bb.iter);
        CHECK(a.n_src == bb.n_src);
        CHECK(a.eta_s == bb.eta_s);
        CHECK(a.eta_b == bb.eta_b);
        REQUIRE(a.sources.size() == bb.sources.size());
        for (std::size_t l = 0; l < a.sources.size(); ++l) {
            CHECK(a.sources[l].x == bb.sources[l].x);
            CHECK(a.sources[l].y == bb.sources[l].y);
            CHECK(a.sources[l].count == bb.sources[l].count);
        }
    }
}

TEST_CASE("scaling energies and e_min together leaves assignments unchanged") {
    Rng data_rng(66);
    std::vector<PhotonEvent> events, scaled;
    const double c = 7.5;
    for (int i = 0; i < 40; ++i) {
        const PhotonEvent ev{data_rng.uniform(0.0, 1.0), data_rng.uniform(0.0, 1.0),
                             1.0 + data_rng.uniform(0.0, 20.0)};
        events.push_back(ev);
        scaled.push_back({ev.x, ev.y, ev.energy * c});
    }
    MapBounds b1 = small_map();
    MapBounds b2 = b1;
    b2.e_min = b1.e_min * c;
    b2.e_max = b1.e_max * c;

    // energy-independent PSF so only the Pareto factors see the energies
    const GaussianPsf psf(0.1, 1.0, 0.0, 0.0);

    auto build = [&](const std::vector<PhotonEvent>& ev, const MapBounds& bounds,
                     EventData& storage) {
        storage = EventData(ev, bounds);
        std::vector<std::unique_ptr<ComponentFamily>> fams;
        fams.push_back(std::make_unique<SourceFamily>(psf, 0.001, 5));
        fams.push_back(std::make_unique<BackgroundFamily>(0.05, 0.05, 5));
        auto eng = std::make_unique<MixtureEngine>(storage, std::move(fams),
                                                   std::vector<double>{2.0, 1.5}, 1.0);
        Rng r(404);
        eng->enable_spectral({{3.196, 2.196}, {1.79, 0.714}}, bounds.e_min, r);
        eng->init_all_in_level(1, r);
        eng->sweep(r);
        return eng;
    };
    EventData d1, d2;
    const auto e1 = build(events, b1, d1);
    const auto e2 = build(scaled, b2, d2);
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto p1 = e1->level1_probabilities(i);
        const auto p2 = e2->level1_probabilities(i);
        CHECK(p1[0] == doctest::Approx(p2[0]).epsilon(1e-9));
    }
}

TEST_CASE("spectral response hook rescales the energies it feeds the kernels") {
    const auto events = dummy_events(6);
    const EventData data(events, small_map());
    auto build = [&](std::function<double(double)> response) {
        std::vector<std::unique_ptr<ComponentFamily>> fams;
        fams.push_back(flat_family(6, 1.0, 3));
        fams.push_back(flat_family(6, 1.0, 3));
        auto eng = std::make_unique<MixtureEngine>(data, std::move(fams),
                                                   std::vector<double>{1.0, 1.0}, 1.0);
        Rng rng(777);
        eng->enable_spectral({{3.0, 2.0}, {1.5, 1.0}}, 1.0, rng, std::move(response));
        eng->init_all_in_level(0, rng);
        Rng rng2(778);
        eng->prepare_sweep(rng2);
        return eng;
    };
    // identity hook equals the default
    const auto eng_default = build({});
    const auto eng_identity = build([](double e) { return e; });
    for (std::size_t i = 0; i < 6; ++i) {
        const auto a = eng_default->level1_probabilities(i);
        const auto b = eng_identity->level1_probabilities(i);
        CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-14));
    }
    // a non-trivial transform changes the factors
    const auto eng_scaled = build([](double e) { return 1.0 + 2.0 * (e - 1.0); });
    bool any_different = false;
    for (std::size_t i = 0; i < 6; ++i) {
        const auto a = eng_default->level1_probabilities(i);
        const auto b = eng_scaled->level1_probabilities(i);
        if (std::fabs(a[0] - b[0]) > 1e-12) any_different = true;
    }
    CHECK(any_different);
}

TEST_CASE("recovered weights: symmetry, sticks and limits") {
    Rng rng(101);

    SUBCASE("equal halves put the level weight at one half on average") {
        double mean = 0.0;
        const int reps = 20000;
        for (int i = 0; i < reps; ++i) {
            const std::uint64_t counts[] = {50};
            mean += recover_weights(counts, 50, 100, 1.0, 2.0, rng).delta;
        }
        mean /= reps;
        CHECK(std::fabs(mean - 0.5) < 2e-3);
    }

    SUBCASE("single cluster with alpha -> 0 takes all the stick") {
        const std::uint64_t counts[] = {40};
        const auto rec = recover_weights(counts, 40, 80, 1.0, 1e-12, rng);
        CHECK(rec.weights[0] > 0.999);
        CHECK(rec.tail < 1e-3);
    }

    SUBCASE("weights plus tail form a distribution") {
        for (int rep = 0; rep < 200; ++rep) {
            std::vector<std::uint64_t> counts;
            std::uint64_t total = 0;
            const int k = 1 + static_cast<int>(rng.uniform_index(6));
            for (int l = 0; l < k; ++l) {
                counts.push_back(1 + rng.uniform_index(30));
                total += counts.back();
            }
            const auto rec = recover_weights(counts, total, total + 25, 1.0, 1.5, rng);
            double sum = rec.tail;
            CHECK(rec.tail >= 0.0);
            for (double w : rec.weights) {
                CHECK(w >= 0.0);
                sum += w;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("Metropolis: proposals at the current point always accept") {
    Rng data_rng(202);
    std::vector<PhotonEvent> events;
    for (int i = 0; i < 150; ++i)
        events.push_back({0.5 + 0.02 * data_rng.normal(), 0.5 + 0.02 * data_rng.normal(), 2.0});
    const EventData data(events, small_map());
    const GaussianPsf psf(0.02, 1.0, 0.0, 0.0);
    SourceFamily fam(psf, 1e-30, 3);  // essentially zero-step proposals
    fam.bind(data);
    Rng rng(203);
    fam.begin_sweep(rng);
    const auto c = fam.birth_from_aux(0, 0, rng);
    std::vector<std::vector<std::uint32_t>> members(1);
    for (std::uint32_t i = 0; i < events.size(); ++i) members[c].push_back(i);
    for (int it = 0; it < 50; ++it) fam.update_parameters(members, rng);
    CHECK(fam.metropolis_proposals() == 50);
    CHECK(fam.metropolis_accepts() == 50);
}

TEST_CASE("engine state text round-trips through save_state/load_state") {
    const auto events = dummy_events(12);
    const EventData data(events, small_map());
    auto build = [&]() {
        std::vector<std::unique_ptr<ComponentFamily>> fams;
        fams.push_back(flat_family(12, 1.0, 3));
        fams.push_back(flat_family(12, 2.0, 3));
        return std::make_unique<MixtureEngine>(data, std::move(fams),
                                               std::vector<double>{1.0, 1.0}, 1.0);
    };
    auto eng = build();
    Rng rng(303);
    eng->init_all_in_level(0, rng);
    for (int i = 0; i < 10; ++i) eng->sweep(rng);
    std::stringstream snap;
    eng->save_state(snap);

    auto eng2 = build();
    eng2->load_state(snap);
    CHECK(eng2->level_count(0) == eng->level_count(0));
    CHECK(eng2->family(0).cluster_count() == eng->family(0).cluster_count());
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(eng2->level_of(i) == eng->level_of(i));
        CHECK(eng2->cluster_of(i) == eng->cluster_of(i));
    }
}

TEST_CASE("micro-instance sampler matches the enumerated posterior") {
    // quick 4-event version of the exactness check (the acceptance suite runs
    // the full-size one)
    const int n = 4;
    const auto events = dummy_events(n);
    const EventData data(events, small_map());

    oracle::DiscreteKernel k0, k1;
    k0.atom_weights = {0.5, 0.5};
    k0.atom_densities = {{2.0, 0.25, 1.0, 0.5}, {0.25, 2.0, 1.0, 1.5}};
    k1.atom_weights = {0.25, 0.75};
    k1.atom_densities = {{1.0, 1.0, 0.3, 1.8}, {0.4, 1.2, 2.0, 0.2}};
    const double lambda = 1.0, a0 = 1.5, a1 = 0.8;

    const auto exact = oracle::enumerate_exact_posterior(n, k0, k1, lambda, a0, a1);

    std::vector<std::unique_ptr<ComponentFamily>> fams;
    fams.push_back(std::make_unique<GridFamily>(k0.atom_weights, k0.atom_densities, 4));
    fams.push_back(std::make_unique<GridFamily>(k1.atom_weights, k1.atom_densities, 4));
    MixtureEngine eng(data, std::move(fams), {a0, a1}, lambda);
    Rng rng(404);
    eng.init_all_in_level(0, rng);

    std::map<oracle::MicroState, double> emp;
    const int sweeps = 50000;
    for (int s = 0; s < sweeps; ++s) {
        eng.sweep(rng);
        emp[state_key(eng)] += 1.0 / sweeps;
    }
    const double tv = oracle::total_variation(exact, emp);
    CHECK(tv < 0.07);
}
