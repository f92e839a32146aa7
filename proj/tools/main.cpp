#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <vector>

#include "pmx/bspline.hpp"
#include "pmx/config.hpp"
#include "pmx/event_io.hpp"
#include "pmx/postprocess.hpp"
#include "pmx/sampler.hpp"
#include "pmx/simulate.hpp"
#include "pmx/trace_io.hpp"
#include "pmx/verify.hpp"

namespace fs = std::filesystem;
using namespace pmx;

namespace {

struct FitOverrides {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> entries;

    RunConfig build() const {
        RunConfig cfg = config_path.empty() ? RunConfig{} : parse_config_file(config_path);
        for (const auto& [k, v] : entries) apply_config_entry(cfg, k, v);
        cfg.validate();
        return cfg;
    }
};

void add_override_flags(CLI::App* cmd, FitOverrides& ov) {
    cmd->add_option("--config", ov.config_path, "flat key = value config file");
    auto push = [&ov](const std::string& key) {
        return [&ov, key](const std::string& v) { ov.entries.emplace_back(key, v); };
    };
    cmd->add_option_function<std::string>("--seed", push("seed"), "RNG seed");
    cmd->add_option_function<std::string>("--chains", push("chains"), "number of chains");
    cmd->add_option_function<std::string>("--iterations", push("iterations"),
                                          "iterations per chain");
    cmd->add_option_function<std::string>("--burn-in", push("burn_in_fraction"),
                                          "burn-in fraction in [0,1)");
    cmd->add_option_function<std::string>("--model", push("model"), "spatial | joint");
    cmd->add_option_function<std::string>("--pixel-size", push("pixel_size"),
                                          "post-processing pixel size (deg)");
    cmd->add_option_function<std::string>("--p-star", push("p_star"),
                                          "presence-probability target");
    cmd->add_option_function<std::string>("--d-r", push("d_r"), "region window size (odd)");
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                 const FitOverrides& ov, bool have_seed, std::uint64_t seed) {
    SimScenario scenario = parse_scenario_file(scenario_path);
    if (have_seed) scenario.seed = seed;
    const RunConfig cfg = ov.build();
    const auto psf = make_psf(cfg);

    fs::create_directories(out_dir);
    Rng rng(scenario.seed);
    const SimResult result = simulate(scenario, *psf, rng);
    write_event_list((fs::path(out_dir) / "events.csv").string(), result.events);
    write_truth_labels((fs::path(out_dir) / "truth.csv").string(), result.origins);
    std::cout << "simulated " << result.total_counts << " counts";
    if (scenario.thin_to) std::cout << ", thinned to " << result.events.size();
    std::cout << " (seed " << scenario.seed << ")\n";
    return 0;
}

int cmd_fit(const std::string& events_path, const std::string& out_dir, const FitOverrides& ov,
            bool resume) {
    const RunConfig cfg = ov.build();
    const auto psf = make_psf(cfg);
    const auto events = read_event_list(events_path, cfg.bounds);
    if (events.empty()) throw std::runtime_error("fit: event list is empty");

    fs::create_directories(out_dir);
    write_config_snapshot((fs::path(out_dir) / "config.snapshot").string(), cfg);
    const EventData data(events, cfg.bounds);

    struct ChainOutcome {
        Trace trace;
        std::exception_ptr error;
    };
    std::vector<ChainOutcome> outcomes(static_cast<std::size_t>(cfg.chains));
    std::vector<std::thread> workers;
    for (int k = 0; k < cfg.chains; ++k) {
        workers.emplace_back([&, k]() {
            auto& slot = outcomes[static_cast<std::size_t>(k)];
            try {
                const auto trace_path =
                    (fs::path(out_dir) / ("chain_" + std::to_string(k) + ".trace")).string();
                const auto snap_path =
                    (fs::path(out_dir) / ("chain_" + std::to_string(k) + ".snapshot")).string();
                ChainRunner runner(data, cfg, *psf, k);
                if (resume) {
                    std::ifstream snap(snap_path);
                    if (!snap)
                        throw std::runtime_error("fit --resume: missing snapshot " + snap_path);
                    runner.restore(snap);
                }
                runner.run(cfg.iterations);
                if (resume) {
                    append_trace_records(trace_path, runner.trace());
                } else {
                    write_trace(trace_path, runner.trace());
                }
                std::ofstream snap(snap_path);
                runner.save(snap);
                slot.trace = runner.take_trace();
            } catch (...) {
                slot.error = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& o : outcomes)
        if (o.error) std::rethrow_exception(o.error);

    for (const auto& o : outcomes) {
        const auto& d = o.trace.diag;
        std::printf("chain %d: %zu records", o.trace.chain_index, o.trace.iterations.size());
        if (d.mh_proposals > 0)
            std::printf(", mh acceptance %.3f",
                        static_cast<double>(d.mh_accepts) / static_cast<double>(d.mh_proposals));
        if (d.prior_resamples > 0)
            std::printf(", %ld component prior redraws", d.prior_resamples);
        if (d.envelope_doublings > 0)
            std::printf(", %ld envelope doublings", d.envelope_doublings);
        std::printf("\n");
    }
    return 0;
}

std::vector<Trace> load_run_traces(const std::string& run_dir) {
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("chain_", 0) == 0 && name.size() > 6 &&
            name.substr(name.size() - 6) == ".trace")
            paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    std::vector<Trace> traces;
    for (const auto& p : paths) traces.push_back(read_trace(p.string()));
    if (traces.empty())
        throw std::runtime_error("postprocess: no chain_*.trace files in " + run_dir);
    return traces;
}

int cmd_postprocess(const std::string& run_dir, const std::string& out_dir,
                    const FitOverrides& ov_in) {
    FitOverrides ov = ov_in;
    if (ov.config_path.empty()) {
        const auto snap = fs::path(run_dir) / "config.snapshot";
        if (fs::exists(snap)) ov.config_path = snap.string();
    }
    const RunConfig cfg = ov.build();

    const auto traces = load_run_traces(run_dir);
    const DrawSet draws = pool_chains(traces, cfg.burn_in_fraction);
    if (draws.iterations.empty())
        throw std::runtime_error("postprocess: no retained iterations after burn-in");

    const PixelGrid pooled = pool_draws(draws, cfg.bounds, cfg.pixel_size);
    const int k_star = draws.k_star();
    bool shortfall = false;
    std::vector<RegionReport> reports;
    std::vector<Region> regions;
    if (k_star > 0) {
        const auto seeds = find_candidate_regions(pooled, k_star, &shortfall);
        regions = grow_regions(seeds, draws, pooled, cfg.p_star, cfg.d_r);
        Rng rng(cfg.seed, 0x706f7374);  // independent stream for weight recovery
        reports = build_region_reports(draws, pooled, regions, cfg.hyper.lambda,
                                       cfg.hyper.alpha_s, rng);
    }

    const std::string target = out_dir.empty() ? run_dir : out_dir;
    fs::create_directories(target);
    write_region_csv((fs::path(target) / "regions.csv").string(), reports);

    Rng bg_rng(cfg.seed, 0x62676d6170);
    const RealGrid bg = posterior_background_map(draws, cfg.bounds, cfg.pixel_size,
                                                 cfg.hyper.alpha_b, cfg.hyper.c_ell,
                                                 cfg.hyper.c_b, bg_rng);
    write_grid((fs::path(target) / "background.grid").string(), bg);

    std::printf("retained %zu iterations, k* = %d, %zu regions%s\n", draws.size(), k_star,
                regions.size(), shortfall ? " (fewer local maxima than k*)" : "");
    for (const auto& r : reports)
        std::printf("region %d: %zu pixels, presence %.4f\n", r.region.id,
                    r.region.pixels.size(), r.region.presence_prob);
    return 0;
}

int cmd_tune_smoothness(const std::string& template_path, const FitOverrides& ov,
                        bool psf_based, int n_events, int iterations) {
    const RunConfig base = ov.build();
    if (psf_based) {
        const auto psf = make_psf(base);
        const double c = psf->containment_radius(base.bounds.e_min, 0.68);
        std::printf("recommended_c_ell = %.6g\nrecommended_c_b = %.6g\n", c, c);
        return 0;
    }

    const RealGrid tmpl = read_grid(template_path);
    RunConfig cfg = base;
    cfg.bounds.x_min = tmpl.bounds.x_min;
    cfg.bounds.x_max = tmpl.bounds.x_max;
    cfg.bounds.y_min = tmpl.bounds.y_min;
    cfg.bounds.y_max = tmpl.bounds.y_max;

    // draw events from the template treated as a spatial histogram
    Rng rng(cfg.seed, 0x74756e65);
    const double total = tmpl.total();
    if (!(total > 0.0)) throw std::runtime_error("tune-smoothness: template has zero mass");
    std::vector<PhotonEvent> events;
    const double px = (tmpl.bounds.x_max - tmpl.bounds.x_min) / static_cast<double>(tmpl.nx);
    const double py = (tmpl.bounds.y_max - tmpl.bounds.y_min) / static_cast<double>(tmpl.ny);
    for (int i = 0; i < n_events; ++i) {
        double u = rng.uniform() * total;
        std::size_t cell = 0;
        for (; cell + 1 < tmpl.data.size(); ++cell) {
            u -= tmpl.data[cell];
            if (u < 0.0) break;
        }
        const std::size_t iy = cell / tmpl.nx;
        const std::size_t ix = cell % tmpl.nx;
        events.push_back({tmpl.bounds.x_min + (ix + rng.uniform()) * px,
                          tmpl.bounds.y_min + (iy + rng.uniform()) * py, cfg.bounds.e_min});
    }

    // background-only restriction: a single-level engine with the spline
    // family, floors disabled while being tuned
    const EventData data(events, cfg.bounds);
    std::vector<std::unique_ptr<ComponentFamily>> families;
    auto bg = std::make_unique<BackgroundFamily>(1e-9, 1e-9, cfg.hyper.h_b);
    auto* bg_ptr = bg.get();
    families.push_back(std::move(bg));
    MixtureEngine engine(data, std::move(families), {cfg.hyper.alpha_b}, cfg.hyper.lambda);
    engine.init_all_in_level(0, rng);

    std::vector<double> sd_ell, sd_b;
    const int burn = iterations / 2;
    for (int it = 1; it <= iterations; ++it) {
        engine.sweep(rng);
        if (it <= burn) continue;
        for (const auto& comp : bg_ptr->components()) {
            sd_ell.push_back(std::sqrt(comp.ell.variance()));
            sd_b.push_back(std::sqrt(comp.b.variance()));
        }
    }
    if (sd_ell.empty()) throw std::runtime_error("tune-smoothness: no posterior draws");
    auto pct20 = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const auto idx = static_cast<std::size_t>(0.20 * static_cast<double>(v.size() - 1));
        return v[idx];
    };
    std::printf("recommended_c_ell = %.6g\nrecommended_c_b = %.6g\n", pct20(sd_ell),
                pct20(sd_b));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"point-source extraction from high-energy photon event lists"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a ground-truthed synthetic sky");
    std::string scenario_path, sim_out = "run/sim";
    std::uint64_t sim_seed = 0;
    bool sim_have_seed = false;
    FitOverrides sim_ov;
    sim->add_option("scenario", scenario_path, "scenario file")->required();
    sim->add_option("--out", sim_out, "output directory");
    sim->add_option("--seed", sim_seed, "override the scenario seed")
        ->each([&](const std::string&) { sim_have_seed = true; });
    sim->add_option("--config", sim_ov.config_path, "config file (PSF parameters)");

    // fit
    auto* fit = app.add_subcommand("fit", "run MCMC chains on an event list");
    std::string events_path, fit_out = "run/fit";
    bool resume = false;
    FitOverrides fit_ov;
    fit->add_option("events", events_path, "event-list CSV")->required();
    fit->add_option("--out", fit_out, "run directory");
    fit->add_flag("--resume", resume, "continue from per-chain snapshots");
    add_override_flags(fit, fit_ov);

    // postprocess
    auto* post = app.add_subcommand("postprocess", "turn traces into source regions");
    std::string run_dir, post_out;
    FitOverrides post_ov;
    post->add_option("run_dir", run_dir, "directory holding chain_*.trace")->required();
    post->add_option("--out", post_out, "output directory (defaults to run_dir)");
    add_override_flags(post, post_ov);

    // verify
    auto* verify = app.add_subcommand("verify", "run the numeric oracle suite");
    bool inject = false;
    verify->add_flag("--inject-failure", inject, "test hook: corrupt one tolerance")
        ->group("");  // hidden

    // tune-smoothness
    auto* tune = app.add_subcommand("tune-smoothness",
                                    "recommend smoothness floors from a template fit");
    std::string template_path;
    bool tune_psf = false;
    int tune_events = 4000, tune_iters = 2000;
    FitOverrides tune_ov;
    tune->add_option("template", template_path, "background template grid");
    tune->add_flag("--psf", tune_psf, "use the PSF 68% containment radius instead");
    tune->add_option("--events", tune_events, "events to draw from the template");
    tune->add_option("--tune-iterations", tune_iters, "tuning-chain iterations");
    tune->add_option("--config", tune_ov.config_path, "flat key = value config file");
    tune->add_option_function<std::string>(
        "--seed", [&tune_ov](const std::string& v) { tune_ov.entries.emplace_back("seed", v); },
        "RNG seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(scenario_path, sim_out, sim_ov, sim_have_seed,
                                               sim_seed);
        if (fit->parsed()) return cmd_fit(events_path, fit_out, fit_ov, resume);
        if (post->parsed()) return cmd_postprocess(run_dir, post_out, post_ov);
        if (verify->parsed()) {
            VerifyOptions opts;
            opts.inject_failure = inject;
            return run_verification(std::cout, opts) == 0 ? 0 : 1;
        }
        if (tune->parsed()) {
            if (!tune_psf && template_path.empty())
                throw std::runtime_error("tune-smoothness: template grid required without --psf");
            return cmd_tune_smoothness(template_path, tune_ov, tune_psf, tune_events,
                                       tune_iters);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
