#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pmx/event_io.hpp"
#include "pmx/psf.hpp"
#include "pmx/rng.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli;  // path to the photonmix binary, from --cli=

struct CmdResult {
    int exit_code = -1;
    std::string output;
};

CmdResult run_cmd(const std::string& args) {
    const auto out_path = fs::temp_directory_path() / "pmx_cli_out.txt";
    const std::string cmd = g_cli + " " + args + " > " + out_path.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    CmdResult result;
    result.exit_code = rc == -1 ? -1 : WEXITSTATUS(rc);
    std::ifstream in(out_path);
    std::stringstream buf;
    buf << in.rdbuf();
    result.output = buf.str();
    return result;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() /
              ("pmx_cli_ws_" + std::to_string(::getpid()) + "_" +
               std::to_string(counter()++));
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

void write_flat_template(const std::string& path, double total, double extent,
                         std::size_t n) {
    pmx::MapBounds b;
    b.x_min = -extent;
    b.x_max = extent;
    b.y_min = -extent;
    b.y_max = extent;
    pmx::RealGrid grid(b, 2.0 * extent / static_cast<double>(n));
    for (auto& v : grid.data) v = total / static_cast<double>(grid.data.size());
    pmx::write_grid(path, grid);
}

void write_small_scenario(const Workspace& ws, const std::string& name,
                          const std::string& template_path) {
    std::ofstream out(ws.path(name));
    out << "x_min = -5\nx_max = 5\ny_min = -5\ny_max = 5\n"
        << "e_min = 1\ne_max = 316.227766\npixel_size = 0.1\nenergy_bins = 12\n"
        << "exposure = 1\nseed = 21\n";
    if (!template_path.empty()) out << "background_template = " << template_path << "\n";
    out << "[[source]]\nx = -1.5\ny = 0.5\nf0 = 0.02\nrho = 2\n";
}

void write_events_csv(const std::string& path, int n, std::uint64_t seed) {
    pmx::Rng rng(seed);
    std::vector<pmx::PhotonEvent> events;
    for (int i = 0; i < n; ++i)
        events.push_back({rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0),
                          1.0 + rng.uniform(0.0, 30.0)});
    pmx::write_event_list(path, events);
}

const char* kSmallFit =
    "iterations = 10\nchains = 1\nseed = 5\nc_ell = 0.5\nc_b = 0.5\n";

}  // namespace

TEST_CASE("simulate writes parseable events and truth labels") {
    Workspace ws;
    write_flat_template(ws.path("flat.grid"), 300.0, 5.0, 100);
    write_small_scenario(ws, "scen.txt", ws.path("flat.grid"));

    const auto r = run_cmd("simulate " + ws.path("scen.txt") + " --out " + ws.path("sim"));
    REQUIRE(r.exit_code == 0);
    pmx::MapBounds b;
    const auto events = pmx::read_event_list(ws.path("sim/events.csv"), b);
    CHECK(events.size() > 100);
    std::ifstream truth(ws.path("sim/truth.csv"));
    std::string header;
    REQUIRE(std::getline(truth, header));
    CHECK(header == "event_index,origin");
    std::size_t rows = 0;
    for (std::string line; std::getline(truth, line);) ++rows;
    CHECK(rows == events.size());
}

TEST_CASE("simulate is reproducible for a fixed seed") {
    Workspace ws;
    write_flat_template(ws.path("flat.grid"), 200.0, 5.0, 100);
    write_small_scenario(ws, "scen.txt", ws.path("flat.grid"));
    REQUIRE(run_cmd("simulate " + ws.path("scen.txt") + " --out " + ws.path("a")).exit_code ==
            0);
    REQUIRE(run_cmd("simulate " + ws.path("scen.txt") + " --out " + ws.path("b")).exit_code ==
            0);
    CHECK(slurp(ws.path("a/events.csv")) == slurp(ws.path("b/events.csv")));
    CHECK(slurp(ws.path("a/truth.csv")) == slurp(ws.path("b/truth.csv")));
}

TEST_CASE("simulate fails clearly on a missing template") {
    Workspace ws;
    write_small_scenario(ws, "scen.txt", ws.path("nonexistent.grid"));
    const auto r = run_cmd("simulate " + ws.path("scen.txt") + " --out " + ws.path("sim"));
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("nonexistent.grid") != std::string::npos);
}

TEST_CASE("fit: a small run completes quickly and writes a trace") {
    Workspace ws;
    write_events_csv(ws.path("events.csv"), 50, 7);
    std::ofstream(ws.path("fit.cfg")) << kSmallFit;

    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_cmd("fit " + ws.path("events.csv") + " --config " + ws.path("fit.cfg") +
                           " --out " + ws.path("run"));
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
    REQUIRE(r.exit_code == 0);
    CHECK(elapsed.count() < 5.0);
    CHECK(fs::exists(ws.path("run/chain_0.trace")));
    CHECK(fs::exists(ws.path("run/config.snapshot")));
}

TEST_CASE("fit rejects unknown config keys by name") {
    Workspace ws;
    write_events_csv(ws.path("events.csv"), 20, 8);
    std::ofstream(ws.path("bad.cfg")) << "iterations = 5\nnot_a_real_key = 1\n";
    const auto r = run_cmd("fit " + ws.path("events.csv") + " --config " + ws.path("bad.cfg") +
                           " --out " + ws.path("run"));
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("not_a_real_key") != std::string::npos);
}

TEST_CASE("fit with the same seed is byte-identical") {
    Workspace ws;
    write_events_csv(ws.path("events.csv"), 60, 9);
    std::ofstream(ws.path("fit.cfg")) << "iterations = 30\nchains = 2\nseed = 77\n"
                                      << "c_ell = 0.5\nc_b = 0.5\n";
    REQUIRE(run_cmd("fit " + ws.path("events.csv") + " --config " + ws.path("fit.cfg") +
                    " --out " + ws.path("r1"))
                .exit_code == 0);
    REQUIRE(run_cmd("fit " + ws.path("events.csv") + " --config " + ws.path("fit.cfg") +
                    " --out " + ws.path("r2"))
                .exit_code == 0);
    CHECK(slurp(ws.path("r1/chain_0.trace")) == slurp(ws.path("r2/chain_0.trace")));
    CHECK(slurp(ws.path("r1/chain_1.trace")) == slurp(ws.path("r2/chain_1.trace")));
}

TEST_CASE("fit --resume continues bit-identically") {
    Workspace ws;
    write_events_csv(ws.path("events.csv"), 40, 10);
    std::ofstream(ws.path("a.cfg")) << "iterations = 40\nchains = 1\nseed = 3\n"
                                    << "c_ell = 0.5\nc_b = 0.5\n";
    std::ofstream(ws.path("b.cfg")) << "iterations = 25\nchains = 1\nseed = 3\n"
                                    << "c_ell = 0.5\nc_b = 0.5\n";
    REQUIRE(run_cmd("fit " + ws.path("events.csv") + " --config " + ws.path("a.cfg") +
                    " --out " + ws.path("full"))
                .exit_code == 0);
    REQUIRE(run_cmd("fit " + ws.path("events.csv") + " --config " + ws.path("b.cfg") +
                    " --out " + ws.path("split"))
                .exit_code == 0);
    REQUIRE(run_cmd("fit " + ws.path("events.csv") + " --config " + ws.path("b.cfg") +
                    " --iterations 15 --resume --out " + ws.path("split"))
                .exit_code == 0);
    CHECK(slurp(ws.path("full/chain_0.trace")) == slurp(ws.path("split/chain_0.trace")));
}

TEST_CASE("postprocess writes one region row per region") {
    Workspace ws;
    // two tight synthetic sources so the fit finds obvious clusters
    pmx::Rng rng(11);
    std::vector<pmx::PhotonEvent> events;
    const pmx::GaussianPsf psf(0.3, 1.0, 0.0, 0.0);
    pmx::MapBounds b;
    for (int s = 0; s < 2; ++s)
        for (int i = 0; i < 150; ++i) {
            double x, y;
            psf.sample(s ? 2.0 : -2.0, s ? 1.0 : -1.5, 2.0, b, rng, x, y);
            events.push_back({x, y, 1.0 + rng.uniform(0.0, 10.0)});
        }
    pmx::write_event_list(ws.path("events.csv"), events);
    std::ofstream(ws.path("fit.cfg")) << "iterations = 300\nchains = 2\nseed = 12\n"
                                      << "psf_sigma_ref = 0.3\npsf_index = 0\n"
                                      << "psf_sigma_floor = 0\n";
    REQUIRE(run_cmd("fit " + ws.path("events.csv") + " --config " + ws.path("fit.cfg") +
                    " --out " + ws.path("run"))
                .exit_code == 0);
    const auto r = run_cmd("postprocess " + ws.path("run") + " --p-star 0.9 --d-r 3");
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(ws.path("run/regions.csv")));
    CHECK(fs::exists(ws.path("run/background.grid")));

    std::size_t rows = 0;
    std::ifstream csv(ws.path("run/regions.csv"));
    std::string line;
    std::getline(csv, line);  // header
    while (std::getline(csv, line)) ++rows;
    std::size_t reported = 0;
    std::stringstream out(r.output);
    while (std::getline(out, line)) reported += line.rfind("region ", 0) == 0;
    CHECK(rows == reported);
    CHECK(rows >= 2);
}

TEST_CASE("postprocess on an empty directory is an explicit error") {
    Workspace ws;
    fs::create_directories(ws.path("empty"));
    const auto r = run_cmd("postprocess " + ws.path("empty"));
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("chain_*.trace") != std::string::npos);
}

TEST_CASE("verify passes clean and fails when a tolerance is corrupted") {
    const auto ok = run_cmd("verify");
    CHECK(ok.exit_code == 0);
    CHECK(ok.output.find("PASS knot-variance-vs-quadrature") != std::string::npos);
    CHECK(ok.output.find("FAIL") == std::string::npos);

    const auto bad = run_cmd("verify --inject-failure");
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("FAIL") != std::string::npos);
}

TEST_CASE("tune-smoothness: template recipe inside the sanity band, seed-stable") {
    Workspace ws;
    write_flat_template(ws.path("flat.grid"), 1000.0, 5.0, 50);
    const std::string args = "tune-smoothness " + ws.path("flat.grid") +
                             " --events 600 --tune-iterations 250 --seed 2";
    const auto r1 = run_cmd(args);
    REQUIRE(r1.exit_code == 0);
    const auto r2 = run_cmd(args);
    CHECK(r1.output == r2.output);

    double c_ell = 0.0, c_b = 0.0;
    std::stringstream out(r1.output);
    std::string line;
    while (std::getline(out, line)) {
        std::sscanf(line.c_str(), "recommended_c_ell = %lf", &c_ell);
        std::sscanf(line.c_str(), "recommended_c_b = %lf", &c_b);
    }
    CHECK(c_ell > 0.5);
    CHECK(c_ell < 3.0);
    CHECK(c_b > 0.5);
    CHECK(c_b < 3.0);
}

TEST_CASE("tune-smoothness --psf returns the containment radius for both floors") {
    const auto r = run_cmd("tune-smoothness --psf");
    REQUIRE(r.exit_code == 0);
    double c_ell = 0.0, c_b = 0.0;
    std::stringstream out(r.output);
    std::string line;
    while (std::getline(out, line)) {
        std::sscanf(line.c_str(), "recommended_c_ell = %lf", &c_ell);
        std::sscanf(line.c_str(), "recommended_c_b = %lf", &c_b);
    }
    const pmx::GaussianPsf psf(0.59, 1.0, 0.8, 0.07);
    const double expected = psf.containment_radius(1.0, 0.68);
    CHECK(c_ell == doctest::Approx(expected).epsilon(1e-4));
    CHECK(c_b == doctest::Approx(expected).epsilon(1e-4));
}

int main(int argc, char** argv) {
    doctest::Context ctx;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg.rfind("--cli=", 0) == 0) g_cli = arg.substr(6);
    }
    if (g_cli.empty()) {
        std::fprintf(stderr, "usage: cli_tests --cli=/path/to/photonmix [doctest args]\n");
        return 1;
    }
    ctx.applyCommandLine(argc, argv);
    return ctx.run();
}
