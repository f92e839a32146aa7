#include "pmx/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pmx {

std::string to_string(ModelKind m) { return m == ModelKind::spatial ? "spatial" : "joint"; }

ModelKind model_from_string(const std::string& s) {
    if (s == "spatial") return ModelKind::spatial;
    if (s == "joint") return ModelKind::joint;
    throw std::invalid_argument("model must be 'spatial' or 'joint', got '" + s + "'");
}

void RunConfig::validate() const {
    bounds.validate();
    hyper.validate();
    if (iterations < 0) throw std::invalid_argument("config: iterations must be >= 0");
    if (chains < 1) throw std::invalid_argument("config: chains must be >= 1");
    if (thin < 1) throw std::invalid_argument("config: thin must be >= 1");
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
        throw std::invalid_argument("config: burn_in_fraction must be in [0, 1)");
    if (!(pixel_size > 0.0)) throw std::invalid_argument("config: pixel_size must be > 0");
    if (!(p_star > 0.0 && p_star <= 1.0))
        throw std::invalid_argument("config: p_star must be in (0, 1]");
    if (d_r < 1 || d_r % 2 == 0) throw std::invalid_argument("config: d_r must be odd and >= 1");
    if (psf_table.empty()) {
        if (!(psf_sigma_ref > 0.0 && psf_e_ref > 0.0 && psf_sigma_floor >= 0.0))
            throw std::invalid_argument("config: bad analytic PSF parameters");
    }
}

namespace {

std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (strip(v.substr(pos)) != "") throw std::invalid_argument("junk");
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad numeric value '" + v + "' for key '" + key +
                                    "'");
    }
}

int to_int(const std::string& key, const std::string& v) {
    const double x = to_double(key, v);
    const int i = static_cast<int>(x);
    if (static_cast<double>(i) != x)
        throw std::invalid_argument("config: key '" + key + "' wants an integer, got '" + v +
                                    "'");
    return i;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw std::invalid_argument("config: bad boolean '" + v + "' for key '" + key + "'");
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "model") cfg.model = model_from_string(value);
    else if (key == "iterations") cfg.iterations = to_int(key, value);
    else if (key == "burn_in_fraction") cfg.burn_in_fraction = to_double(key, value);
    else if (key == "chains") cfg.chains = to_int(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_double(key, value));
    else if (key == "thin") cfg.thin = to_int(key, value);
    else if (key == "record_background") cfg.record_background = to_bool(key, value);
    else if (key == "random_scan") cfg.random_scan = to_bool(key, value);
    else if (key == "lambda") cfg.hyper.lambda = to_double(key, value);
    else if (key == "alpha_s") cfg.hyper.alpha_s = to_double(key, value);
    else if (key == "alpha_b") cfg.hyper.alpha_b = to_double(key, value);
    else if (key == "a_eta_s") cfg.hyper.a_eta_s = to_double(key, value);
    else if (key == "b_eta_s") cfg.hyper.b_eta_s = to_double(key, value);
    else if (key == "a_eta_b") cfg.hyper.a_eta_b = to_double(key, value);
    else if (key == "b_eta_b") cfg.hyper.b_eta_b = to_double(key, value);
    else if (key == "c_ell") cfg.hyper.c_ell = to_double(key, value);
    else if (key == "c_b") cfg.hyper.c_b = to_double(key, value);
    else if (key == "h_s") cfg.hyper.h_s = to_int(key, value);
    else if (key == "h_b") cfg.hyper.h_b = to_int(key, value);
    else if (key == "prop_sd2") cfg.hyper.prop_sd2 = to_double(key, value);
    else if (key == "x_min") cfg.bounds.x_min = to_double(key, value);
    else if (key == "x_max") cfg.bounds.x_max = to_double(key, value);
    else if (key == "y_min") cfg.bounds.y_min = to_double(key, value);
    else if (key == "y_max") cfg.bounds.y_max = to_double(key, value);
    else if (key == "e_min") cfg.bounds.e_min = to_double(key, value);
    else if (key == "e_max") cfg.bounds.e_max = to_double(key, value);
    else if (key == "psf_sigma_ref") cfg.psf_sigma_ref = to_double(key, value);
    else if (key == "psf_e_ref") cfg.psf_e_ref = to_double(key, value);
    else if (key == "psf_index") cfg.psf_index = to_double(key, value);
    else if (key == "psf_sigma_floor") cfg.psf_sigma_floor = to_double(key, value);
    else if (key == "psf_table") cfg.psf_table = value;
    else if (key == "pixel_size") cfg.pixel_size = to_double(key, value);
    else if (key == "p_star") cfg.p_star = to_double(key, value);
    else if (key == "d_r") cfg.d_r = to_int(key, value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = strip(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected 'key = value' on line " +
                                        std::to_string(line_no));
        apply_config_entry(cfg, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    return parse_config(in);
}

void write_config_snapshot(std::ostream& out, const RunConfig& cfg) {
    char buf[512];
    auto put = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%s = %.17g\n", key, v);
        out << buf;
    };
    out << "model = " << to_string(cfg.model) << "\n";
    out << "iterations = " << cfg.iterations << "\n";
    put("burn_in_fraction", cfg.burn_in_fraction);
    out << "chains = " << cfg.chains << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "thin = " << cfg.thin << "\n";
    out << "record_background = " << (cfg.record_background ? 1 : 0) << "\n";
    out << "random_scan = " << (cfg.random_scan ? 1 : 0) << "\n";
    put("lambda", cfg.hyper.lambda);
    put("alpha_s", cfg.hyper.alpha_s);
    put("alpha_b", cfg.hyper.alpha_b);
    put("a_eta_s", cfg.hyper.a_eta_s);
    put("b_eta_s", cfg.hyper.b_eta_s);
    put("a_eta_b", cfg.hyper.a_eta_b);
    put("b_eta_b", cfg.hyper.b_eta_b);
    put("c_ell", cfg.hyper.c_ell);
    put("c_b", cfg.hyper.c_b);
    out << "h_s = " << cfg.hyper.h_s << "\n";
    out << "h_b = " << cfg.hyper.h_b << "\n";
    put("prop_sd2", cfg.hyper.prop_sd2);
    put("x_min", cfg.bounds.x_min);
    put("x_max", cfg.bounds.x_max);
    put("y_min", cfg.bounds.y_min);
    put("y_max", cfg.bounds.y_max);
    put("e_min", cfg.bounds.e_min);
    put("e_max", cfg.bounds.e_max);
    put("psf_sigma_ref", cfg.psf_sigma_ref);
    put("psf_e_ref", cfg.psf_e_ref);
    put("psf_index", cfg.psf_index);
    put("psf_sigma_floor", cfg.psf_sigma_floor);
    if (!cfg.psf_table.empty()) out << "psf_table = " << cfg.psf_table << "\n";
    put("pixel_size", cfg.pixel_size);
    put("p_star", cfg.p_star);
    out << "d_r = " << cfg.d_r << "\n";
}

void write_config_snapshot(const std::string& path, const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot create config snapshot: " + path);
    write_config_snapshot(out, cfg);
}

}  // namespace pmx
