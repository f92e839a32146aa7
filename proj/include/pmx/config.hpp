#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "pmx/geometry.hpp"

namespace pmx {

enum class ModelKind { spatial, joint };

std::string to_string(ModelKind m);
ModelKind model_from_string(const std::string& s);

/// Everything a fit/postprocess run needs, read from a flat `key = value`
/// file. Unknown keys are an error (naming the key).
struct RunConfig {
    ModelKind model = ModelKind::spatial;
    int iterations = 10000;
    double burn_in_fraction = 0.75;
    int chains = 4;
    std::uint64_t seed = 1;
    int thin = 1;
    bool record_background = false;
    bool random_scan = false;

    Hyperparameters hyper;
    MapBounds bounds;

    // analytic PSF defaults; psf_table, when set, loads a tabulated model instead
    double psf_sigma_ref = 0.59;
    double psf_e_ref = 1.0;
    double psf_index = 0.8;
    double psf_sigma_floor = 0.07;
    std::string psf_table;

    // post-processing
    double pixel_size = 0.05;
    double p_star = 0.95;
    int d_r = 3;

    void validate() const;
};

RunConfig parse_config(std::istream& in);
RunConfig parse_config_file(const std::string& path);

/// Apply one `key = value` assignment (shared by the parser and CLI overrides).
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

void write_config_snapshot(std::ostream& out, const RunConfig& cfg);
void write_config_snapshot(const std::string& path, const RunConfig& cfg);

}  // namespace pmx
