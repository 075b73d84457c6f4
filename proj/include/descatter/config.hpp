#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "descatter/phantom.hpp"

namespace descatter {

// One flat bag of knobs shared by every CLI verb. Flags override config file
// values which override these defaults.
struct RunConfig {
    // geometry
    int grid_size = 65;
    double pixel_pitch = 0.0;  // 0 -> 12/(grid_size-1)
    double roi_radius = 5.0;
    double source_distance_cm = 133.0;
    double detector_distance_cm = 525.0;

    // dataset
    int count = 99;
    int train_count = 89;
    int test_count = 10;
    uint64_t seed_dataset = 1;
    uint64_t seed_oracle = 7;
    uint64_t seed_noise = 99;
    std::vector<double> palette = {0.5, 1.0, 1.5, 2.0, 2.5};
    double r_min = 0.25, r_max = 2.5;
    int shells = 5;

    // physics
    std::string spectrum = "mono:0.05";  // "mono:<xi>", "builtin", or CSV path
    std::string attenuation = "builtin"; // "builtin" or CSV path
    std::string oracle_params;           // optional JSON path, else defaults

    // fitting / descattering
    std::string model = "convolutional";
    std::string mode = "local";
    int neighbors = 3;
    int iters = 10;
    int cg_iters = 40;
    int lbfgs_iters = 20;
    int regions = 3;
    double early_stop_nmse = 0.0;
    bool nn_mask = true;
    bool nn_on_total = false;

    // reconstruction
    int lut_size = 4096;
    double rho_max_factor = 1.25;
    int nuisance_levels = 64;

    // experiments
    std::vector<double> noise_sigmas = {0.002, 0.005, 0.01, 0.02, 0.05};
    std::vector<double> scale_factors = {1.0, 1.5, 2.0};
    std::vector<double> perturb_deltas = {-2.0, -1.0, 1.0, 2.0};
    int scale_phantom = -1;  // -1 -> first test phantom
    std::vector<int> sweep_neighbors = {1, 2, 3, 4, 5};

    // io / execution
    std::string dataset_dir;
    std::string output_dir = "out";
    int threads = 0;  // 0 -> DESCATTER_THREADS or hardware

    static RunConfig from_file(const std::filesystem::path& path);
    void apply_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    uint64_t hash() const;
    void validate() const;

    double pitch() const { return pixel_pitch > 0 ? pixel_pitch : 12.0 / (grid_size - 1); }
    Geometry geometry() const;
    bool mono_mode() const;
    double mono_xi() const;
};

// effective worker count: cfg, then DESCATTER_THREADS, then hardware
int effective_threads(const RunConfig& cfg);

}  // namespace descatter
