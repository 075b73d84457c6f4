#include "descatter/config.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include "descatter/descatter.hpp"
#include "descatter/errors.hpp"
#include "descatter/rng.hpp"

namespace descatter {

using nlohmann::json;

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    RunConfig cfg;
    cfg.apply_json(j);
    return cfg;
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& slot) {
    if (j.contains(key)) {
        try {
            slot = j.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("config key '") + key + "' has the wrong type");
        }
    }
}

}  // namespace

void RunConfig::apply_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    static const char* known[] = {
        "grid_size", "pixel_pitch", "roi_radius", "source_distance_cm", "detector_distance_cm",
        "count", "train_count", "test_count", "seed_dataset", "seed_oracle", "seed_noise",
        "palette", "r_min", "r_max", "shells", "spectrum", "attenuation", "oracle_params",
        "model", "mode", "neighbors", "iters", "cg_iters", "lbfgs_iters", "regions",
        "early_stop_nmse", "nn_mask", "nn_on_total", "lut_size", "rho_max_factor",
        "nuisance_levels", "noise_sigmas", "scale_factors", "perturb_deltas", "scale_phantom",
        "sweep_neighbors", "dataset_dir", "output_dir", "threads"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("unknown config key '" + key + "'");
    }
    take(j, "grid_size", grid_size);
    take(j, "pixel_pitch", pixel_pitch);
    take(j, "roi_radius", roi_radius);
    take(j, "source_distance_cm", source_distance_cm);
    take(j, "detector_distance_cm", detector_distance_cm);
    take(j, "count", count);
    take(j, "train_count", train_count);
    take(j, "test_count", test_count);
    take(j, "seed_dataset", seed_dataset);
    take(j, "seed_oracle", seed_oracle);
    take(j, "seed_noise", seed_noise);
    take(j, "palette", palette);
    take(j, "r_min", r_min);
    take(j, "r_max", r_max);
    take(j, "shells", shells);
    take(j, "spectrum", spectrum);
    take(j, "attenuation", attenuation);
    take(j, "oracle_params", oracle_params);
    take(j, "model", model);
    take(j, "mode", mode);
    take(j, "neighbors", neighbors);
    take(j, "iters", iters);
    take(j, "cg_iters", cg_iters);
    take(j, "lbfgs_iters", lbfgs_iters);
    take(j, "regions", regions);
    take(j, "early_stop_nmse", early_stop_nmse);
    take(j, "nn_mask", nn_mask);
    take(j, "nn_on_total", nn_on_total);
    take(j, "lut_size", lut_size);
    take(j, "rho_max_factor", rho_max_factor);
    take(j, "nuisance_levels", nuisance_levels);
    take(j, "noise_sigmas", noise_sigmas);
    take(j, "scale_factors", scale_factors);
    take(j, "perturb_deltas", perturb_deltas);
    take(j, "scale_phantom", scale_phantom);
    take(j, "sweep_neighbors", sweep_neighbors);
    take(j, "dataset_dir", dataset_dir);
    take(j, "output_dir", output_dir);
    take(j, "threads", threads);
}

json RunConfig::to_json() const {
    json j;
    j["grid_size"] = grid_size;
    j["pixel_pitch"] = pixel_pitch;
    j["roi_radius"] = roi_radius;
    j["source_distance_cm"] = source_distance_cm;
    j["detector_distance_cm"] = detector_distance_cm;
    j["count"] = count;
    j["train_count"] = train_count;
    j["test_count"] = test_count;
    j["seed_dataset"] = seed_dataset;
    j["seed_oracle"] = seed_oracle;
    j["seed_noise"] = seed_noise;
    j["palette"] = palette;
    j["r_min"] = r_min;
    j["r_max"] = r_max;
    j["shells"] = shells;
    j["spectrum"] = spectrum;
    j["attenuation"] = attenuation;
    j["oracle_params"] = oracle_params;
    j["model"] = model;
    j["mode"] = mode;
    j["neighbors"] = neighbors;
    j["iters"] = iters;
    j["cg_iters"] = cg_iters;
    j["lbfgs_iters"] = lbfgs_iters;
    j["regions"] = regions;
    j["early_stop_nmse"] = early_stop_nmse;
    j["nn_mask"] = nn_mask;
    j["nn_on_total"] = nn_on_total;
    j["lut_size"] = lut_size;
    j["rho_max_factor"] = rho_max_factor;
    j["nuisance_levels"] = nuisance_levels;
    j["noise_sigmas"] = noise_sigmas;
    j["scale_factors"] = scale_factors;
    j["perturb_deltas"] = perturb_deltas;
    j["scale_phantom"] = scale_phantom;
    j["sweep_neighbors"] = sweep_neighbors;
    j["dataset_dir"] = dataset_dir;
    j["output_dir"] = output_dir;
    j["threads"] = threads;
    return j;
}

uint64_t RunConfig::hash() const {
    const std::string s = to_json().dump();
    return fnv1a64(s.data(), s.size());
}

void RunConfig::validate() const {
    if (grid_size < 5 || grid_size % 4 != 1)
        throw ConfigError("grid_size must be 4k+1 and at least 5");
    if (pixel_pitch < 0.0) throw ConfigError("pixel_pitch must be nonnegative");
    if (!(roi_radius > 0.0)) throw ConfigError("roi_radius must be positive");
    if (count < 1) throw ConfigError("count must be positive");
    if (train_count < 1 || test_count < 0 || train_count + test_count > count)
        throw ConfigError("train/test split does not fit the dataset count");
    if (palette.empty()) throw ConfigError("palette must not be empty");
    for (double d : palette)
        if (!(d > 0.0)) throw ConfigError("palette densities must be positive");
    if (!(r_min > 0.0) || !(r_max >= r_min)) throw ConfigError("invalid inner radius range");
    if (shells < 1) throw ConfigError("shells must be positive");
    if (neighbors < 1) throw ConfigError("neighbors must be positive");
    if (iters < 1) throw ConfigError("iters must be positive");
    if (cg_iters < 1) throw ConfigError("cg_iters must be positive");
    if (lbfgs_iters < 0) throw ConfigError("lbfgs_iters must be nonnegative");
    if (regions < 1) throw ConfigError("regions must be positive");
    if (lut_size < 2) throw ConfigError("lut_size must be at least 2");
    if (!(rho_max_factor > 0.0)) throw ConfigError("rho_max_factor must be positive");
    if (nuisance_levels < 2) throw ConfigError("nuisance_levels must be at least 2");
    if (threads < 0) throw ConfigError("threads must be nonnegative");
    for (int g : sweep_neighbors)
        if (g < 1) throw ConfigError("sweep_neighbors entries must be positive");
    mono_mode();  // parses the spectrum string
    model_class_from_string(model);
    fit_mode_from_string(mode);
}

Geometry RunConfig::geometry() const {
    Geometry g;
    g.grid_size = grid_size;
    g.pixel_pitch = pitch();
    g.roi_radius = roi_radius;
    g.source_distance_cm = source_distance_cm;
    g.detector_distance_cm = detector_distance_cm;
    g.validate();
    return g;
}

bool RunConfig::mono_mode() const {
    if (spectrum.rfind("mono:", 0) == 0) {
        mono_xi();
        return true;
    }
    return false;
}

double RunConfig::mono_xi() const {
    if (spectrum.rfind("mono:", 0) != 0)
        throw ConfigError("spectrum '" + spectrum + "' is not monoenergetic");
    const std::string v = spectrum.substr(5);
    try {
        size_t pos = 0;
        const double xi = std::stod(v, &pos);
        if (pos != v.size() || !(xi > 0.0)) throw std::invalid_argument(v);
        return xi;
    } catch (const std::exception&) {
        throw ConfigError("bad mono spectrum '" + spectrum + "', expected mono:<xi>");
    }
}

int effective_threads(const RunConfig& cfg) {
    if (cfg.threads > 0) return cfg.threads;
    if (const char* env = std::getenv("DESCATTER_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (const std::exception&) {
            throw ConfigError("DESCATTER_THREADS is not a positive integer");
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace descatter
