#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "descatter/grid.hpp"

namespace descatter {

struct Geometry {
    int grid_size = 257;
    double pixel_pitch = 12.0 / 256.0;  // cm; 12 cm field of view by default
    double roi_radius = 5.0;            // cm
    // Source/detector stand-off carried as provenance; projection is
    // parallel-beam.
    double source_distance_cm = 133.0;
    double detector_distance_cm = 525.0;

    static Geometry with_grid(int n);
    void validate() const;
};

// Concentric spherical shells. radii ascending, last entry is the outer
// radius; densities[i] fills radii[i-1] < r <= radii[i].
struct ShellPhantom {
    std::vector<double> radii;      // cm
    std::vector<double> densities;  // g/cm^3
    int material_id = 0;

    void validate() const;
};

// Line integral of density along a chord at the given impact parameter.
double chord_areal_density(const ShellPhantom& p, double impact_cm);

// total mass in grams
double phantom_mass(const ShellPhantom& p);

// areal density map (g/cm^2), parallel projection
Radiograph project_phantom(const ShellPhantom& p, const Geometry& g);

// density on the central plane (g/cm^3)
Grid rasterize_central_slice(const ShellPhantom& p, const Geometry& g);

struct DatasetParams {
    int count = 99;
    uint64_t seed = 1;
    int shells = 5;
    double outer_radius = 5.0;  // cm, fixed
    double r_min = 0.25, r_max = 2.5;
    std::vector<double> palette = {0.5, 1.0, 1.5, 2.0, 2.5};
    int material_id = 0;
};

// Random shell phantoms, all rescaled to the mass of a uniform sphere at the
// palette's median density so total mass carries no information.
std::vector<ShellPhantom> generate_dataset(const DatasetParams& p);
double reference_mass(const DatasetParams& p);

nlohmann::json phantom_to_json(const ShellPhantom& p);
ShellPhantom phantom_from_json(const nlohmann::json& j);
void save_phantoms(const std::filesystem::path& path, const std::vector<ShellPhantom>& ps);
std::vector<ShellPhantom> load_phantoms(const std::filesystem::path& path);

}  // namespace descatter
