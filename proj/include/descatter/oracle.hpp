#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "descatter/grid.hpp"

namespace descatter {

struct OracleKernel {
    double a = 1.0, b = 0.3;            // pair amplitudes
    double sigma1_cm = 0.8, sigma2_cm = 3.0;
    double alpha = 1.0, beta = 1.0;     // pointwise amplitude-map exponents
};

// Synthetic scatter ground truth. Four -log(direct) regions, each convolved
// with its own Gaussian pair whose amplitude and widths vary smoothly with
// object summary statistics, plus a small deterministic per-object parameter
// jitter. Deliberately richer than any single fitted model.
struct ScatterOracleParams {
    int schema_version = 1;
    uint64_t seed = 7;

    double amplitude = 0.34;       // overall scale; calibrated so the uniform
                                   // reference sphere peaks near s/d = 0.3
    // Heterogeneity is split into two orthogonal drivers. The concentration
    // statistic (areal second moment normalized by mass, so it is invariant
    // under density rescaling) varies across equal-mass objects and has to be
    // strong enough that neighboring objects share scatter behavior while the
    // population as a whole does not -- otherwise a single global fit would be
    // near-optimal and locality could never pay off. The mass term only moves
    // when densities are scaled, which is what the scale-sweep experiment does.
    double amp_mass_exp = 1.3;     // exponent on total mass ratio
    double amp_conc_exp = 5.0;     // exponent on concentration ratio
    double width_conc_exp = 0.4;   // kernel widths follow concentration
    double jitter = 0.18;          // amplitude of the per-object parameter drift

    // reference statistics: uniform 5 cm sphere at 1.5 g/cm^3
    double ref_mass_g = 785.3981633974483;
    double ref_m2 = 8835.729338221293;  // 2*pi*rho^2*R^4

    std::vector<double> thresholds = {0.3, 0.7, 1.1};  // on -log(direct)
    std::vector<OracleKernel> kernels;                  // thresholds.size()+1 entries

    static ScatterOracleParams defaults(uint64_t seed = 7);
    void validate() const;
};

nlohmann::json oracle_params_to_json(const ScatterOracleParams& p);
ScatterOracleParams oracle_params_from_json(const nlohmann::json& j);
void save_oracle_params(const std::filesystem::path& path, const ScatterOracleParams& p);
ScatterOracleParams load_oracle_params(const std::filesystem::path& path);

// Scatter map for one object. Emission is zero wherever areal == 0, so
// zero-padding the inputs never changes the overlapping output.
Radiograph simulate_scatter(const Radiograph& direct, const Radiograph& areal,
                            const ScatterOracleParams& p);

}  // namespace descatter
