#pragma once

#include <memory>
#include <vector>

#include "descatter/grid.hpp"
#include "descatter/physics.hpp"

namespace descatter {

// areal density from monoenergetic transmission; d clamped to [1e-12, 1]
Radiograph invert_mono(const Radiograph& d, double xi);

// Transmission-to-areal-density lookup for a polyenergetic beam, optionally
// with per-pixel nuisance material handled as quantized side tables.
struct PolyLUT {
    std::vector<double> rho;  // L ascending samples, rho[0] = 0
    std::vector<double> g;    // decreasing transmission values, g[0] = 1

    // nuisance axis (empty when unused)
    std::vector<double> eta_levels;
    std::vector<std::vector<double>> g_eta;  // one table per level

    double rho_max() const { return rho.back(); }
    int size() const { return static_cast<int>(rho.size()); }
    double spacing() const { return rho.back() / (rho.size() - 1); }
};

PolyLUT build_poly_lut(const Spectrum& s, const AttenuationTable& t, double rho_max, int L = 4096);
PolyLUT build_poly_lut_nuisance(const Spectrum& s, const AttenuationTable& t,
                                const AttenuationTable& nuisance, double rho_max, double eta_max,
                                int L = 4096, int Q = 64);

struct InvertStats {
    long clamped = 0;  // pixels darker than the table floor, clamped to rho_max
};

Radiograph invert_poly(const Radiograph& d, const PolyLUT& lut, InvertStats* stats = nullptr);
// eta_map holds the known nuisance areal density per pixel
Radiograph invert_poly_nuisance(const Radiograph& d, const Grid& eta_map, const PolyLUT& lut,
                                InvertStats* stats = nullptr);

// Three-point inverse Abel operator for n radial samples; built once per size
// and cached.
class AbelOperator {
public:
    static std::shared_ptr<const AbelOperator> get(int n);

    int n() const { return n_; }
    // proj: n projection samples at spacing dr starting on the axis
    std::vector<double> invert(const double* proj, double dr) const;
    double coeff(int j, int i) const { return d_[static_cast<size_t>(j) * n_ + i]; }

private:
    explicit AbelOperator(int n);
    int n_;
    std::vector<double> d_;
};

// Row-wise inverse Abel transform of an areal-density map around the central
// column; left/right half profiles are averaged after inversion. Returns the
// density slice in g/cm^3.
Grid inverse_abel(const Radiograph& areal);

// lower median of |recon - truth| over the support of truth
double made(const Grid& recon, const Grid& truth);

struct ReconConfig {
    bool mono = true;
    double xi = 0.05;

    Spectrum spectrum;        // poly mode
    AttenuationTable atten;   // poly mode
    double rho_max = 0.0;     // required in poly mode
    int lut_size = 4096;

    const Grid* eta_map = nullptr;  // optional nuisance
    AttenuationTable eta_atten;
    double eta_max = 0.0;
    int eta_levels = 64;

    bool zero_outside_roi = true;  // blank the areal map beyond roi_radius
};

// transmission -> areal density -> central density slice
Grid reconstruct(const Radiograph& d, const ReconConfig& rc, InvertStats* stats = nullptr);

}  // namespace descatter
