#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "descatter/grid.hpp"

namespace descatter {

struct Spectrum {
    std::vector<double> energies_mev;  // strictly increasing
    std::vector<double> weights;       // positive, sum to 1

    // single line at e MeV
    static Spectrum mono(double e = 1.5);
    // weights falling linearly to zero at the endpoint
    static Spectrum triangular(int bins = 8, double end_mev = 19.4);

    void validate() const;
    size_t size() const { return energies_mev.size(); }
};

struct AttenuationTable {
    int material_id = 0;
    std::vector<double> energies_mev;
    std::vector<double> xi;  // mass attenuation, cm^2/g

    // exact-energy lookup; anything else is a configuration error
    double at(double e_mev) const;

    // smooth synthetic coefficient a*E^-0.6 + c pinned to 0.05 cm^2/g at
    // 1.5 MeV, evaluated at the given energies
    static AttenuationTable synthetic(const std::vector<double>& energies, int material_id = 0);
    static double synthetic_xi(double e_mev);

    void validate() const;
};

// CSV with header "energy_mev,value", LF line endings.
void save_energy_csv(const std::filesystem::path& path, const std::vector<double>& energies,
                     const std::vector<double>& values);
std::pair<std::vector<double>, std::vector<double>> load_energy_csv(const std::filesystem::path& path);

// transmission through rho_a g/cm^2 for a polyenergetic beam
double poly_transmission(double rho_a, const Spectrum& s, const AttenuationTable& t);

// flat-field-normalized transmission maps
Radiograph direct_mono(const Radiograph& areal, double xi);
Radiograph direct_poly(const Radiograph& areal, const Spectrum& s, const AttenuationTable& t);

// adds iid N(0, sigma^2); sigma = 0 returns the input unchanged
Radiograph add_awgn(const Radiograph& r, double sigma, uint64_t seed);

}  // namespace descatter
