#include "descatter/physics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "descatter/errors.hpp"
#include "descatter/rng.hpp"

namespace descatter {

Spectrum Spectrum::mono(double e) {
    Spectrum s;
    s.energies_mev = {e};
    s.weights = {1.0};
    return s;
}

Spectrum Spectrum::triangular(int bins, double end_mev) {
    if (bins < 1) throw ConfigError("spectrum: bins must be positive");
    Spectrum s;
    double total = 0.0;
    for (int i = 0; i < bins; ++i) {
        double e = end_mev * (i + 0.5) / bins;
        s.energies_mev.push_back(e);
        s.weights.push_back(end_mev - e);
        total += end_mev - e;
    }
    for (double& w : s.weights) w /= total;
    return s;
}

void Spectrum::validate() const {
    if (energies_mev.empty() || energies_mev.size() != weights.size())
        throw ConfigError("spectrum: energies and weights must be non-empty and equal length");
    double prev = 0.0, total = 0.0;
    for (size_t i = 0; i < energies_mev.size(); ++i) {
        if (!(energies_mev[i] > prev)) throw ConfigError("spectrum: energies must ascend");
        if (!(weights[i] > 0.0)) throw ConfigError("spectrum: weights must be positive");
        prev = energies_mev[i];
        total += weights[i];
    }
    if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("spectrum: weights must sum to 1");
}

double AttenuationTable::at(double e_mev) const {
    for (size_t i = 0; i < energies_mev.size(); ++i)
        if (energies_mev[i] == e_mev) return xi[i];
    throw ConfigError("attenuation table: no entry at requested energy");
}

double AttenuationTable::synthetic_xi(double e_mev) {
    // pinned to 0.05 cm^2/g at 1.5 MeV
    const double a = 0.04 * std::pow(1.5, 0.6);
    return a * std::pow(e_mev, -0.6) + 0.01;
}

AttenuationTable AttenuationTable::synthetic(const std::vector<double>& energies, int material_id) {
    AttenuationTable t;
    t.material_id = material_id;
    t.energies_mev = energies;
    for (double e : energies) t.xi.push_back(synthetic_xi(e));
    t.validate();
    return t;
}

void AttenuationTable::validate() const {
    if (energies_mev.empty() || energies_mev.size() != xi.size())
        throw ConfigError("attenuation table: energies and values must match");
    double prev = 0.0;
    for (size_t i = 0; i < energies_mev.size(); ++i) {
        if (!(energies_mev[i] > prev)) throw ConfigError("attenuation table: energies must ascend");
        if (!(xi[i] > 0.0)) throw ConfigError("attenuation table: coefficients must be positive");
        prev = energies_mev[i];
    }
}

void save_energy_csv(const std::filesystem::path& path, const std::vector<double>& energies,
                     const std::vector<double>& values) {
    if (energies.size() != values.size()) throw ConfigError("energy csv: length mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << "energy_mev,value\n";
    char buf[80];
    for (size_t i = 0; i < energies.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", energies[i], values[i]);
        f << buf;
    }
}

std::pair<std::vector<double>, std::vector<double>> load_energy_csv(
    const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw ConfigError("energy csv: empty file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "energy_mev,value")
        throw ConfigError("energy csv: bad header in " + path.string());
    std::vector<double> e, v;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b))
            throw ConfigError("energy csv: bad row in " + path.string());
        try {
            e.push_back(std::stod(a));
            v.push_back(std::stod(b));
        } catch (const std::exception&) {
            throw ConfigError("energy csv: bad number in " + path.string());
        }
    }
    return {std::move(e), std::move(v)};
}

double poly_transmission(double rho_a, const Spectrum& s, const AttenuationTable& t) {
    double g = 0.0;
    for (size_t i = 0; i < s.size(); ++i)
        g += s.weights[i] * std::exp(-t.at(s.energies_mev[i]) * rho_a);
    return g;
}

Radiograph direct_mono(const Radiograph& areal, double xi) {
    if (!(xi > 0.0)) throw ConfigError("direct_mono: xi must be positive");
    Grid out(areal.img.n());
    const double* in = areal.img.data();
    double* o = out.data();
    for (size_t i = 0; i < out.npix(); ++i) o[i] = std::exp(-xi * in[i]);
    return areal.like(std::move(out));
}

Radiograph direct_poly(const Radiograph& areal, const Spectrum& s, const AttenuationTable& t) {
    s.validate();
    // resolve every energy up front so a mismatch fails loudly
    std::vector<double> xis;
    xis.reserve(s.size());
    for (double e : s.energies_mev) xis.push_back(t.at(e));
    Grid out(areal.img.n());
    const double* in = areal.img.data();
    double* o = out.data();
    for (size_t i = 0; i < out.npix(); ++i) {
        double g = 0.0;
        for (size_t k = 0; k < xis.size(); ++k) g += s.weights[k] * std::exp(-xis[k] * in[i]);
        o[i] = g;
    }
    return areal.like(std::move(out));
}

Radiograph add_awgn(const Radiograph& r, double sigma, uint64_t seed) {
    if (sigma < 0.0) throw ConfigError("add_awgn: sigma must be nonnegative");
    if (sigma == 0.0) return r;
    Rng rng(seed);
    Grid out = r.img;
    for (double& v : out.vec()) v += sigma * rng.normal();
    return r.like(std::move(out));
}

}  // namespace descatter
