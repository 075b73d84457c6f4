#include "descatter/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "descatter/errors.hpp"
#include "descatter/rng.hpp"

namespace descatter {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kMinRadiusGap = 1e-6;  // cm

double chord_through_sphere(double radius, double impact) {
    if (impact >= radius) return 0.0;
    return 2.0 * std::sqrt(radius * radius - impact * impact);
}
}  // namespace

Geometry Geometry::with_grid(int n) {
    Geometry g;
    g.grid_size = n;
    g.pixel_pitch = 12.0 / (n - 1);
    return g;
}

void Geometry::validate() const {
    if (grid_size < 5 || grid_size % 2 == 0)
        throw ConfigError("geometry: grid_size must be odd and at least 5");
    if (pixel_pitch <= 0) throw ConfigError("geometry: pixel_pitch must be positive");
    if (roi_radius <= 0) throw ConfigError("geometry: roi_radius must be positive");
}

void ShellPhantom::validate() const {
    if (radii.empty() || radii.size() != densities.size())
        throw ConfigError("phantom: radii and densities must be non-empty and equal length");
    double prev = 0.0;
    for (double r : radii) {
        if (!(r > prev)) throw ConfigError("phantom: radii must be positive and ascending");
        prev = r;
    }
    for (double d : densities)
        if (!(d >= 0.0) || !std::isfinite(d))
            throw ConfigError("phantom: densities must be finite and nonnegative");
}

double chord_areal_density(const ShellPhantom& p, double impact_cm) {
    double s = 0.0;
    double prev = chord_through_sphere(p.radii[0], impact_cm);
    s += p.densities[0] * prev;
    for (size_t i = 1; i < p.radii.size(); ++i) {
        double c = chord_through_sphere(p.radii[i], impact_cm);
        s += p.densities[i] * (c - prev);
        prev = c;
    }
    return s;
}

double phantom_mass(const ShellPhantom& p) {
    double m = 0.0;
    double prev3 = 0.0;
    for (size_t i = 0; i < p.radii.size(); ++i) {
        double r3 = p.radii[i] * p.radii[i] * p.radii[i];
        m += p.densities[i] * (r3 - prev3);
        prev3 = r3;
    }
    return 4.0 / 3.0 * kPi * m;
}

Radiograph project_phantom(const ShellPhantom& p, const Geometry& g) {
    g.validate();
    p.validate();
    const int n = g.grid_size;
    const int c = (n - 1) / 2;
    Grid img(n);
    for (int r = 0; r < n; ++r) {
        for (int col = 0; col < n; ++col) {
            double b = g.pixel_pitch * std::hypot(static_cast<double>(r - c),
                                                  static_cast<double>(col - c));
            img.at(r, col) = chord_areal_density(p, b);
        }
    }
    return Radiograph{std::move(img), g.pixel_pitch, g.roi_radius};
}

Grid rasterize_central_slice(const ShellPhantom& p, const Geometry& g) {
    g.validate();
    p.validate();
    const int n = g.grid_size;
    const int c = (n - 1) / 2;
    Grid img(n);
    for (int r = 0; r < n; ++r) {
        for (int col = 0; col < n; ++col) {
            double rad = g.pixel_pitch * std::hypot(static_cast<double>(r - c),
                                                    static_cast<double>(col - c));
            double v = 0.0;
            for (size_t i = 0; i < p.radii.size(); ++i) {
                if (rad <= p.radii[i]) {
                    v = p.densities[i];
                    break;
                }
            }
            img.at(r, col) = v;
        }
    }
    return img;
}

double reference_mass(const DatasetParams& p) {
    std::vector<double> pal = p.palette;
    std::sort(pal.begin(), pal.end());
    double median = pal[(pal.size() - 1) / 2];
    double r3 = p.outer_radius * p.outer_radius * p.outer_radius;
    return 4.0 / 3.0 * kPi * r3 * median;
}

std::vector<ShellPhantom> generate_dataset(const DatasetParams& p) {
    if (p.count < 1) throw ConfigError("dataset: count must be positive");
    if (p.shells < 2) throw ConfigError("dataset: at least two shells");
    if (p.palette.empty()) throw ConfigError("dataset: palette must be non-empty");
    if (!(p.r_min > 0 && p.r_max > p.r_min && p.r_max < p.outer_radius))
        throw ConfigError("dataset: inner radius range must satisfy 0 < r_min < r_max < outer");

    const double m_ref = reference_mass(p);
    Rng rng(p.seed);
    std::vector<ShellPhantom> out;
    out.reserve(p.count);
    for (int k = 0; k < p.count; ++k) {
        ShellPhantom ph;
        ph.material_id = p.material_id;
        // redraw until the sorted inner radii are separated
        for (;;) {
            std::vector<double> radii(p.shells - 1);
            for (double& r : radii) r = rng.uniform(p.r_min, p.r_max);
            std::sort(radii.begin(), radii.end());
            bool ok = true;
            for (size_t i = 1; i < radii.size(); ++i)
                if (radii[i] - radii[i - 1] < kMinRadiusGap) ok = false;
            if (!ok) continue;
            radii.push_back(p.outer_radius);
            ph.radii = std::move(radii);
            break;
        }
        ph.densities.resize(p.shells);
        for (double& d : ph.densities)
            d = p.palette[rng.next() % p.palette.size()];
        double scale = m_ref / phantom_mass(ph);
        for (double& d : ph.densities) d *= scale;
        ph.validate();
        out.push_back(std::move(ph));
    }
    return out;
}

nlohmann::json phantom_to_json(const ShellPhantom& p) {
    return nlohmann::json{
        {"radii_cm", p.radii}, {"densities_g_cm3", p.densities}, {"material_id", p.material_id}};
}

ShellPhantom phantom_from_json(const nlohmann::json& j) {
    ShellPhantom p;
    try {
        p.radii = j.at("radii_cm").get<std::vector<double>>();
        p.densities = j.at("densities_g_cm3").get<std::vector<double>>();
        p.material_id = j.value("material_id", 0);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("phantom json: ") + e.what());
    }
    p.validate();
    return p;
}

void save_phantoms(const std::filesystem::path& path, const std::vector<ShellPhantom>& ps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : ps) arr.push_back(phantom_to_json(p));
    nlohmann::json doc{{"schema_version", 1}, {"phantoms", arr}};
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << doc.dump(2) << "\n";
}

std::vector<ShellPhantom> load_phantoms(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read " + path.string());
    nlohmann::json doc;
    try {
        f >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("phantom list parse: ") + e.what());
    }
    std::vector<ShellPhantom> out;
    for (const auto& j : doc.at("phantoms")) out.push_back(phantom_from_json(j));
    return out;
}

}  // namespace descatter
