#include "descatter/recon.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "descatter/errors.hpp"
#include "descatter/util.hpp"

namespace descatter {

Radiograph invert_mono(const Radiograph& d, double xi) {
    if (!(xi > 0.0)) throw ConfigError("mono inversion: attenuation must be positive");
    Grid out(d.img.n());
    for (size_t i = 0; i < out.npix(); ++i) {
        const double t = std::min(1.0, std::max(1e-12, d.img.vec()[i]));
        out.vec()[i] = -std::log(t) / xi;
    }
    return d.like(std::move(out));
}

namespace {

std::vector<double> lut_transmissions(const Spectrum& s, const AttenuationTable& t,
                                      const std::vector<double>& rho, double eta,
                                      const AttenuationTable* nuisance) {
    std::vector<double> xis(s.energies_mev.size()), zetas(s.energies_mev.size(), 0.0);
    for (size_t e = 0; e < s.energies_mev.size(); ++e) {
        xis[e] = t.at(s.energies_mev[e]);
        if (nuisance) zetas[e] = nuisance->at(s.energies_mev[e]);
    }
    std::vector<double> g(rho.size());
    for (size_t i = 0; i < rho.size(); ++i) {
        double acc = 0.0;
        for (size_t e = 0; e < s.energies_mev.size(); ++e)
            acc += s.weights[e] * std::exp(-xis[e] * rho[i] - zetas[e] * eta);
        g[i] = acc;
    }
    return g;
}

std::vector<double> rho_axis(double rho_max, int L) {
    if (!(rho_max > 0.0)) throw ConfigError("lookup table: rho_max must be positive");
    if (L < 2) throw ConfigError("lookup table: need at least two samples");
    std::vector<double> rho(L);
    for (int i = 0; i < L; ++i) rho[i] = rho_max * i / (L - 1);
    return rho;
}

// invert one decreasing table by binary search + linear interpolation
double invert_table(const std::vector<double>& rho, const std::vector<double>& g, double d,
                    long* clamped) {
    if (d >= g.front()) return rho.front();
    if (d <= g.back()) {
        if (clamped) ++*clamped;
        return rho.back();
    }
    size_t lo = 0, hi = g.size() - 1;
    while (hi - lo > 1) {
        const size_t mid = (lo + hi) / 2;
        if (g[mid] >= d)
            lo = mid;
        else
            hi = mid;
    }
    const double dg = g[lo] - g[hi];
    if (!(dg > 0.0)) return rho[lo];
    return rho[lo] + (g[lo] - d) / dg * (rho[hi] - rho[lo]);
}

}  // namespace

PolyLUT build_poly_lut(const Spectrum& s, const AttenuationTable& t, double rho_max, int L) {
    s.validate();
    PolyLUT lut;
    lut.rho = rho_axis(rho_max, L);
    lut.g = lut_transmissions(s, t, lut.rho, 0.0, nullptr);
    return lut;
}

PolyLUT build_poly_lut_nuisance(const Spectrum& s, const AttenuationTable& t,
                                const AttenuationTable& nuisance, double rho_max, double eta_max,
                                int L, int Q) {
    s.validate();
    if (!(eta_max > 0.0)) throw ConfigError("lookup table: eta_max must be positive");
    if (Q < 2) throw ConfigError("lookup table: need at least two nuisance levels");
    PolyLUT lut;
    lut.rho = rho_axis(rho_max, L);
    lut.g = lut_transmissions(s, t, lut.rho, 0.0, nullptr);
    lut.eta_levels.resize(Q);
    lut.g_eta.resize(Q);
    for (int q = 0; q < Q; ++q) {
        lut.eta_levels[q] = eta_max * q / (Q - 1);
        lut.g_eta[q] = lut_transmissions(s, t, lut.rho, lut.eta_levels[q], &nuisance);
    }
    return lut;
}

Radiograph invert_poly(const Radiograph& d, const PolyLUT& lut, InvertStats* stats) {
    if (lut.rho.empty()) throw ConfigError("poly inversion: empty lookup table");
    long clamped = 0;
    Grid out(d.img.n());
    for (size_t i = 0; i < out.npix(); ++i)
        out.vec()[i] = invert_table(lut.rho, lut.g, d.img.vec()[i], &clamped);
    if (stats) stats->clamped += clamped;
    return d.like(std::move(out));
}

Radiograph invert_poly_nuisance(const Radiograph& d, const Grid& eta_map, const PolyLUT& lut,
                                InvertStats* stats) {
    if (lut.eta_levels.size() < 2) throw ConfigError("nuisance inversion: table has no eta axis");
    if (!eta_map.same_shape(d.img)) throw ConfigError("nuisance inversion: eta map shape");
    const double eta_max = lut.eta_levels.back();
    const double step = eta_max / (lut.eta_levels.size() - 1);
    long clamped = 0;
    Grid out(d.img.n());
    for (size_t i = 0; i < out.npix(); ++i) {
        const double eta = std::min(eta_max, std::max(0.0, eta_map.vec()[i]));
        size_t q0 = static_cast<size_t>(eta / step);
        if (q0 >= lut.eta_levels.size() - 1) q0 = lut.eta_levels.size() - 2;
        const double frac = (eta - lut.eta_levels[q0]) / step;
        const double r0 = invert_table(lut.rho, lut.g_eta[q0], d.img.vec()[i], &clamped);
        const double r1 = invert_table(lut.rho, lut.g_eta[q0 + 1], d.img.vec()[i], nullptr);
        out.vec()[i] = r0 + frac * (r1 - r0);
    }
    if (stats) stats->clamped += clamped;
    return d.like(std::move(out));
}

// ---- inverse Abel ---------------------------------------------------------
//
// The projection P(y) of an axially symmetric f(r) is inverted through
// f(r) = -(1/pi) * integral_r^inf P'(y) dy / sqrt(y^2 - r^2). P is modeled
// piecewise: on each unit interval [i, i+1] (in samples) P' comes from the
// parabola through nodes i-1, i, i+1, with the on-axis interval using the
// even fold P(-1) = P(1) and the profile treated as constant past the last
// sample. All the resulting integrals have closed forms, so the operator
// matrix is assembled exactly for unit spacing and rescaled by 1/dr on use.

AbelOperator::AbelOperator(int n) : n_(n), d_(static_cast<size_t>(n) * n, 0.0) {
    const double inv_pi = 1.0 / M_PI;
    for (int j = 0; j < n_; ++j) {
        auto add = [&](int i, double w) {
            if (i >= 0 && i < n_) d_[static_cast<size_t>(j) * n_ + i] += w;
        };
        for (int i = j; i <= n_ - 2; ++i) {
            // integral over [max(i, j), i+1] of (A + B*(y - i)) / sqrt(y^2 - j^2),
            // c0 multiplying A and c1 multiplying B
            double c0, c1;
            const double lo = std::max(i, j);
            const double hi = i + 1;
            if (j == 0) {
                if (i == 0) {
                    c0 = 0.0;  // A vanishes on the folded axis interval
                    c1 = 1.0;
                } else {
                    c0 = std::log(hi / lo);
                    c1 = (hi - lo) - i * c0;
                }
            } else {
                const double r2 = static_cast<double>(j) * j;
                const double slo = std::sqrt(std::max(0.0, lo * lo - r2));
                const double shi = std::sqrt(hi * hi - r2);
                c0 = std::log(hi + shi) - std::log(lo + slo);
                c1 = (shi - slo) - i * c0;
            }
            if (i == 0) {
                // P'(y) = 2 (P1 - P0) y on [0, 1]
                add(0, inv_pi * 2.0 * c1);
                add(1, -inv_pi * 2.0 * c1);
            } else {
                // A = (P[i+1] - P[i-1]) / 2, B = P[i+1] - 2 P[i] + P[i-1]
                add(i - 1, -inv_pi * (-0.5 * c0 + c1));
                add(i, -inv_pi * (-2.0 * c1));
                add(i + 1, -inv_pi * (0.5 * c0 + c1));
            }
        }
    }
}

std::shared_ptr<const AbelOperator> AbelOperator::get(int n) {
    if (n < 1) throw ConfigError("abel operator: size must be positive");
    static std::mutex mu;
    static std::map<int, std::shared_ptr<const AbelOperator>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    auto op = std::shared_ptr<const AbelOperator>(new AbelOperator(n));
    cache.emplace(n, op);
    return op;
}

std::vector<double> AbelOperator::invert(const double* proj, double dr) const {
    if (!(dr > 0.0)) throw ConfigError("abel operator: spacing must be positive");
    std::vector<double> f(n_, 0.0);
    for (int j = 0; j < n_; ++j) {
        double acc = 0.0;
        const double* row = d_.data() + static_cast<size_t>(j) * n_;
        for (int i = 0; i < n_; ++i) acc += row[i] * proj[i];
        f[j] = acc / dr;
    }
    return f;
}

Grid inverse_abel(const Radiograph& areal) {
    const int n = areal.img.n();
    const int c = (n - 1) / 2;
    const int m = c + 1;  // samples from the axis outward
    auto op = AbelOperator::get(m);
    Grid out(n);
    std::vector<double> right(m), left(m);
    for (int r = 0; r < n; ++r) {
        for (int i = 0; i < m; ++i) {
            right[i] = areal.img.at(r, c + i);
            left[i] = areal.img.at(r, c - i);
        }
        const std::vector<double> fr = op->invert(right.data(), areal.pitch);
        const std::vector<double> fl = op->invert(left.data(), areal.pitch);
        for (int i = 0; i < m; ++i) {
            const double v = 0.5 * (fr[i] + fl[i]);
            out.at(r, c + i) = v;
            out.at(r, c - i) = v;
        }
    }
    return out;
}

double made(const Grid& recon, const Grid& truth) {
    if (!recon.same_shape(truth)) throw ConfigError("made: shape mismatch");
    std::vector<double> err;
    for (size_t i = 0; i < truth.npix(); ++i)
        if (truth.vec()[i] > 0.0) err.push_back(std::abs(recon.vec()[i] - truth.vec()[i]));
    if (err.empty()) throw NumericalError("made: truth slice has empty support");
    return lower_median(err);
}

Grid reconstruct(const Radiograph& d, const ReconConfig& rc, InvertStats* stats) {
    Radiograph areal;
    if (rc.mono) {
        areal = invert_mono(d, rc.xi);
    } else if (rc.eta_map) {
        PolyLUT lut = build_poly_lut_nuisance(rc.spectrum, rc.atten, rc.eta_atten, rc.rho_max,
                                              rc.eta_max, rc.lut_size, rc.eta_levels);
        areal = invert_poly_nuisance(d, *rc.eta_map, lut, stats);
    } else {
        PolyLUT lut = build_poly_lut(rc.spectrum, rc.atten, rc.rho_max, rc.lut_size);
        areal = invert_poly(d, lut, stats);
    }
    if (rc.zero_outside_roi) {
        const Mask m = d.roi();
        for (size_t i = 0; i < areal.img.npix(); ++i)
            if (!m.at(i)) areal.img.vec()[i] = 0.0;
    }
    return inverse_abel(areal);
}

}  // namespace descatter
