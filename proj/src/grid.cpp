#include "descatter/grid.hpp"

#include <cmath>

namespace descatter {

Mask Mask::all(int n) {
    Mask m;
    m.n = n;
    m.in.assign(static_cast<size_t>(n) * n, 1);
    return m;
}

Mask Mask::disk(int n, double pitch, double radius) {
    Mask m;
    m.n = n;
    m.in.assign(static_cast<size_t>(n) * n, 0);
    const int c = (n - 1) / 2;
    const double r2 = radius * radius;
    for (int r = 0; r < n; ++r) {
        for (int col = 0; col < n; ++col) {
            double dy = pitch * (r - c), dx = pitch * (col - c);
            if (dy * dy + dx * dx <= r2) m.in[static_cast<size_t>(r) * n + col] = 1;
        }
    }
    return m;
}

size_t Mask::count() const {
    size_t k = 0;
    for (uint8_t v : in) k += v;
    return k;
}

double frob_norm_sq(const Grid& g) {
    double s = 0.0;
    for (double v : g.vec()) s += v * v;
    return s;
}

double frob_norm(const Grid& g) { return std::sqrt(frob_norm_sq(g)); }

double dot(const Grid& a, const Grid& b) {
    double s = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (size_t i = 0; i < a.npix(); ++i) s += pa[i] * pb[i];
    return s;
}

double masked_dot(const Grid& a, const Grid& b, const Mask& m) {
    double s = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (size_t i = 0; i < a.npix(); ++i)
        if (m.in[i]) s += pa[i] * pb[i];
    return s;
}

double masked_norm_sq(const Grid& a, const Mask& m) {
    double s = 0.0;
    const double* pa = a.data();
    for (size_t i = 0; i < a.npix(); ++i)
        if (m.in[i]) s += pa[i] * pa[i];
    return s;
}

double max_abs(const Grid& g) {
    double s = 0.0;
    for (double v : g.vec()) s = std::max(s, std::fabs(v));
    return s;
}

double max_abs_diff(const Grid& a, const Grid& b) {
    double s = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (size_t i = 0; i < a.npix(); ++i) s = std::max(s, std::fabs(pa[i] - pb[i]));
    return s;
}

bool all_finite(const Grid& g) {
    for (double v : g.vec())
        if (!std::isfinite(v)) return false;
    return true;
}

void scale_inplace(Grid& g, double s) {
    for (double& v : g.vec()) v *= s;
}

Grid scaled(const Grid& g, double s) {
    Grid out = g;
    scale_inplace(out, s);
    return out;
}

}  // namespace descatter
