#include "descatter/resample.hpp"

#include <cmath>

#include "descatter/errors.hpp"

namespace descatter {

int downsample4_size(int n) {
    if (n < 5 || n % 4 != 1) throw ConfigError("downsample4: size must be 4k+1");
    return (n - 1) / 4 + 1;
}

namespace {
// A width-4 box centered on a sample covers [-2, +2] with the two edge
// pixels split in half; using the symmetric window keeps the prefilter free
// of the half-pixel drift an aligned 4-pixel window would introduce.
constexpr int kBoxReach = 2;
constexpr double kBoxWeight[5] = {0.5, 1.0, 1.0, 1.0, 0.5};
}  // namespace

Grid downsample4(const Grid& g) {
    const int n = g.n();
    const int cn = downsample4_size(n);
    Grid out(cn);
    for (int r = 0; r < cn; ++r) {
        const int fr = 4 * r;
        for (int c = 0; c < cn; ++c) {
            const int fc = 4 * c;
            double s = 0.0, w = 0.0;
            for (int di = -kBoxReach; di <= kBoxReach; ++di) {
                const int i = fr + di;
                if (i < 0 || i >= n) continue;
                for (int dj = -kBoxReach; dj <= kBoxReach; ++dj) {
                    const int j = fc + dj;
                    if (j < 0 || j >= n) continue;
                    const double wij = kBoxWeight[di + kBoxReach] * kBoxWeight[dj + kBoxReach];
                    s += wij * g.at(i, j);
                    w += wij;
                }
            }
            out.at(r, c) = s / w;
        }
    }
    return out;
}

Grid upsample_bilinear(const Grid& g, int out_n) {
    const int n = g.n();
    if (n < 2 || out_n < 2) throw ConfigError("upsample: sizes must be at least 2");
    Grid out(out_n);
    const double scale = static_cast<double>(n - 1) / (out_n - 1);
    for (int r = 0; r < out_n; ++r) {
        double fr = r * scale;
        int i0 = static_cast<int>(fr);
        if (i0 >= n - 1) i0 = n - 2;
        double wr = fr - i0;
        for (int c = 0; c < out_n; ++c) {
            double fc = c * scale;
            int j0 = static_cast<int>(fc);
            if (j0 >= n - 1) j0 = n - 2;
            double wc = fc - j0;
            out.at(r, c) = (1 - wr) * ((1 - wc) * g.at(i0, j0) + wc * g.at(i0, j0 + 1)) +
                           wr * ((1 - wc) * g.at(i0 + 1, j0) + wc * g.at(i0 + 1, j0 + 1));
        }
    }
    return out;
}

}  // namespace descatter
