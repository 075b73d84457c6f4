#include "descatter/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "descatter/container.hpp"
#include "descatter/errors.hpp"
#include "descatter/fft.hpp"
#include "descatter/resample.hpp"

namespace descatter {

using nlohmann::json;

const char* to_string(ModelClass c) {
    switch (c) {
        case ModelClass::single_field: return "single-field";
        case ModelClass::convolutional: return "convolutional";
        case ModelClass::parametric: return "parametric";
        case ModelClass::multikernel: return "multikernel";
    }
    return "?";
}

ModelClass model_class_from_string(const std::string& s) {
    if (s == "single-field" || s == "single_field") return ModelClass::single_field;
    if (s == "convolutional") return ModelClass::convolutional;
    if (s == "parametric") return ModelClass::parametric;
    if (s == "multikernel") return ModelClass::multikernel;
    throw ConfigError("unknown model class '" + s + "'");
}

Mask ModelContext::coarse_mask() const {
    // decimation keeps every 4th sample, so the coarse spacing is 4x
    return Mask::disk(coarse_n, 4.0 * pitch, roi_radius);
}

Mask ModelContext::full_mask() const { return Mask::disk(full_n, pitch, roi_radius); }

ModelContext make_context(int full_n, double pitch, double roi_radius,
                          const NormalizationConstants& norms) {
    if (full_n < 5 || full_n % 4 != 1)
        throw ConfigError("model context: grid size must be 4k+1 and at least 5");
    if (!(pitch > 0.0) || !(roi_radius > 0.0))
        throw ConfigError("model context: pitch and roi radius must be positive");
    if (!(norms.direct_norm > 0.0) || !(norms.scatter_norm > 0.0))
        throw ConfigError("model context: normalization constants must be positive");
    ModelContext ctx;
    ctx.full_n = full_n;
    ctx.coarse_n = downsample4_size(full_n);
    ctx.pitch = pitch;
    ctx.roi_radius = roi_radius;
    ctx.norms = norms;
    return ctx;
}

namespace {

constexpr double kDirectFloor = 1e-8;
constexpr double kLogFloor = 1e-12;

double clamp_direct(double d) { return std::min(1.0, std::max(kDirectFloor, d)); }

// -log of the clamped transmission; always >= kLogFloor so log(u) is safe
double neg_log(double d) { return std::max(-std::log(clamp_direct(d)), kLogFloor); }

}  // namespace

double nonlinearity_scalar(double d, double alpha, double beta) {
    const double dc = clamp_direct(d);
    const double x = std::log(dc);  // <= 0
    double p;
    if (beta == 0.0)
        p = 1.0;
    else if (x == 0.0)
        p = 0.0;
    else
        p = std::copysign(std::pow(std::abs(x), beta), x);
    return -std::pow(dc, alpha) * p;
}

Grid nonlinearity(const Grid& d, double alpha, double beta) {
    Grid out(d.n());
    for (int i = 0; i < d.npix(); ++i) out.vec()[i] = nonlinearity_scalar(d.vec()[i], alpha, beta);
    return out;
}

Grid amplitude_map(const Grid& d, double alpha, double beta) {
    Grid out(d.n());
    for (int i = 0; i < d.npix(); ++i) {
        const double dc = clamp_direct(d.vec()[i]);
        const double u = neg_log(dc);
        out.vec()[i] = std::exp(alpha * std::log(dc) + beta * std::log(u));
    }
    return out;
}

Grid gaussian_pair_kernel(const GaussPairParams& p, int size, int center) {
    if (!(p.sigma1 > 0.0) || !(p.sigma2 > 0.0))
        throw ConfigError("gaussian pair kernel: widths must be positive");
    const double n1 = p.a / (p.sigma1 * std::sqrt(2.0 * M_PI));
    const double n2 = p.b / (p.sigma2 * std::sqrt(2.0 * M_PI));
    const double iv1 = 1.0 / (2.0 * p.sigma1 * p.sigma1);
    const double iv2 = 1.0 / (2.0 * p.sigma2 * p.sigma2);
    Grid k(size);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            const double rho2 = static_cast<double>(r - center) * (r - center) +
                                static_cast<double>(c - center) * (c - center);
            k.at(r, c) = n1 * std::exp(-rho2 * iv1) + n2 * std::exp(-rho2 * iv2);
        }
    }
    return k;
}

int region_of(double neg_log_d, const std::vector<double>& thresholds) {
    int r = 0;
    while (r < static_cast<int>(thresholds.size()) && neg_log_d > thresholds[r]) ++r;
    return r;
}

ModelClass ScatterModel::cls() const {
    switch (impl.index()) {
        case 0: return ModelClass::single_field;
        case 1: return ModelClass::convolutional;
        case 2: return ModelClass::parametric;
        default: return ModelClass::multikernel;
    }
}

namespace {

// Training pairs brought onto the fitting grid: divide by the set-level
// norms, decimate, and keep the coarse ROI mask alongside.
struct CoarseSet {
    int cn = 0;
    Mask mask{Mask::all(1)};
    std::vector<Grid> d;
    std::vector<Grid> s;
};

CoarseSet make_coarse(const std::vector<const RadPair*>& pairs, const ModelContext& ctx) {
    if (pairs.empty()) throw ConfigError("model fit: empty training set");
    CoarseSet cs;
    cs.cn = ctx.coarse_n;
    cs.mask = ctx.coarse_mask();
    cs.d.reserve(pairs.size());
    cs.s.reserve(pairs.size());
    for (const RadPair* p : pairs) {
        if (!p) throw ConfigError("model fit: null training pair");
        if (p->direct.img.n() != ctx.full_n || p->scatter.img.n() != ctx.full_n)
            throw ConfigError("model fit: training pair does not match the context grid");
        cs.d.push_back(downsample4(scaled(p->direct.img, 1.0 / ctx.norms.direct_norm)));
        cs.s.push_back(downsample4(scaled(p->scatter.img, 1.0 / ctx.norms.scatter_norm)));
    }
    return cs;
}

void zero_outside(Grid& g, const Mask& m) {
    for (int i = 0; i < g.npix(); ++i)
        if (!m.at(i)) g.vec()[i] = 0.0;
}

// ---- shared engine for the parametric kernel fits (K = 1) and the
// region-split variant (K > 1) -------------------------------------------

struct RegionData {
    int cn = 0;
    int kn = 0;
    int K = 1;
    Mask mask{Mask::all(1)};
    std::vector<double> thresholds;
    const CoarseSet* cs = nullptr;
    std::vector<Grid> u;                     // -log d, clamped, per pair
    std::vector<Grid> lnu;                   // log of the above
    std::vector<std::vector<int>> region;    // per pair, per pixel
    std::vector<long long> region_pixels;    // over full coarse images
    // Per-region centers of u and log u. The emission map is evaluated as
    // exp(-alpha (u - u0) + beta (log u - l0)), which makes the amplitude
    // coordinates carry the overall scale while alpha/beta only reshape;
    // without this the normalization offset in u turns alpha into a second,
    // badly scaled amplitude and the line search dives into a dead basin.
    std::vector<double> u0, l0;
};

RegionData build_region_data(const CoarseSet& cs, int K, std::vector<double> thresholds,
                             bool centered) {
    RegionData rd;
    rd.cn = cs.cn;
    rd.kn = 2 * cs.cn - 1;
    rd.K = K;
    rd.mask = cs.mask;
    rd.thresholds = std::move(thresholds);
    rd.cs = &cs;
    rd.region_pixels.assign(K, 0);
    rd.u0.assign(K, 0.0);
    rd.l0.assign(K, 0.0);
    for (const Grid& d : cs.d) {
        Grid u(cs.cn), lnu(cs.cn);
        std::vector<int> reg(d.npix());
        for (int i = 0; i < d.npix(); ++i) {
            const double ui = neg_log(d.vec()[i]);
            u.vec()[i] = ui;
            lnu.vec()[i] = std::log(ui);
            reg[i] = region_of(ui, rd.thresholds);
            ++rd.region_pixels[reg[i]];
            if (centered) {
                rd.u0[reg[i]] += ui;
                rd.l0[reg[i]] += lnu.vec()[i];
            }
        }
        rd.u.push_back(std::move(u));
        rd.lnu.push_back(std::move(lnu));
        rd.region.push_back(std::move(reg));
    }
    if (centered)
        for (int k = 0; k < K; ++k)
            if (rd.region_pixels[k] > 0) {
                rd.u0[k] /= static_cast<double>(rd.region_pixels[k]);
                rd.l0[k] /= static_cast<double>(rd.region_pixels[k]);
            }
    return rd;
}

// scale factor between raw and centered amplitude coordinates for one region
double center_scale(const RegionData& rd, int k, double alpha, double beta) {
    return std::exp(-alpha * rd.u0[k] + beta * rd.l0[k]);
}

// parameter packing: [a, b, log sigma1, log sigma2, alpha, beta] per region
constexpr int kParamsPerRegion = 6;

GaussPairParams unpack_region(const std::vector<double>& x, int k) {
    GaussPairParams p;
    p.a = x[kParamsPerRegion * k + 0];
    p.b = x[kParamsPerRegion * k + 1];
    p.sigma1 = std::exp(x[kParamsPerRegion * k + 2]);
    p.sigma2 = std::exp(x[kParamsPerRegion * k + 3]);
    p.alpha = x[kParamsPerRegion * k + 4];
    p.beta = x[kParamsPerRegion * k + 5];
    return p;
}

double region_objective(const RegionData& rd, FftConvolver& conv, const std::vector<double>& x,
                        std::vector<double>& grad) {
    const int cn = rd.cn;
    const int kn = rd.kn;
    const int K = rd.K;
    const int kc = cn - 1;
    std::fill(grad.begin(), grad.end(), 0.0);

    std::vector<GaussPairParams> prm(K);
    std::vector<Grid> g1, g2, dg1, dg2;  // unit Gaussians and their log-width derivatives
    std::vector<FreqImage> kf(K);
    for (int k = 0; k < K; ++k) {
        prm[k] = unpack_region(x, k);
        GaussPairParams unit1 = prm[k], unit2 = prm[k];
        unit1.a = 1.0;
        unit1.b = 0.0;
        unit2.a = 0.0;
        unit2.b = 1.0;
        Grid gk1 = gaussian_pair_kernel(unit1, kn, kc);
        Grid gk2 = gaussian_pair_kernel(unit2, kn, kc);
        Grid dk1(kn), dk2(kn);
        const double is1 = 1.0 / (prm[k].sigma1 * prm[k].sigma1);
        const double is2 = 1.0 / (prm[k].sigma2 * prm[k].sigma2);
        for (int r = 0; r < kn; ++r) {
            for (int c = 0; c < kn; ++c) {
                const double rho2 = static_cast<double>(r - kc) * (r - kc) +
                                    static_cast<double>(c - kc) * (c - kc);
                dk1.at(r, c) = gk1.at(r, c) * (rho2 * is1 - 1.0);
                dk2.at(r, c) = gk2.at(r, c) * (rho2 * is2 - 1.0);
            }
        }
        Grid kernel(kn);
        for (int i = 0; i < kernel.npix(); ++i)
            kernel.vec()[i] = prm[k].a * gk1.vec()[i] + prm[k].b * gk2.vec()[i];
        kf[k] = conv.transform(kernel);
        g1.push_back(std::move(gk1));
        g2.push_back(std::move(gk2));
        dg1.push_back(std::move(dk1));
        dg2.push_back(std::move(dk2));
    }

    double obj = 0.0;
    const int T = static_cast<int>(rd.cs->d.size());
    for (int t = 0; t < T; ++t) {
        // per-region emission maps exp(-alpha u + beta log u)
        std::vector<Grid> feat(K, Grid(cn));
        const Grid& ut = rd.u[t];
        const Grid& lt = rd.lnu[t];
        const std::vector<int>& reg = rd.region[t];
        for (int i = 0; i < ut.npix(); ++i) {
            const int k = reg[i];
            feat[k].vec()[i] = std::exp(-prm[k].alpha * (ut.vec()[i] - rd.u0[k]) +
                                        prm[k].beta * (lt.vec()[i] - rd.l0[k]));
        }
        std::vector<FreqImage> ff(K);
        FreqImage acc;
        for (int k = 0; k < K; ++k) {
            ff[k] = conv.transform(feat[k]);
            if (acc.empty())
                acc.assign(ff[k].size(), std::complex<double>(0.0, 0.0));
            for (size_t i = 0; i < acc.size(); ++i) acc[i] += ff[k][i] * kf[k][i];
        }
        Grid pred = conv.invert(acc, cn, kc);
        Grid resid(cn);
        for (int i = 0; i < pred.npix(); ++i) {
            const double r = rd.mask.at(i) ? pred.vec()[i] - rd.cs->s[t].vec()[i] : 0.0;
            resid.vec()[i] = r;
            obj += r * r;
        }
        if (!std::isfinite(obj)) return obj;  // let the line search back off

        FreqImage rf = conv.transform(resid);
        for (int k = 0; k < K; ++k) {
            // kernel-shaped correlation of the residual with this region's
            // emission: the gradient against any kernel perturbation
            FreqImage fflip = conv.transform(FftConvolver::flip(feat[k]));
            Grid kt = conv.multiply_invert(rf, fflip, kn, 0);
            grad[kParamsPerRegion * k + 0] += 2.0 * dot(kt, g1[k]);
            grad[kParamsPerRegion * k + 1] += 2.0 * dot(kt, g2[k]);
            grad[kParamsPerRegion * k + 2] += 2.0 * prm[k].a * dot(kt, dg1[k]);
            grad[kParamsPerRegion * k + 3] += 2.0 * prm[k].b * dot(kt, dg2[k]);
            // exponent side: the kernel is centrally symmetric, so the
            // image-shaped adjoint is just another "same" convolution
            Grid z = conv.multiply_invert(rf, kf[k], cn, kc);
            double da = 0.0, db = 0.0;
            for (int i = 0; i < z.npix(); ++i) {
                if (reg[i] != k) continue;
                const double zf = z.vec()[i] * feat[k].vec()[i];
                da += zf * (rd.u0[k] - ut.vec()[i]);
                db += zf * (lt.vec()[i] - rd.l0[k]);
            }
            grad[kParamsPerRegion * k + 4] += 2.0 * da;
            grad[kParamsPerRegion * k + 5] += 2.0 * db;
        }
    }
    return obj;
}

struct RegionFitResult {
    std::vector<GaussPairParams> regions;
    std::vector<double> thresholds;
    std::vector<int> empty_regions;
    double obj_init = 0.0;
    double obj_final = 0.0;
};

RegionFitResult fit_regions(const CoarseSet& cs, int K, const FitOptions& opt) {
    if (K < 1) throw ConfigError("region fit: region count must be at least 1");
    std::vector<double> thresholds;
    if (K > 1) {
        // quantile thresholds of -log d over the masked training pixels,
        // frozen before any optimization
        std::vector<double> vals;
        for (const Grid& d : cs.d)
            for (int i = 0; i < d.npix(); ++i)
                if (cs.mask.at(i)) vals.push_back(neg_log(d.vec()[i]));
        if (vals.empty()) throw ConfigError("region fit: mask selects no pixels");
        std::sort(vals.begin(), vals.end());
        const size_t n = vals.size();
        for (int k = 1; k < K; ++k) {
            size_t idx = n * static_cast<size_t>(k) / static_cast<size_t>(K);
            if (idx >= n) idx = n - 1;
            thresholds.push_back(vals[idx]);
        }
    }
    RegionData rd = build_region_data(cs, K, thresholds, /*centered=*/true);

    RegionFitResult out;
    out.thresholds = rd.thresholds;
    for (int k = 0; k < K; ++k)
        if (rd.region_pixels[k] == 0) out.empty_regions.push_back(k);
    if (!out.empty_regions.empty())
        std::fprintf(stderr, "warning: %zu of %d intensity regions have no pixels; "
                             "their parameters stay at the initial values\n",
                     out.empty_regions.size(), K);

    // the initial point expressed in the centered amplitude coordinates
    std::vector<double> x0(static_cast<size_t>(kParamsPerRegion) * K);
    const GaussPairParams init;
    for (int k = 0; k < K; ++k) {
        const double s = center_scale(rd, k, init.alpha, init.beta);
        x0[kParamsPerRegion * k + 0] = init.a * s;
        x0[kParamsPerRegion * k + 1] = init.b * s;
        x0[kParamsPerRegion * k + 2] = std::log(init.sigma1);
        x0[kParamsPerRegion * k + 3] = std::log(init.sigma2);
        x0[kParamsPerRegion * k + 4] = init.alpha;
        x0[kParamsPerRegion * k + 5] = init.beta;
    }

    FftConvolver conv(cs.cn);
    LbfgsReport report;
    std::vector<double> x = lbfgs_minimize(
        [&](const std::vector<double>& p, std::vector<double>& g) {
            return region_objective(rd, conv, p, g);
        },
        x0, opt.lbfgs, &report);
    out.obj_init = report.f_init;
    out.obj_final = report.f_final;
    out.regions.resize(K);
    for (int k = 0; k < K; ++k) {
        out.regions[k] = unpack_region(x, k);
        const double s = center_scale(rd, k, out.regions[k].alpha, out.regions[k].beta);
        out.regions[k].a /= s;
        out.regions[k].b /= s;
    }
    return out;
}

// coarse-grid prediction used by apply_model and fit_objective
Grid coarse_predict(const ScatterModel& m, const Grid& dc) {
    const int cn = m.ctx.coarse_n;
    if (dc.n() != cn) throw ConfigError("model predict: wrong coarse grid size");
    if (const auto* sf = std::get_if<SingleFieldModel>(&m.impl)) return sf->s_hat;
    if (const auto* cv = std::get_if<ConvolutionalModel>(&m.impl)) {
        FftConvolver conv(cn);
        return conv.conv_same(amplitude_map(dc, 1.0, 1.0), cv->kernel);
    }
    if (const auto* pk = std::get_if<ParametricModel>(&m.impl)) {
        FftConvolver conv(cn);
        Grid kernel = gaussian_pair_kernel(pk->p, 2 * cn - 1, cn - 1);
        return conv.conv_same(amplitude_map(dc, pk->p.alpha, pk->p.beta), kernel);
    }
    const auto& mk = std::get<MultiKernelModel>(m.impl);
    FftConvolver conv(cn);
    const int K = static_cast<int>(mk.regions.size());
    FreqImage acc;
    for (int k = 0; k < K; ++k) {
        Grid feat(cn);
        for (int i = 0; i < dc.npix(); ++i) {
            const double u = neg_log(dc.vec()[i]);
            if (region_of(u, mk.thresholds) != k) continue;
            feat.vec()[i] =
                std::exp(-mk.regions[k].alpha * u + mk.regions[k].beta * std::log(u));
        }
        FreqImage ff = conv.transform(feat);
        FreqImage kf = conv.transform(gaussian_pair_kernel(mk.regions[k], 2 * cn - 1, cn - 1));
        if (acc.empty()) acc.assign(ff.size(), std::complex<double>(0.0, 0.0));
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += ff[i] * kf[i];
    }
    return conv.invert(acc, cn, cn - 1);
}

}  // namespace

ScatterModel fit_single_field(const std::vector<const RadPair*>& pairs, const ModelContext& ctx) {
    CoarseSet cs = make_coarse(pairs, ctx);
    SingleFieldModel m;
    m.s_hat = Grid(cs.cn);
    const double inv_t = 1.0 / static_cast<double>(cs.s.size());
    for (const Grid& s : cs.s)
        for (int i = 0; i < s.npix(); ++i) m.s_hat.vec()[i] += s.vec()[i] * inv_t;
    zero_outside(m.s_hat, cs.mask);
    return ScatterModel{ctx, std::move(m)};
}

ScatterModel fit_convolutional(const std::vector<const RadPair*>& pairs, const ModelContext& ctx,
                               const FitOptions& opt) {
    CoarseSet cs = make_coarse(pairs, ctx);
    const int cn = cs.cn;
    const int kn = 2 * cn - 1;
    const int T = static_cast<int>(cs.d.size());
    const int npix = cn * cn;

    FftConvolver conv(cn);
    std::vector<FreqImage> feat_f(T), feat_flip_f(T);
    double feat_max = 0.0;
    for (int t = 0; t < T; ++t) {
        Grid f = amplitude_map(cs.d[t], 1.0, 1.0);
        feat_max = std::max(feat_max, max_abs(f));
        feat_f[t] = conv.transform(f);
        feat_flip_f[t] = conv.transform(FftConvolver::flip(f));
    }
    if (!(feat_max > 0.0))
        throw NumericalError("convolutional fit: emission maps are identically zero");

    std::vector<double> b(static_cast<size_t>(T) * npix, 0.0);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < npix; ++i)
            if (cs.mask.at(i)) b[static_cast<size_t>(t) * npix + i] = cs.s[t].vec()[i];

    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        Grid k(kn);
        std::copy(x.begin(), x.end(), k.vec().begin());
        FreqImage kf = conv.transform(k);
        for (int t = 0; t < T; ++t) {
            Grid pred = conv.multiply_invert(feat_f[t], kf, cn, cn - 1);
            for (int i = 0; i < npix; ++i)
                y[static_cast<size_t>(t) * npix + i] = cs.mask.at(i) ? pred.vec()[i] : 0.0;
        }
    };
    auto applyT = [&](const std::vector<double>& r, std::vector<double>& y) {
        FreqImage acc;
        Grid rt(cn);
        for (int t = 0; t < T; ++t) {
            for (int i = 0; i < npix; ++i)
                rt.vec()[i] = cs.mask.at(i) ? r[static_cast<size_t>(t) * npix + i] : 0.0;
            FreqImage rf = conv.transform(rt);
            if (acc.empty()) acc.assign(rf.size(), std::complex<double>(0.0, 0.0));
            for (size_t i = 0; i < acc.size(); ++i) acc[i] += rf[i] * feat_flip_f[t][i];
        }
        Grid g = conv.invert(acc, kn, 0);
        std::copy(g.vec().begin(), g.vec().end(), y.begin());
    };

    ConvolutionalModel m;
    std::vector<double> k = cg_least_squares(apply, applyT, b, kn * kn, opt.cg_iters,
                                             &m.objective_trace);
    m.kernel = Grid(kn);
    std::copy(k.begin(), k.end(), m.kernel.vec().begin());
    return ScatterModel{ctx, std::move(m)};
}

ScatterModel fit_parametric(const std::vector<const RadPair*>& pairs, const ModelContext& ctx,
                            const FitOptions& opt) {
    CoarseSet cs = make_coarse(pairs, ctx);
    RegionFitResult r = fit_regions(cs, 1, opt);
    ParametricModel m;
    m.p = r.regions[0];
    m.obj_init = r.obj_init;
    m.obj_final = r.obj_final;
    return ScatterModel{ctx, std::move(m)};
}

ScatterModel fit_multikernel(const std::vector<const RadPair*>& pairs, const ModelContext& ctx,
                             const FitOptions& opt) {
    CoarseSet cs = make_coarse(pairs, ctx);
    RegionFitResult r = fit_regions(cs, opt.regions, opt);
    MultiKernelModel m;
    m.thresholds = std::move(r.thresholds);
    m.regions = std::move(r.regions);
    m.obj_init = r.obj_init;
    m.obj_final = r.obj_final;
    m.empty_regions = std::move(r.empty_regions);
    return ScatterModel{ctx, std::move(m)};
}

ScatterModel fit_model(ModelClass cls, const std::vector<const RadPair*>& pairs,
                       const ModelContext& ctx, const FitOptions& opt) {
    switch (cls) {
        case ModelClass::single_field: return fit_single_field(pairs, ctx);
        case ModelClass::convolutional: return fit_convolutional(pairs, ctx, opt);
        case ModelClass::parametric: return fit_parametric(pairs, ctx, opt);
        case ModelClass::multikernel: return fit_multikernel(pairs, ctx, opt);
    }
    throw ConfigError("fit_model: unknown model class");
}

Radiograph apply_model(const ScatterModel& m, const Radiograph& d) {
    if (d.img.n() != m.ctx.full_n)
        throw ConfigError("apply_model: radiograph does not match the model grid");
    Grid dc = downsample4(scaled(d.img, 1.0 / m.ctx.norms.direct_norm));
    Grid sc = coarse_predict(m, dc);
    Grid up = upsample_bilinear(sc, m.ctx.full_n);
    scale_inplace(up, m.ctx.norms.scatter_norm);
    return Radiograph{std::move(up), d.pitch, d.roi_radius};
}

double fit_objective(const ScatterModel& m, const std::vector<const RadPair*>& pairs) {
    CoarseSet cs = make_coarse(pairs, m.ctx);
    double obj = 0.0;
    for (size_t t = 0; t < cs.d.size(); ++t) {
        Grid pred = coarse_predict(m, cs.d[t]);
        for (int i = 0; i < pred.npix(); ++i) {
            if (!cs.mask.at(i)) continue;
            const double r = pred.vec()[i] - cs.s[t].vec()[i];
            obj += r * r;
        }
    }
    return obj;
}

double kernel_fit_objective(const std::vector<const RadPair*>& pairs, const ModelContext& ctx,
                            const std::vector<double>& thresholds, const std::vector<double>& x,
                            std::vector<double>* grad) {
    const int K = static_cast<int>(thresholds.size()) + 1;
    if (x.size() != static_cast<size_t>(kParamsPerRegion) * K)
        throw ConfigError("kernel objective: parameter vector length must be 6 per region");
    CoarseSet cs = make_coarse(pairs, ctx);
    RegionData rd = build_region_data(cs, K, thresholds, /*centered=*/false);
    FftConvolver conv(cs.cn);
    std::vector<double> g(x.size(), 0.0);
    const double f = region_objective(rd, conv, x, g);
    if (grad) *grad = std::move(g);
    return f;
}

namespace {

json params_to_json(const GaussPairParams& p) {
    return json{{"a", p.a},         {"b", p.b},       {"sigma1_px", p.sigma1},
                {"sigma2_px", p.sigma2}, {"alpha", p.alpha}, {"beta", p.beta}};
}

GaussPairParams params_from_json(const json& j) {
    GaussPairParams p;
    p.a = j.at("a").get<double>();
    p.b = j.at("b").get<double>();
    p.sigma1 = j.at("sigma1_px").get<double>();
    p.sigma2 = j.at("sigma2_px").get<double>();
    p.alpha = j.at("alpha").get<double>();
    p.beta = j.at("beta").get<double>();
    return p;
}

std::string payload_name(const std::filesystem::path& json_path, const char* tag) {
    return json_path.stem().string() + "." + tag + ".f32";
}

}  // namespace

void save_model(const ScatterModel& m, const std::filesystem::path& json_path) {
    json j;
    j["schema_version"] = 1;
    j["model"] = to_string(m.cls());
    j["context"] = {{"grid_size", m.ctx.full_n},
                    {"coarse_size", m.ctx.coarse_n},
                    {"pixel_pitch", m.ctx.pitch},
                    {"roi_radius", m.ctx.roi_radius},
                    {"direct_norm", m.ctx.norms.direct_norm},
                    {"scatter_norm", m.ctx.norms.scatter_norm}};
    const auto dir = json_path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    if (const auto* sf = std::get_if<SingleFieldModel>(&m.impl)) {
        const std::string name = payload_name(json_path, "field");
        write_f32(dir / name, sf->s_hat);
        j["field_file"] = name;
    } else if (const auto* cv = std::get_if<ConvolutionalModel>(&m.impl)) {
        const std::string name = payload_name(json_path, "kernel");
        write_f32(dir / name, cv->kernel);
        j["kernel_file"] = name;
        j["objective_trace"] = cv->objective_trace;
    } else if (const auto* pk = std::get_if<ParametricModel>(&m.impl)) {
        j["params"] = params_to_json(pk->p);
        j["objective"] = {{"initial", pk->obj_init}, {"final", pk->obj_final}};
    } else {
        const auto& mk = std::get<MultiKernelModel>(m.impl);
        j["thresholds"] = mk.thresholds;
        json regions = json::array();
        for (const auto& p : mk.regions) regions.push_back(params_to_json(p));
        j["regions"] = regions;
        j["objective"] = {{"initial", mk.obj_init}, {"final", mk.obj_final}};
        j["empty_regions"] = mk.empty_regions;
    }
    std::ofstream out(json_path);
    if (!out) throw ConfigError("cannot write model file " + json_path.string());
    out << j.dump(2) << "\n";
}

ScatterModel load_model(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw ConfigError("cannot open model file " + json_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("model file " + json_path.string() + ": " + e.what());
    }
    try {
        const auto& c = j.at("context");
        NormalizationConstants norms{c.at("direct_norm").get<double>(),
                                     c.at("scatter_norm").get<double>()};
        ModelContext ctx = make_context(c.at("grid_size").get<int>(),
                                        c.at("pixel_pitch").get<double>(),
                                        c.at("roi_radius").get<double>(), norms);
        if (ctx.coarse_n != c.at("coarse_size").get<int>())
            throw ConfigError("model file: inconsistent coarse grid size");
        const auto dir = json_path.parent_path();
        const ModelClass cls = model_class_from_string(j.at("model").get<std::string>());
        ScatterModel m{ctx, SingleFieldModel{}};
        switch (cls) {
            case ModelClass::single_field: {
                SingleFieldModel sf;
                sf.s_hat = read_f32(dir / j.at("field_file").get<std::string>(), ctx.coarse_n);
                m.impl = std::move(sf);
                break;
            }
            case ModelClass::convolutional: {
                ConvolutionalModel cv;
                cv.kernel = read_f32(dir / j.at("kernel_file").get<std::string>(),
                                     2 * ctx.coarse_n - 1);
                if (j.contains("objective_trace"))
                    cv.objective_trace = j.at("objective_trace").get<std::vector<double>>();
                m.impl = std::move(cv);
                break;
            }
            case ModelClass::parametric: {
                ParametricModel pk;
                pk.p = params_from_json(j.at("params"));
                pk.obj_init = j.at("objective").at("initial").get<double>();
                pk.obj_final = j.at("objective").at("final").get<double>();
                m.impl = std::move(pk);
                break;
            }
            case ModelClass::multikernel: {
                MultiKernelModel mk;
                mk.thresholds = j.at("thresholds").get<std::vector<double>>();
                for (const auto& rj : j.at("regions")) mk.regions.push_back(params_from_json(rj));
                mk.obj_init = j.at("objective").at("initial").get<double>();
                mk.obj_final = j.at("objective").at("final").get<double>();
                if (j.contains("empty_regions"))
                    mk.empty_regions = j.at("empty_regions").get<std::vector<int>>();
                m.impl = std::move(mk);
                break;
            }
        }
        return m;
    } catch (const json::exception& e) {
        throw ConfigError("model file " + json_path.string() + ": " + e.what());
    }
}

}  // namespace descatter
