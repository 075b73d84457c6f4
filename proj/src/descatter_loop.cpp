#include "descatter/descatter.hpp"

#include <algorithm>
#include <functional>

#include "descatter/errors.hpp"

namespace descatter {

const char* to_string(FitMode m) { return m == FitMode::local ? "local" : "global"; }

FitMode fit_mode_from_string(const std::string& s) {
    if (s == "local") return FitMode::local;
    if (s == "global") return FitMode::global;
    throw ConfigError("unknown fit mode '" + s + "'");
}

double nmse(const Radiograph& d, const Radiograph& s_hat, const Radiograph& t) {
    if (!d.img.same_shape(t.img) || !s_hat.img.same_shape(t.img))
        throw ConfigError("nmse: shape mismatch");
    const Mask m = t.roi();
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < t.img.npix(); ++i) {
        if (!m.at(i)) continue;
        const double r = d.img.vec()[i] + s_hat.img.vec()[i] - t.img.vec()[i];
        num += r * r;
        den += t.img.vec()[i] * t.img.vec()[i];
    }
    if (!(den > 0.0)) throw NumericalError("nmse: reference is zero over the mask");
    return num / den;
}

namespace {

void run_loop(const Radiograph& t, int iters, double early_stop,
              const std::function<const ScatterModel&(const Radiograph& d, int it)>& fit,
              DescatterTrace& trace) {
    if (iters < 1) throw ConfigError("descatter: iteration count must be positive");
    Radiograph d = t;
    for (int it = 0; it < iters; ++it) {
        const ScatterModel& model = fit(d, it);
        Radiograph s_hat = apply_model(model, d);
        trace.nmse.push_back(nmse(d, s_hat, t));
        Grid next(t.img.n());
        for (size_t i = 0; i < next.npix(); ++i)
            next.vec()[i] = std::max(0.0, t.img.vec()[i] - s_hat.img.vec()[i]);
        d = t.like(std::move(next));
        if (early_stop > 0.0 && trace.nmse.back() <= early_stop) break;
    }
    trace.final_direct = std::move(d);
}

}  // namespace

DescatterTrace descatter(const Radiograph& t, const TrainingSet& ts, const DescatterOptions& opt) {
    if (t.img.n() != ts.grid()) throw ConfigError("descatter: grid size mismatch");
    DescatterTrace trace;
    std::optional<ScatterModel> model;
    std::vector<int> last_sorted;

    auto fit = [&](const Radiograph& d, int) -> const ScatterModel& {
        if (opt.mode == FitMode::global) {
            if (!model) {
                model = fit_global(ts, opt.model, opt.fit);
                ++trace.refit_count;
            }
            return *model;
        }
        const Grid& q = opt.nn_on_total ? t.img : d.img;
        std::vector<int> nb = nearest_neighbors(q, ts, opt.neighbors);
        trace.neighbors.push_back(nb);
        std::vector<int> sorted = nb;
        std::sort(sorted.begin(), sorted.end());
        if (!model || sorted != last_sorted) {
            std::vector<const RadPair*> sel;
            for (int i : sorted) sel.push_back(&ts.pairs[i]);
            model = fit_model(opt.model, sel, ts.context(), opt.fit);
            last_sorted = std::move(sorted);
            ++trace.refit_count;
        }
        return *model;
    };

    run_loop(t, opt.iters, opt.early_stop_nmse, fit, trace);
    trace.model = std::move(model);
    return trace;
}

DescatterTrace descatter_with_model(const Radiograph& t, const ScatterModel& model, int iters,
                                    double early_stop_nmse) {
    DescatterTrace trace;
    run_loop(
        t, iters, early_stop_nmse,
        [&](const Radiograph&, int) -> const ScatterModel& { return model; }, trace);
    trace.model = model;
    return trace;
}

}  // namespace descatter
