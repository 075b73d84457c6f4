#include "descatter/local_fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "descatter/errors.hpp"

namespace descatter {

TrainingSet TrainingSet::build(std::vector<RadPair> pairs, bool nn_use_mask) {
    if (pairs.empty()) throw ConfigError("training set: no pairs");
    const int n = pairs[0].direct.img.n();
    const double pitch = pairs[0].direct.pitch;
    const double roi = pairs[0].direct.roi_radius;
    double dsq = 0.0, ssq = 0.0;
    for (const RadPair& p : pairs) {
        if (p.direct.img.n() != n || p.scatter.img.n() != n)
            throw ConfigError("training set: inconsistent grid sizes");
        if (p.direct.pitch != pitch || p.scatter.pitch != pitch)
            throw ConfigError("training set: inconsistent pixel pitch");
        dsq += frob_norm_sq(p.direct.img);
        ssq += frob_norm_sq(p.scatter.img);
    }
    if (!(dsq > 0.0)) throw NumericalError("training set: zero stacked direct norm");

    TrainingSet ts;
    ts.pairs = std::move(pairs);
    // an all-zero scatter set is legitimate (scatter-free data); skip the
    // normalization rather than divide by zero
    ts.norms = {std::sqrt(dsq), ssq > 0.0 ? std::sqrt(ssq) : 1.0};
    ts.mask = Mask::disk(n, pitch, roi);
    ts.nn_use_mask = nn_use_mask;
    ts.d_sq.reserve(ts.pairs.size());
    for (const RadPair& p : ts.pairs)
        ts.d_sq.push_back(nn_use_mask ? masked_norm_sq(p.direct.img, ts.mask)
                                      : frob_norm_sq(p.direct.img));
    return ts;
}

TrainingSet TrainingSet::with_pair(RadPair p) const {
    std::vector<RadPair> all = pairs;
    all.push_back(std::move(p));
    return build(std::move(all), nn_use_mask);
}

int TrainingSet::grid() const { return pairs[0].direct.img.n(); }
double TrainingSet::pitch() const { return pairs[0].direct.pitch; }

ModelContext TrainingSet::context() const {
    return make_context(grid(), pitch(), pairs[0].direct.roi_radius, norms);
}

std::vector<int> nearest_neighbors(const Grid& query, const TrainingSet& ts, int g) {
    if (g < 1 || g > static_cast<int>(ts.size()))
        throw ConfigError("neighbor search: count out of range");
    if (query.n() != ts.grid()) throw ConfigError("neighbor search: grid size mismatch");
    const double q_sq = ts.nn_use_mask ? masked_norm_sq(query, ts.mask) : frob_norm_sq(query);
    std::vector<double> dist(ts.size());
    for (size_t t = 0; t < ts.size(); ++t) {
        const double qd = ts.nn_use_mask ? masked_dot(query, ts.pairs[t].direct.img, ts.mask)
                                         : dot(query, ts.pairs[t].direct.img);
        dist[t] = q_sq - 2.0 * qd + ts.d_sq[t];
    }
    std::vector<int> idx(ts.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (dist[a] != dist[b]) return dist[a] < dist[b];
        return a < b;
    });
    idx.resize(g);
    return idx;
}

namespace {

ScatterModel fit_indices(const TrainingSet& ts, std::vector<int> idx, ModelClass cls,
                         const FitOptions& opt) {
    std::sort(idx.begin(), idx.end());
    std::vector<const RadPair*> sel;
    sel.reserve(idx.size());
    for (int i : idx) sel.push_back(&ts.pairs[i]);
    return fit_model(cls, sel, ts.context(), opt);
}

}  // namespace

ScatterModel fit_local(const Radiograph& query, const TrainingSet& ts, int g, ModelClass cls,
                       const FitOptions& opt) {
    return fit_indices(ts, nearest_neighbors(query.img, ts, g), cls, opt);
}

ScatterModel fit_global(const TrainingSet& ts, ModelClass cls, const FitOptions& opt) {
    std::vector<int> idx(ts.size());
    std::iota(idx.begin(), idx.end(), 0);
    return fit_indices(ts, std::move(idx), cls, opt);
}

}  // namespace descatter
