#pragma once

#include <vector>

#include "descatter/models.hpp"

namespace descatter {

// Training pairs plus the set-level Frobenius normalization constants and the
// cached per-pair norms the neighbor search needs.
struct TrainingSet {
    std::vector<RadPair> pairs;
    NormalizationConstants norms;
    Mask mask;                  // full-resolution ROI disk
    bool nn_use_mask = true;    // restrict neighbor distances to the ROI
    std::vector<double> d_sq;   // per-pair (masked) squared norms of directs

    static TrainingSet build(std::vector<RadPair> pairs, bool nn_use_mask = true);
    TrainingSet with_pair(RadPair p) const;

    int grid() const;
    double pitch() const;
    ModelContext context() const;
    size_t size() const { return pairs.size(); }
};

// indices of the g nearest training directs by squared Frobenius distance,
// closest first, ties broken toward the lower index
std::vector<int> nearest_neighbors(const Grid& query, const TrainingSet& ts, int g);

// fit on exactly the g nearest pairs (set norms, not subset norms); the
// selected indices are fitted in ascending order so g == size() reproduces
// fit_global bit for bit
ScatterModel fit_local(const Radiograph& query, const TrainingSet& ts, int g, ModelClass cls,
                       const FitOptions& opt);
ScatterModel fit_global(const TrainingSet& ts, ModelClass cls, const FitOptions& opt);

}  // namespace descatter
