#pragma once

#include <optional>
#include <vector>

#include "descatter/local_fit.hpp"

namespace descatter {

enum class FitMode { local, global };
const char* to_string(FitMode m);
FitMode fit_mode_from_string(const std::string& s);

struct DescatterOptions {
    ModelClass model = ModelClass::convolutional;
    FitMode mode = FitMode::local;
    int neighbors = 3;
    int iters = 10;
    double early_stop_nmse = 0.0;  // <= 0 disables
    bool nn_on_total = false;      // search neighbors of t instead of the iterate
    FitOptions fit;
};

struct DescatterTrace {
    std::vector<double> nmse;                 // one entry per executed iteration
    Radiograph final_direct;
    int refit_count = 0;
    std::vector<std::vector<int>> neighbors;  // per iteration, local mode only
    std::optional<ScatterModel> model;        // model in effect after the last iteration
};

// ||d + s_hat - t||^2 / ||t||^2 over the ROI mask
double nmse(const Radiograph& d, const Radiograph& s_hat, const Radiograph& t);

// Fixed-point scatter removal: start from d = t, repeatedly fit/apply the
// scatter model and set d = max(0, t - s_hat).
DescatterTrace descatter(const Radiograph& t, const TrainingSet& ts, const DescatterOptions& opt);

// same loop with a ready-made (global) model
DescatterTrace descatter_with_model(const Radiograph& t, const ScatterModel& model, int iters,
                                    double early_stop_nmse = 0.0);

}  // namespace descatter
