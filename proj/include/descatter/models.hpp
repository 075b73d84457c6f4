#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "descatter/grid.hpp"
#include "descatter/optim.hpp"

namespace descatter {

enum class ModelClass { single_field, convolutional, parametric, multikernel };
const char* to_string(ModelClass c);
ModelClass model_class_from_string(const std::string& s);

struct NormalizationConstants {
    double direct_norm = 1.0;   // Frobenius norm of the stacked training directs
    double scatter_norm = 1.0;  // same for the scatters
};

// Everything a fitted model needs to map a full-resolution radiograph onto
// the coarse fitting grid and back.
struct ModelContext {
    int full_n = 0;
    int coarse_n = 0;
    double pitch = 0.0;       // full-resolution cm/pixel
    double roi_radius = 0.0;
    NormalizationConstants norms;

    Mask coarse_mask() const;
    Mask full_mask() const;
};

ModelContext make_context(int full_n, double pitch, double roi_radius,
                          const NormalizationConstants& norms);

struct RadPair {
    Radiograph direct;
    Radiograph scatter;
};

// Pointwise amplitude factor -d^alpha (log d)^beta with d clamped to
// [1e-8, 1]. Signed power keeps the integer-beta values exact (beta=0 gives
// -d^alpha, beta=1 gives -d log d).
Grid nonlinearity(const Grid& d, double alpha, double beta);
double nonlinearity_scalar(double d, double alpha, double beta);

// Smooth positive form d^alpha |log d|^beta used inside the fitted models;
// equals nonlinearity() at beta = 1 and is differentiable in both exponents
// everywhere the optimizer goes.
Grid amplitude_map(const Grid& d, double alpha, double beta);

struct GaussPairParams {
    double a = 1.0, b = 1.0;
    double sigma1 = 4.0, sigma2 = 64.0;  // in coarse-grid pixels
    double alpha = 1.0, beta = 0.0;
};

// Sum of two centered isotropic Gaussians with 1/(sigma sqrt(2 pi))
// normalization, sampled on a size x size grid around (center, center).
Grid gaussian_pair_kernel(const GaussPairParams& p, int size, int center);

// region index in [0, K) for a value of -log(d) against ascending thresholds
int region_of(double neg_log_d, const std::vector<double>& thresholds);

struct SingleFieldModel {
    Grid s_hat;  // coarse grid, normalized units, zero outside the mask
};

struct ConvolutionalModel {
    Grid kernel;  // (2*coarse_n - 1)^2
    std::vector<double> objective_trace;
};

struct ParametricModel {
    GaussPairParams p;
    double obj_init = 0.0, obj_final = 0.0;
};

struct MultiKernelModel {
    std::vector<double> thresholds;        // K-1 ascending values on -log d
    std::vector<GaussPairParams> regions;  // K parameter sets
    double obj_init = 0.0, obj_final = 0.0;
    std::vector<int> empty_regions;        // regions with no training pixels
};

struct ScatterModel {
    ModelContext ctx;
    std::variant<SingleFieldModel, ConvolutionalModel, ParametricModel, MultiKernelModel> impl;

    ModelClass cls() const;
};

struct FitOptions {
    int cg_iters = 40;
    LbfgsOptions lbfgs;  // 20 iterations, memory 10, unit initial step
    int regions = 3;     // multikernel K
};

ScatterModel fit_single_field(const std::vector<const RadPair*>& pairs, const ModelContext& ctx);
ScatterModel fit_convolutional(const std::vector<const RadPair*>& pairs, const ModelContext& ctx,
                               const FitOptions& opt);
ScatterModel fit_parametric(const std::vector<const RadPair*>& pairs, const ModelContext& ctx,
                            const FitOptions& opt);
ScatterModel fit_multikernel(const std::vector<const RadPair*>& pairs, const ModelContext& ctx,
                             const FitOptions& opt);
ScatterModel fit_model(ModelClass cls, const std::vector<const RadPair*>& pairs,
                       const ModelContext& ctx, const FitOptions& opt);

// normalize, decimate, evaluate on the coarse grid, upsample, denormalize
Radiograph apply_model(const ScatterModel& m, const Radiograph& d);

// JSON next to any raw float32 payloads (kernel / field)
void save_model(const ScatterModel& m, const std::filesystem::path& json_path);
ScatterModel load_model(const std::filesystem::path& json_path);

// Masked residual sum of squares of a model's coarse-grid prediction against
// the normalized, downsampled training pairs (the quantity every fit
// minimizes). Exposed for tests and diagnostics.
double fit_objective(const ScatterModel& m, const std::vector<const RadPair*>& pairs);

// Objective (and, when grad is non-null, its analytic gradient) of the shared
// kernel engine behind the parametric and multikernel fits, at packed
// parameters [a, b, log sigma1, log sigma2, alpha, beta] per region. Exposed
// so the derivatives can be checked against finite differences.
double kernel_fit_objective(const std::vector<const RadPair*>& pairs, const ModelContext& ctx,
                            const std::vector<double>& thresholds, const std::vector<double>& x,
                            std::vector<double>* grad = nullptr);

}  // namespace descatter
