#pragma once

#include <functional>
#include <vector>

namespace descatter {

// Linear least squares min_x ||A x - b||^2 by conjugate gradient on the
// normal equations, started from x = 0. `apply` is A (R^n -> R^m), `applyT`
// its adjoint. The residual norm ||A x - b||^2 after each iteration lands in
// *trace when given; it is nonincreasing.
std::vector<double> cg_least_squares(
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& applyT,
    const std::vector<double>& b, int n, int iters, std::vector<double>* trace = nullptr);

struct LbfgsOptions {
    int iters = 20;
    int memory = 10;
    double step0 = 1.0;       // initial trial step each iteration
    double c1 = 1e-4;         // Armijo constant
    double shrink = 0.5;      // backtracking factor
    int max_backtracks = 40;
};

struct LbfgsReport {
    double f_init = 0.0;
    double f_final = 0.0;
    int iters = 0;
    int evals = 0;
    bool stalled = false;  // line search gave up before the iteration budget
};

// L-BFGS with Armijo backtracking. fg returns the objective and fills the
// gradient. Never accepts an increase, so f_final <= f_init.
std::vector<double> lbfgs_minimize(
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& fg,
    std::vector<double> x0, const LbfgsOptions& opt, LbfgsReport* report = nullptr);

}  // namespace descatter
