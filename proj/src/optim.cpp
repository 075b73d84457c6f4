#include "descatter/optim.hpp"

#include <cmath>
#include <deque>

#include "descatter/errors.hpp"

namespace descatter {

namespace {
double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}
}  // namespace

std::vector<double> cg_least_squares(
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& applyT,
    const std::vector<double>& b, int n, int iters, std::vector<double>* trace) {
    std::vector<double> x(n, 0.0);
    std::vector<double> r = b;           // residual b - A x
    std::vector<double> s(n), q, p;
    applyT(r, s);
    p = s;
    double gamma = vdot(s, s);
    if (!(gamma > 0.0)) {
        if (!std::isfinite(gamma)) throw NumericalError("cg: non-finite normal residual");
        // A^T b == 0: zero is already optimal
        if (trace) trace->assign(iters, vdot(r, r));
        return x;
    }
    q.resize(r.size());
    for (int it = 0; it < iters; ++it) {
        apply(p, q);
        double qq = vdot(q, q);
        if (!(qq > 0.0)) break;  // p in the null space, nothing left to gain
        double alpha = gamma / qq;
        for (size_t i = 0; i < x.size(); ++i) x[i] += alpha * p[i];
        for (size_t i = 0; i < r.size(); ++i) r[i] -= alpha * q[i];
        if (trace) trace->push_back(vdot(r, r));
        applyT(r, s);
        double gamma_new = vdot(s, s);
        if (!std::isfinite(gamma_new)) throw NumericalError("cg: diverged");
        double beta = gamma_new / gamma;
        gamma = gamma_new;
        for (size_t i = 0; i < p.size(); ++i) p[i] = s[i] + beta * p[i];
    }
    return x;
}

std::vector<double> lbfgs_minimize(
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& fg,
    std::vector<double> x0, const LbfgsOptions& opt, LbfgsReport* report) {
    const size_t n = x0.size();
    std::vector<double> x = std::move(x0);
    std::vector<double> g(n), g_new(n), p(n), x_new(n);

    double f = fg(x, g);
    if (!std::isfinite(f)) throw NumericalError("lbfgs: objective not finite at start");
    LbfgsReport rep;
    rep.f_init = f;
    rep.evals = 1;

    std::deque<std::vector<double>> S, Y;
    std::deque<double> rho;

    for (int it = 0; it < opt.iters; ++it) {
        // two-loop recursion
        p = g;
        std::vector<double> alpha(S.size());
        for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
            alpha[i] = rho[i] * vdot(S[i], p);
            for (size_t k = 0; k < n; ++k) p[k] -= alpha[i] * Y[i][k];
        }
        if (!S.empty()) {
            double gamma = vdot(S.back(), Y.back()) / vdot(Y.back(), Y.back());
            for (double& v : p) v *= gamma;
        } else {
            // no curvature information yet: cap the first trial step at unit
            // length so one oversized gradient cannot vault the minimizer
            // into a flat far-away basin the line search would accept
            const double norm = std::sqrt(vdot(p, p));
            if (norm > 1.0)
                for (double& v : p) v /= norm;
        }
        for (size_t i = 0; i < S.size(); ++i) {
            double beta = rho[i] * vdot(Y[i], p);
            for (size_t k = 0; k < n; ++k) p[k] += (alpha[i] - beta) * S[i][k];
        }
        for (double& v : p) v = -v;

        double slope = vdot(g, p);
        if (slope >= 0.0) {  // not a descent direction; fall back to steepest
            double norm = 0.0;
            for (size_t k = 0; k < n; ++k) p[k] = -g[k];
            slope = vdot(g, p);
            if (slope >= 0.0) break;  // gradient is zero
            norm = std::sqrt(-slope);
            if (norm > 1.0) {
                for (double& v : p) v /= norm;
                slope /= norm;
            }
        }

        // Armijo backtracking from the unit step
        double t = opt.step0;
        double f_new = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < opt.max_backtracks; ++bt) {
            for (size_t k = 0; k < n; ++k) x_new[k] = x[k] + t * p[k];
            f_new = fg(x_new, g_new);
            ++rep.evals;
            if (std::isfinite(f_new) && f_new <= f + opt.c1 * t * slope) {
                accepted = true;
                break;
            }
            t *= opt.shrink;
        }
        if (!accepted) {
            rep.stalled = true;
            break;
        }

        std::vector<double> s_vec(n), y_vec(n);
        for (size_t k = 0; k < n; ++k) {
            s_vec[k] = x_new[k] - x[k];
            y_vec[k] = g_new[k] - g[k];
        }
        double sy = vdot(s_vec, y_vec);
        double ss = vdot(s_vec, s_vec), yy = vdot(y_vec, y_vec);
        if (sy > 1e-12 * std::sqrt(ss * yy)) {  // keep the inverse Hessian positive
            S.push_back(std::move(s_vec));
            Y.push_back(std::move(y_vec));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > opt.memory) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }
        x.swap(x_new);
        g.swap(g_new);
        f = f_new;
        ++rep.iters;
    }

    rep.f_final = f;
    if (report) *report = rep;
    return x;
}

}  // namespace descatter
