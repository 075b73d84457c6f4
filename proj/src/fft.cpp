#include "descatter/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

#include "descatter/errors.hpp"

namespace descatter {

namespace {
// FFTW planning is not thread safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

int next_fast_size(int n) {
    for (int s = n;; ++s) {
        int r = s;
        for (int f : {2, 3, 5, 7})
            while (r % f == 0) r /= f;
        if (r == 1) return s;
    }
}

FftConvolver::FftConvolver(int img_n) : m_(img_n) {
    if (m_ < 1) throw ConfigError("convolver: image size must be positive");
    L_ = next_fast_size(3 * m_ - 2);  // linear conv of m with 2m-1 fits
    Lc_ = L_ * (L_ / 2 + 1);
    std::lock_guard<std::mutex> lock(planner_mutex());
    rbuf_ = fftw_alloc_real(static_cast<size_t>(L_) * L_);
    cbuf_ = fftw_alloc_complex(static_cast<size_t>(Lc_));
    plan_fwd_ = fftw_plan_dft_r2c_2d(L_, L_, rbuf_, static_cast<fftw_complex*>(cbuf_),
                                     FFTW_ESTIMATE);
    plan_bwd_ = fftw_plan_dft_c2r_2d(L_, L_, static_cast<fftw_complex*>(cbuf_), rbuf_,
                                     FFTW_ESTIMATE);
    if (!plan_fwd_ || !plan_bwd_) throw NumericalError("convolver: fftw planning failed");
}

FftConvolver::~FftConvolver() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    if (plan_bwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
    fftw_free(rbuf_);
    fftw_free(cbuf_);
}

FreqImage FftConvolver::transform(const Grid& g) {
    if (g.n() > L_) throw ConfigError("convolver: operand larger than padded size");
    std::memset(rbuf_, 0, sizeof(double) * static_cast<size_t>(L_) * L_);
    for (int r = 0; r < g.n(); ++r)
        std::memcpy(rbuf_ + static_cast<size_t>(r) * L_, g.data() + static_cast<size_t>(r) * g.n(),
                    sizeof(double) * g.n());
    fftw_execute(static_cast<fftw_plan>(plan_fwd_));
    FreqImage out(Lc_);
    std::memcpy(out.data(), cbuf_, sizeof(fftw_complex) * Lc_);
    return out;
}

Grid FftConvolver::invert_buffer(int out_n, int off) {
    fftw_execute(static_cast<fftw_plan>(plan_bwd_));
    const double scale = 1.0 / (static_cast<double>(L_) * L_);
    Grid out(out_n);
    for (int r = 0; r < out_n; ++r) {
        const double* src = rbuf_ + static_cast<size_t>(r + off) * L_ + off;
        double* dst = out.data() + static_cast<size_t>(r) * out_n;
        for (int c = 0; c < out_n; ++c) dst[c] = src[c] * scale;
    }
    return out;
}

Grid FftConvolver::multiply_invert(const FreqImage& a, const FreqImage& b, int out_n, int off) {
    auto* c = static_cast<fftw_complex*>(cbuf_);
    for (int i = 0; i < Lc_; ++i) {
        std::complex<double> v = a[i] * b[i];
        c[i][0] = v.real();
        c[i][1] = v.imag();
    }
    return invert_buffer(out_n, off);
}

Grid FftConvolver::invert(const FreqImage& a, int out_n, int off) {
    auto* c = static_cast<fftw_complex*>(cbuf_);
    for (int i = 0; i < Lc_; ++i) {
        c[i][0] = a[i].real();
        c[i][1] = a[i].imag();
    }
    return invert_buffer(out_n, off);
}

Grid FftConvolver::conv_same(const Grid& img, const Grid& kernel) {
    if (img.n() != m_ || kernel.n() != 2 * m_ - 1)
        throw ConfigError("convolver: conv_same operand sizes");
    FreqImage fi = transform(img);
    FreqImage fk = transform(kernel);
    return multiply_invert(fi, fk, m_, m_ - 1);
}

Grid FftConvolver::conv_same(const FreqImage& img_f, const FreqImage& kernel_f) {
    return multiply_invert(img_f, kernel_f, m_, m_ - 1);
}

Grid FftConvolver::corr_kernel(const FreqImage& resid_f, const FreqImage& img_flip_f) {
    return multiply_invert(resid_f, img_flip_f, 2 * m_ - 1, 0);
}

Grid FftConvolver::flip(const Grid& g) {
    const int n = g.n();
    Grid out(n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) out.at(r, c) = g.at(n - 1 - r, n - 1 - c);
    return out;
}

Grid conv_same_direct(const Grid& img, const Grid& kernel) {
    const int m = img.n();
    const int kn = kernel.n();
    const int kc = (kn - 1) / 2;
    Grid out(m);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < m; ++c) {
            double s = 0.0;
            for (int i = 0; i < m; ++i) {
                const int kr = r - i + kc;
                if (kr < 0 || kr >= kn) continue;
                for (int j = 0; j < m; ++j) {
                    const int kcol = c - j + kc;
                    if (kcol < 0 || kcol >= kn) continue;
                    s += img.at(i, j) * kernel.at(kr, kcol);
                }
            }
            out.at(r, c) = s;
        }
    }
    return out;
}

}  // namespace descatter
