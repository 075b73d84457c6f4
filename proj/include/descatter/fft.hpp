#pragma once

#include <complex>
#include <vector>

#include "descatter/grid.hpp"

namespace descatter {

using FreqImage = std::vector<std::complex<double>>;

// Zero-padded linear 2D convolution machinery for one image size m, backed by
// FFTW. Kernels are (2m-1)x(2m-1), every input pixel can reach every output
// pixel. A convolver owns its scratch buffers and must not be shared across
// threads; plan creation is serialized internally.
class FftConvolver {
public:
    explicit FftConvolver(int img_n);
    ~FftConvolver();
    FftConvolver(const FftConvolver&) = delete;
    FftConvolver& operator=(const FftConvolver&) = delete;

    int img_n() const { return m_; }
    int kernel_n() const { return 2 * m_ - 1; }

    // zero-pad to the internal FFT size and transform; accepts any grid with
    // n <= 3m-2
    FreqImage transform(const Grid& g);

    // inverse transform of the pointwise product a*b, cropped to
    // out_n x out_n starting at (off, off) of the full linear result
    Grid multiply_invert(const FreqImage& a, const FreqImage& b, int out_n, int off);
    // same for a spectrum accumulated by the caller
    Grid invert(const FreqImage& a, int out_n, int off);

    // k (*) img cropped to the support of img ("same" result, m x m)
    Grid conv_same(const Grid& img, const Grid& kernel);
    Grid conv_same(const FreqImage& img_f, const FreqImage& kernel_f);
    // adjoint of conv_same with respect to the kernel: full correlation of
    // the residual with the image, (2m-1)x(2m-1)
    Grid corr_kernel(const FreqImage& resid_f, const FreqImage& img_flip_f);

    static Grid flip(const Grid& g);

private:
    Grid invert_buffer(int out_n, int off);

    int m_;
    int L_;    // padded FFT side
    int Lc_;   // L * (L/2 + 1) complex bins
    void* plan_fwd_ = nullptr;
    void* plan_bwd_ = nullptr;
    double* rbuf_ = nullptr;
    void* cbuf_ = nullptr;
};

// smallest size >= n whose factors are all in {2,3,5,7}
int next_fast_size(int n);

// Direct spatial evaluation of the same "conv_same" definition; quadratic
// cost, kept as the reference the FFT path is validated against.
Grid conv_same_direct(const Grid& img, const Grid& kernel);

}  // namespace descatter
