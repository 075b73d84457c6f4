#pragma once

#include <cstdint>
#include <vector>

namespace descatter {

// Square image of doubles, row-major. Radiograph grids are odd-sized so a
// center pixel exists.
class Grid {
public:
    Grid() = default;
    explicit Grid(int n, double fill = 0.0) : n_(n), v_(static_cast<size_t>(n) * n, fill) {}

    int n() const { return n_; }
    size_t npix() const { return v_.size(); }
    int center() const { return (n_ - 1) / 2; }

    double& at(int r, int c) { return v_[static_cast<size_t>(r) * n_ + c]; }
    double at(int r, int c) const { return v_[static_cast<size_t>(r) * n_ + c]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::vector<double>& vec() { return v_; }
    const std::vector<double>& vec() const { return v_; }

    bool same_shape(const Grid& o) const { return n_ == o.n_; }

private:
    int n_ = 0;
    std::vector<double> v_;
};

struct Mask {
    int n = 0;
    std::vector<uint8_t> in;

    static Mask all(int n);
    // pixels whose center lies within `radius` of the grid center
    static Mask disk(int n, double pitch, double radius);

    bool at(int r, int c) const { return in[static_cast<size_t>(r) * n + c] != 0; }
    bool at(size_t i) const { return in[i] != 0; }
    size_t count() const;
};

double frob_norm_sq(const Grid& g);
double frob_norm(const Grid& g);
double dot(const Grid& a, const Grid& b);
double masked_dot(const Grid& a, const Grid& b, const Mask& m);
double masked_norm_sq(const Grid& a, const Mask& m);
double max_abs(const Grid& g);
double max_abs_diff(const Grid& a, const Grid& b);
bool all_finite(const Grid& g);
void scale_inplace(Grid& g, double s);
Grid scaled(const Grid& g, double s);

// Detector image with physical metadata. `roi_radius` bounds the circular
// region every cost function is restricted to.
struct Radiograph {
    Grid img;
    double pitch = 0.0;       // cm per pixel
    double roi_radius = 0.0;  // cm

    Mask roi() const { return Mask::disk(img.n(), pitch, roi_radius); }
    Radiograph like(Grid g) const { return Radiograph{std::move(g), pitch, roi_radius}; }
};

}  // namespace descatter
