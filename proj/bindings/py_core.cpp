#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "descatter/descatter.hpp"
#include "descatter/oracle.hpp"
#include "descatter/phantom.hpp"
#include "descatter/physics.hpp"
#include "descatter/recon.hpp"

namespace py = pybind11;
using namespace descatter;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Grid to_grid(const Array& a) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1))
        throw py::value_error("expected a square 2-D array");
    const int n = static_cast<int>(a.shape(0));
    Grid g(n);
    std::copy(a.data(), a.data() + g.npix(), g.data());
    return g;
}

Array to_array(const Grid& g) {
    Array a({static_cast<py::ssize_t>(g.n()), static_cast<py::ssize_t>(g.n())});
    std::copy(g.data(), g.data() + g.npix(), a.mutable_data());
    return a;
}

Radiograph to_rad(const Array& a, double pitch, double roi) {
    return Radiograph{to_grid(a), pitch, roi};
}

ShellPhantom make_phantom(const std::vector<double>& radii, const std::vector<double>& densities) {
    ShellPhantom p{radii, densities, 0};
    p.validate();
    return p;
}

Geometry make_geometry(int grid, double pitch, double roi) {
    Geometry g;
    g.grid_size = grid;
    g.pixel_pitch = pitch > 0 ? pitch : 12.0 / (grid - 1);
    g.roi_radius = roi;
    g.validate();
    return g;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "scatter removal and Abel reconstruction for spherical-shell radiographs";

    m.def(
        "project",
        [](const std::vector<double>& radii, const std::vector<double>& densities, int grid,
           double pitch, double roi) {
            return to_array(project_phantom(make_phantom(radii, densities),
                                            make_geometry(grid, pitch, roi)).img);
        },
        py::arg("radii"), py::arg("densities"), py::arg("grid"), py::arg("pitch") = 0.0,
        py::arg("roi") = 5.0, "areal density map (g/cm^2) of concentric shells");

    m.def(
        "central_slice",
        [](const std::vector<double>& radii, const std::vector<double>& densities, int grid,
           double pitch, double roi) {
            return to_array(rasterize_central_slice(make_phantom(radii, densities),
                                                    make_geometry(grid, pitch, roi)));
        },
        py::arg("radii"), py::arg("densities"), py::arg("grid"), py::arg("pitch") = 0.0,
        py::arg("roi") = 5.0, "density (g/cm^3) on the central plane");

    m.def(
        "transmission_mono",
        [](const Array& areal, double xi, double pitch, double roi) {
            return to_array(direct_mono(to_rad(areal, pitch, roi), xi).img);
        },
        py::arg("areal"), py::arg("xi"), py::arg("pitch"), py::arg("roi") = 5.0);

    m.def(
        "scatter_map",
        [](const Array& direct, const Array& areal, double pitch, double roi, uint64_t seed) {
            return to_array(simulate_scatter(to_rad(direct, pitch, roi), to_rad(areal, pitch, roi),
                                             ScatterOracleParams::defaults(seed)).img);
        },
        py::arg("direct"), py::arg("areal"), py::arg("pitch"), py::arg("roi") = 5.0,
        py::arg("seed") = 7, "synthetic scatter field for one object");

    m.def(
        "descatter",
        [](const Array& total, const std::vector<Array>& directs,
           const std::vector<Array>& scatters, const std::string& model, const std::string& mode,
           int neighbors, int iters, double pitch, double roi) {
            if (directs.size() != scatters.size())
                throw py::value_error("directs and scatters must pair up");
            std::vector<RadPair> pairs;
            for (size_t i = 0; i < directs.size(); ++i)
                pairs.push_back(
                    RadPair{to_rad(directs[i], pitch, roi), to_rad(scatters[i], pitch, roi)});
            TrainingSet ts = TrainingSet::build(std::move(pairs));
            DescatterOptions opt;
            opt.model = model_class_from_string(model);
            opt.mode = fit_mode_from_string(mode);
            opt.neighbors = neighbors;
            opt.iters = iters;
            DescatterTrace tr = ::descatter::descatter(to_rad(total, pitch, roi), ts, opt);
            return py::make_tuple(to_array(tr.final_direct.img), tr.nmse);
        },
        py::arg("total"), py::arg("directs"), py::arg("scatters"),
        py::arg("model") = "convolutional", py::arg("mode") = "local", py::arg("neighbors") = 3,
        py::arg("iters") = 10, py::arg("pitch") = 0.0, py::arg("roi") = 5.0,
        "fixed-point scatter removal; returns (direct_estimate, nmse_trace)");

    m.def(
        "inverse_abel",
        [](const Array& areal, double pitch, double roi) {
            return to_array(inverse_abel(to_rad(areal, pitch, roi)));
        },
        py::arg("areal"), py::arg("pitch"), py::arg("roi") = 5.0,
        "row-wise inverse Abel transform of an areal density map");

    m.def(
        "reconstruct_mono",
        [](const Array& d, double xi, double pitch, double roi) {
            ReconConfig rc;
            rc.mono = true;
            rc.xi = xi;
            return to_array(reconstruct(to_rad(d, pitch, roi), rc));
        },
        py::arg("transmission"), py::arg("xi"), py::arg("pitch"), py::arg("roi") = 5.0,
        "monoenergetic transmission to central density slice");

    m.def(
        "made", [](const Array& recon, const Array& truth) { return made(to_grid(recon), to_grid(truth)); },
        py::arg("recon"), py::arg("truth"),
        "lower median absolute density error over the truth support");
}
