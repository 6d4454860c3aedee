// Python bindings for the matrix-level operations. File-based workflows
// go through the CLI; these bindings cover in-memory use from numpy.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "habench/core.hpp"
#include "habench/harmonize.hpp"
#include "habench/nifti.hpp"
#include "habench/report.hpp"
#include "habench/stats.hpp"
#include "habench/synth.hpp"
#include "habench/types.hpp"

namespace py = pybind11;
using namespace habench;

namespace {

using Array2d = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array2d& array) {
    if (array.ndim() != 2) throw Error("expected a 2-d array");
    Matrix m(array.shape(0), array.shape(1));
    auto r = array.unchecked<2>();
    for (py::ssize_t i = 0; i < array.shape(0); ++i)
        for (py::ssize_t j = 0; j < array.shape(1); ++j) m(i, j) = r(i, j);
    return m;
}

py::array_t<double> from_matrix(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    auto w = out.mutable_unchecked<2>();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) w(i, j) = m(i, j);
    return out;
}

py::array_t<double> from_vector(const Vector& v) {
    py::array_t<double> out(v.size());
    auto w = out.mutable_unchecked<1>();
    for (Eigen::Index i = 0; i < v.size(); ++i) w(i) = v[i];
    return out;
}

VoxelDataset make_dataset(const Array2d& values, const std::vector<std::string>& sites) {
    VoxelDataset ds;
    ds.values = to_matrix(values);
    if (static_cast<py::ssize_t>(sites.size()) != values.shape(0))
        throw Error("sites length must match the number of rows");
    ds.geometry.dims = {ds.values.cols(), 1, 1};
    ds.mask = Mask::from_flags(
        ds.geometry, std::vector<bool>(static_cast<std::size_t>(ds.values.cols()), true));
    for (py::ssize_t r = 0; r < values.shape(0); ++r) {
        SampleRow row;
        row.image_id = "row" + std::to_string(r);
        row.site = sites[static_cast<std::size_t>(r)];
        ds.table.rows.push_back(row);
    }
    ds.layout = SiteLayout::from_table(ds.table);
    ds.validate();
    return ds;
}

DesignMatrix make_design(const std::optional<Array2d>& design, py::ssize_t n_rows) {
    DesignMatrix dm;
    if (!design) return dm;
    dm.values = to_matrix(*design);
    if (dm.values.rows() != n_rows) throw Error("design rows must match the number of images");
    for (Eigen::Index k = 0; k < dm.values.cols(); ++k)
        dm.columns.push_back({"x" + std::to_string(k), ColumnKind::Continuous});
    return dm;
}

}  // namespace

PYBIND11_MODULE(_habench, m) {
    m.doc() = "Multi-site harmonization benchmarking toolkit";

    py::register_exception<Error>(m, "HabenchError");

    m.def(
        "combat",
        [](const Array2d& values, const std::vector<std::string>& sites,
           const std::optional<Array2d>& design, bool eb, double tol, int max_iter) {
            const VoxelDataset ds = make_dataset(values, sites);
            const DesignMatrix dm = make_design(design, values.shape(0));
            const auto fit = harmonize::fit_combat(ds, dm, eb, tol, max_iter);
            return from_matrix(harmonize::apply_combat(fit, ds, dm));
        },
        py::arg("values"), py::arg("sites"), py::arg("design") = std::nullopt,
        py::arg("eb") = true, py::arg("tol") = 1e-4, py::arg("max_iter") = 100,
        "ComBat-harmonize an images-by-voxels matrix.");

    m.def(
        "global_scaling",
        [](const Array2d& values, const std::vector<std::string>& sites) {
            const VoxelDataset ds = make_dataset(values, sites);
            const auto fit = harmonize::fit_global_scaling(ds);
            return from_matrix(harmonize::apply_global_scaling(fit, ds));
        },
        py::arg("values"), py::arg("sites"),
        "Per-site affine intensity normalization against the grand mean.");

    m.def(
        "site_effect_report",
        [](const Array2d& values, const std::vector<std::string>& sites, double alpha) {
            const VoxelDataset ds = make_dataset(values, sites);
            const auto rep = report::generate_report(ds, alpha);
            py::dict out;
            out["f"] = from_vector(rep.f_stat);
            out["p_f"] = from_vector(rep.p_f);
            out["eta2"] = from_vector(rep.eta2);
            out["t_fraction"] = from_vector(rep.t_fraction);
            out["significant_f"] = rep.significant_f;
            out["n_F"] = rep.summary.n_f;
            out["f_F"] = rep.summary.f_f;
            if (rep.summary.n_t)
                out["n_t"] = *rep.summary.n_t;
            else
                out["n_t"] = py::none();
            out["f_t"] = rep.summary.f_t;
            return out;
        },
        py::arg("values"), py::arg("sites"), py::arg("alpha") = 0.05,
        "Voxel-wise ANOVA site-effect report on an images-by-voxels matrix.");

    m.def("f_sf", &stats::f_sf, py::arg("f"), py::arg("d1"), py::arg("d2"),
          "Survival function of the F distribution.");
    m.def("t_sf", &stats::t_sf, py::arg("t"), py::arg("df"),
          "Upper-tail survival function of Student's t.");
    m.def("bonferroni_threshold", &stats::bonferroni_threshold, py::arg("alpha"), py::arg("m"));

    m.def(
        "read_volume",
        [](const std::string& path) {
            const Volume vol = nifti::read_volume(path);
            const auto& d = vol.geometry.dims;
            py::array_t<double> data({d[0], d[1], d[2]});
            auto w = data.mutable_unchecked<3>();
            for (std::int64_t z = 0; z < d[2]; ++z)
                for (std::int64_t y = 0; y < d[1]; ++y)
                    for (std::int64_t x = 0; x < d[0]; ++x) w(x, y, z) = vol.at(x, y, z);
            py::array_t<double> affine({4, 4});
            auto wa = affine.mutable_unchecked<2>();
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) wa(i, j) = vol.geometry.affine(i, j);
            return py::make_tuple(data, affine);
        },
        py::arg("path"), "Read a NIfTI volume; returns (data, affine).");

    m.def(
        "write_volume",
        [](const std::string& path, const py::array_t<double, py::array::forcecast>& data,
           const std::optional<Array2d>& affine, const std::string& dtype) {
            if (data.ndim() != 3) throw Error("expected a 3-d array");
            Volume vol;
            vol.geometry.dims = {data.shape(0), data.shape(1), data.shape(2)};
            vol.data.resize(vol.geometry.voxel_count());
            auto r = data.unchecked<3>();
            for (py::ssize_t z = 0; z < data.shape(2); ++z)
                for (py::ssize_t y = 0; y < data.shape(1); ++y)
                    for (py::ssize_t x = 0; x < data.shape(0); ++x)
                        vol.at(x, y, z) = r(x, y, z);
            if (affine) {
                const Matrix a = to_matrix(*affine);
                if (a.rows() != 4 || a.cols() != 4) throw Error("affine must be 4x4");
                vol.geometry.affine = a;
            }
            nifti::ElementType type;
            if (dtype == "float64")
                type = nifti::ElementType::Float64;
            else if (dtype == "float32")
                type = nifti::ElementType::Float32;
            else
                throw Error("dtype must be float32 or float64");
            nifti::write_volume(vol, path, type);
        },
        py::arg("path"), py::arg("data"), py::arg("affine") = std::nullopt,
        py::arg("dtype") = std::string("float64"));

    m.def(
        "generate_bundle",
        [](const std::string& spec_json, const std::string& out_dir) {
            const auto spec = synth::parse_synth_spec(spec_json);
            synth::write_synth_bundle(synth::generate(spec), out_dir);
        },
        py::arg("spec_json"), py::arg("out_dir"),
        "Generate a synthetic multi-site bundle from a spec JSON string.");

    m.def("registered_methods", &harmonize::registered_method_names);
}
