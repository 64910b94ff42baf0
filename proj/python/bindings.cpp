#include "splatcage/cage_fit.hpp"
#include "splatcage/covariance_transform.hpp"
#include "splatcage/metrics.hpp"
#include "splatcage/mvc.hpp"
#include "splatcage/pipeline.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace splatcage;

namespace {

using Rows3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Tris = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Vec3> to_points(const Rows3& m) {
    std::vector<Vec3> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m.row(i).transpose();
    return out;
}

Rows3 from_points(const std::vector<Vec3>& pts) {
    Rows3 m(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    return m;
}

PointSet to_point_set(const Rows3& m) { return PointSet{to_points(m), {}}; }

CageMesh to_cage(const Rows3& vertices, const Tris& triangles) {
    CageMesh cage;
    cage.vertices = to_points(vertices);
    for (Eigen::Index i = 0; i < triangles.rows(); ++i) {
        Triangle t{};
        for (int k = 0; k < 3; ++k) {
            const auto v = triangles(i, k);
            if (v < 0 || v >= vertices.rows()) throw py::index_error("triangle index out of range");
            t[static_cast<std::size_t>(k)] = static_cast<std::uint32_t>(v);
        }
        cage.triangles.push_back(t);
    }
    return cage;
}

py::tuple from_cage(const CageMesh& cage) {
    Tris t(static_cast<Eigen::Index>(cage.triangles.size()), 3);
    for (std::size_t i = 0; i < cage.triangles.size(); ++i) {
        for (int k = 0; k < 3; ++k) t(static_cast<Eigen::Index>(i), k) = cage.triangles[i][static_cast<std::size_t>(k)];
    }
    return py::make_tuple(from_points(cage.vertices), t);
}

// Column views over the cloud, as (N, k) float64 arrays.
Rows3 cloud_log_scales(const GaussianCloud& c) {
    std::vector<Vec3> v;
    for (const auto& s : c.splats) v.push_back(s.log_scale);
    return from_points(v);
}

Eigen::MatrixXd cloud_rotations(const GaussianCloud& c) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(c.size()), 4);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const auto& q = c.splats[i].rotation;
        m.row(static_cast<Eigen::Index>(i)) << q.w, q.x, q.y, q.z;
    }
    return m;
}

Eigen::MatrixXd cloud_covariances(const GaussianCloud& c) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(c.size()), 9);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const Mat3 s = covariance_of(c.splats[i].rotation, c.splats[i].log_scale);
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 3; ++k) m(static_cast<Eigen::Index>(i), 3 * r + k) = s(r, k);
    }
    return m;
}

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_python(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Cage-based deformation of 3D Gaussian splat models";

    // Translators are tried newest first, so the base class goes in first.
    const auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<PipelineError>(m, "PipelineError", base.ptr());

    py::class_<GaussianCloud>(m, "GaussianCloud")
        .def("__len__", &GaussianCloud::size)
        .def_readonly("sh_degree", &GaussianCloud::sh_degree)
        .def_property_readonly("centers", [](const GaussianCloud& c) { return from_points(c.centers()); })
        .def_property_readonly("log_scales", &cloud_log_scales)
        .def_property_readonly("rotations", &cloud_rotations, "(N, 4) quaternions in w, x, y, z order")
        .def_property_readonly("opacity_logits",
                               [](const GaussianCloud& c) {
                                   Eigen::VectorXd v(static_cast<Eigen::Index>(c.size()));
                                   for (std::size_t i = 0; i < c.size(); ++i)
                                       v[static_cast<Eigen::Index>(i)] = c.splats[i].opacity_logit;
                                   return v;
                               })
        .def("covariances", &cloud_covariances, "(N, 9) row-major covariance matrices")
        .def("__eq__", [](const GaussianCloud& a, const GaussianCloud& b) { return a == b; });

    m.def("read_ply", &read_gs_ply, py::arg("path"));
    m.def("write_ply", &write_gs_ply, py::arg("cloud"), py::arg("path"));

    m.def(
        "template_cage",
        [](const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, int resolution, double padding) {
            Aabb box;
            box.extend(lo);
            box.extend(hi);
            return from_cage(build_template_cage(box, resolution, padding));
        },
        py::arg("lo"), py::arg("hi"), py::arg("resolution") = 2, py::arg("padding") = 0.1,
        "Box cage as (vertices, triangles).");
    m.def(
        "validate_cage", [](const Rows3& v, const Tris& t) { validate_cage(to_cage(v, t)); }, py::arg("vertices"),
        py::arg("triangles"));
    m.def(
        "mvc_weights",
        [](const Rows3& v, const Tris& t, const Rows3& points) {
            return Eigen::MatrixXd(mvc_weights(to_cage(v, t), to_point_set(points)).rows);
        },
        py::arg("vertices"), py::arg("triangles"), py::arg("points"), "(P, V) mean value coordinates.");
    m.def(
        "deform_points",
        [](const Rows3& v, const Tris& t, const Rows3& deformed, const Rows3& points) {
            const CageMesh src = to_cage(v, t);
            return from_points(deform_points(mvc_weights(src, to_point_set(points)), to_cage(deformed, t)).points);
        },
        py::arg("vertices"), py::arg("triangles"), py::arg("deformed_vertices"), py::arg("points"));
    m.def(
        "jacobian",
        [](const Rows3& v, const Tris& t, const Rows3& deformed, const Eigen::Vector3d& p, const std::string& method) {
            const CageMesh src = to_cage(v, t), dst = to_cage(deformed, t);
            if (method == "analytic") return jacobian_analytic(src, dst, p);
            if (method == "fd") return jacobian_fd(src, dst, p);
            throw py::value_error("method must be 'fd' or 'analytic'");
        },
        py::arg("vertices"), py::arg("triangles"), py::arg("deformed_vertices"), py::arg("point"),
        py::arg("method") = "fd");
    m.def(
        "transform_covariance",
        [](const Mat3& j, const Eigen::Vector4d& q, const Eigen::Vector3d& log_scale) {
            const CovarianceUpdate u = transform_covariance(j, Quaternion{q[0], q[1], q[2], q[3]}, log_scale, 0);
            return py::make_tuple(Eigen::Vector4d(u.rotation.w, u.rotation.x, u.rotation.y, u.rotation.z),
                                  Eigen::Vector3d(u.log_scale));
        },
        py::arg("jacobian"), py::arg("rotation"), py::arg("log_scale"),
        "Returns (rotation wxyz, log_scale) of J Σ Jᵀ.");
    m.def(
        "deform_cloud",
        [](const GaussianCloud& cloud, const Rows3& v, const Tris& t, const Rows3& deformed, std::size_t sites,
           std::uint64_t seed, bool update_covariance, const std::string& jacobian) {
            DeformOptions o;
            o.sites = sites;
            o.seed = seed;
            o.update_covariance = update_covariance;
            if (jacobian == "analytic") o.jacobian.method = JacobianMethod::Analytic;
            else if (jacobian != "fd") throw py::value_error("jacobian must be 'fd' or 'analytic'");
            py::gil_scoped_release release;
            return deform_cloud(cloud, to_cage(v, t), to_cage(deformed, t), o);
        },
        py::arg("cloud"), py::arg("vertices"), py::arg("triangles"), py::arg("deformed_vertices"),
        py::arg("sites") = 10000, py::arg("seed") = 0, py::arg("update_covariance") = true,
        py::arg("jacobian") = "fd");
    m.def(
        "fit_cage",
        [](const Rows3& v, const Tris& t, const Rows3& source, const Rows3& target, const py::object& config) {
            FitConfig c;
            if (!config.is_none()) c = from_python(config).get<FitConfig>();
            const FitResult r = fit_deformed_cage(to_cage(v, t), to_point_set(source), to_point_set(target), c);
            py::dict report;
            report["initial_chamfer"] = r.report.initial_chamfer;
            report["final_chamfer"] = r.report.final_chamfer;
            report["iterations"] = r.report.iterations_run;
            report["converged"] = r.report.converged;
            return py::make_tuple(from_points(r.cage.vertices), report);
        },
        py::arg("vertices"), py::arg("triangles"), py::arg("source_points"), py::arg("target_points"),
        py::arg("config") = py::none(), "Returns (deformed_vertices, report).");
    m.def(
        "chamfer_distance",
        [](const Rows3& a, const Rows3& b) { return chamfer_distance(to_point_set(a), to_point_set(b)); },
        py::arg("a"), py::arg("b"));
    m.def(
        "run_pipeline",
        [](const py::dict& config, const std::string& mode) {
            PipelineConfig c = from_python(config).get<PipelineConfig>();
            PipelineMode pm = PipelineMode::Deform;
            if (mode == "fit-cage") pm = PipelineMode::FitCage;
            else if (mode == "apply-cage") pm = PipelineMode::ApplyCage;
            else if (mode == "baseline") pm = PipelineMode::Baseline;
            else if (mode != "deform") throw py::value_error("unknown mode: " + mode);
            PipelineResult r;
            {
                py::gil_scoped_release release;
                r = run_pipeline(c, pm);
            }
            return to_python(r.metrics);
        },
        py::arg("config"), py::arg("mode") = "deform", "Runs the pipeline and returns the metrics dictionary.");
}
