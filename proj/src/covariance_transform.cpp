#include "splatcage/covariance_transform.hpp"

#include "splatcage/parallel.hpp"
#include "splatcage/random.hpp"
#include "splatcage/spatial_index.hpp"

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splatcage {

CageMap::CageMap(const CageMesh& source, const CageMesh& deformed) : evaluator_(source), deformed_(deformed) {
    if (!source.same_topology(deformed)) {
        throw GeometryError("cage map: deformed cage topology differs from the source cage");
    }
    identity_ = source.vertices == deformed.vertices;
}

Mat3 CageMap::jacobian_fd(const Vec3& p, double step) const {
    if (!(step > 0.0)) {
        throw Error("jacobian_fd: step must be positive");
    }
    const std::size_t nv = evaluator_.vertex_count();
    thread_local std::vector<double> row;
    row.resize(nv);
    auto eval = [&](const Vec3& q, bool& near) {
        near = evaluator_.weights(q, row) || near;
        Vec3 out = Vec3::Zero();
        for (std::size_t i = 0; i < nv; ++i) out += row[i] * deformed_.vertices[i];
        return out;
    };
    double h = step;
    for (int attempt = 0; attempt <= 4; ++attempt, h *= 0.5) {
        Mat3 jac;
        bool near = false;
        for (int k = 0; k < 3; ++k) {
            const Vec3 e = Vec3::Unit(k) * h;
            jac.col(k) = (eval(p + e, near) - eval(p - e, near)) / (2.0 * h);
        }
        if (!near) return jac;
    }
    throw NearSurfaceError("jacobian_fd: stencil stays within 1e-10 x bbox_diag of the cage surface");
}

Mat3 CageMap::jacobian_analytic(const Vec3& p) const {
    const std::size_t nv = evaluator_.vertex_count();
    thread_local std::vector<double> w;
    thread_local std::vector<Vec3> grad;
    w.resize(nv);
    grad.resize(nv);
    evaluator_.gradients(p, w, grad);
    Mat3 jac = Mat3::Zero();
    for (std::size_t i = 0; i < nv; ++i) jac += deformed_.vertices[i] * grad[i].transpose();
    return jac;
}

Mat3 CageMap::jacobian(const Vec3& p, JacobianMethod method, double step) const {
    return method == JacobianMethod::Analytic ? jacobian_analytic(p) : jacobian_fd(p, step);
}

Mat3 jacobian_fd(const CageMesh& source, const CageMesh& deformed, const Vec3& point, double step) {
    const CageMap map(source, deformed);
    return map.jacobian_fd(point, step > 0.0 ? step : map.default_step());
}

Mat3 jacobian_analytic(const CageMesh& source, const CageMesh& deformed, const Vec3& point) {
    return CageMap(source, deformed).jacobian_analytic(point);
}

std::size_t JacobianField::singular_count() const {
    return static_cast<std::size_t>(std::count(site_singular.begin(), site_singular.end(), std::uint8_t{1}));
}

namespace {

JacobianField build_field(const GaussianCloud& cloud, const CageMap& map, std::size_t m, std::uint64_t seed,
                          const JacobianOptions& options) {
    const std::size_t n = cloud.size();
    if (n == 0) throw Error("build_jacobian_field: cloud is empty");
    if (m == 0) throw Error("build_jacobian_field: site count must be at least 1");

    JacobianField field;
    if (m >= n) {
        field.site_indices.resize(n);
        std::iota(field.site_indices.begin(), field.site_indices.end(), std::size_t{0});
    } else {
        Rng rng(seed);
        field.site_indices = sample_without_replacement(n, m, rng);
        std::sort(field.site_indices.begin(), field.site_indices.end());
    }
    const std::size_t sites = field.site_indices.size();
    field.site_jacobians.resize(sites);
    field.site_singular.assign(sites, 0);

    const double step = options.step_fraction * map.evaluator().bbox_diagonal();
    const std::size_t block = std::max<std::size_t>(1, options.block_size);
    for (std::size_t start = 0; start < sites; start += block) {
        const std::size_t count = std::min(block, sites - start);
        parallel_for(count, [&](std::size_t k) {
            const std::size_t s = start + k;
            const Mat3 jac = map.jacobian(cloud.splats[field.site_indices[s]].center, options.method, step);
            field.site_jacobians[s] = jac;
            const double det = jac.determinant();
            field.site_singular[s] = (!jac.allFinite() || !(std::abs(det) > 1e-12)) ? 1 : 0;
        });
    }
    if (field.singular_count() == sites) {
        throw NumericError("build_jacobian_field: every site Jacobian is singular or non-finite");
    }
    if (const std::size_t bad = field.singular_count()) {
        spdlog::warn("build_jacobian_field: {} of {} site Jacobians are near-singular; their eigenvalues are clamped",
                     bad, sites);
    }

    field.assignment.assign(n, 0);
    if (sites == n) {
        std::iota(field.assignment.begin(), field.assignment.end(), std::size_t{0});
        return field;
    }
    std::vector<Vec3> site_centers(sites);
    std::vector<std::int64_t> site_of(n, -1);
    for (std::size_t s = 0; s < sites; ++s) {
        site_centers[s] = cloud.splats[field.site_indices[s]].center;
        site_of[field.site_indices[s]] = static_cast<std::int64_t>(s);
    }
    const KdTree tree(site_centers);
    parallel_for(n, [&](std::size_t i) {
        field.assignment[i] = site_of[i] >= 0 ? static_cast<std::size_t>(site_of[i]) : tree.nearest(cloud.splats[i].center).index;
    });
    return field;
}

}  // namespace

JacobianField build_jacobian_field(const GaussianCloud& cloud, const CageMesh& source_cage,
                                   const CageMesh& deformed_cage, std::size_t m, std::uint64_t seed,
                                   const JacobianOptions& options) {
    return build_field(cloud, CageMap(source_cage, deformed_cage), m, seed, options);
}

CovarianceUpdate transform_covariance(const Mat3& jacobian, const Quaternion& rotation, const Vec3& log_scale,
                                      std::size_t index) {
    const auto tag = [&] { return index == NumericError::npos ? std::string() : " (Gaussian " + std::to_string(index) + ")"; };
    if (!jacobian.allFinite()) {
        throw NumericError("transform_covariance: non-finite Jacobian" + tag(), index);
    }
    const Mat3 sigma = covariance_of(rotation, log_scale);
    const Mat3 deformed = jacobian * sigma * jacobian.transpose();
    if (!deformed.allFinite()) {
        throw NumericError("transform_covariance: non-finite deformed covariance" + tag(), index);
    }
    const Mat3 symmetric = 0.5 * (deformed + deformed.transpose());
    const Eigen::SelfAdjointEigenSolver<Mat3> solver(symmetric);
    if (solver.info() != Eigen::Success) {
        throw NumericError("transform_covariance: eigendecomposition failed" + tag(), index);
    }
    // Solver order is ascending; the contract is descending.
    Mat3 basis;
    Vec3 variances;
    for (int k = 0; k < 3; ++k) {
        basis.col(k) = solver.eigenvectors().col(2 - k);
        variances[k] = std::max(solver.eigenvalues()[2 - k], 1e-18);
    }
    if (basis.determinant() < 0.0) basis.col(2) = -basis.col(2);

    CovarianceUpdate out;
    out.rotation = Quaternion::from_matrix(basis);
    out.log_scale = 0.5 * variances.array().log().matrix();
    return out;
}

GaussianCloud deform_cloud(const GaussianCloud& cloud, const CageMesh& source_cage, const CageMesh& deformed_cage,
                           const DeformOptions& options) {
    if (cloud.empty()) throw Error("deform_cloud: cloud is empty");
    const CageMap map(source_cage, deformed_cage);
    if (map.is_identity()) {
        return cloud;
    }

    GaussianCloud out = cloud;
    const std::size_t n = cloud.size();
    const std::size_t chunk = std::max<std::size_t>(1, options.center_chunk);
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t count = std::min(chunk, n - start);
        parallel_for(count, [&](std::size_t k) {
            const std::size_t i = start + k;
            out.splats[i].center = map.apply(cloud.splats[i].center);
        });
    }
    if (!options.update_covariance) {
        return out;
    }

    const JacobianField field = build_field(cloud, map, options.sites, options.seed, options.jacobian);
    parallel_for(n, [&](std::size_t i) {
        const Mat3& jac = field.jacobian_for(i);
        if (jac == Mat3::Identity()) return;
        const CovarianceUpdate update = transform_covariance(jac, cloud.splats[i].rotation, cloud.splats[i].log_scale, i);
        out.splats[i].rotation = update.rotation;
        out.splats[i].log_scale = update.log_scale;
    });
    return out;
}

}  // namespace splatcage
