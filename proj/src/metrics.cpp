#include "splatcage/metrics.hpp"

#include "splatcage/covariance_transform.hpp"
#include "splatcage/parallel.hpp"
#include "splatcage/ply.hpp"
#include "splatcage/random.hpp"
#include "splatcage/spatial_index.hpp"

#include <algorithm>
#include <cmath>

namespace splatcage {

PointSet sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
    std::vector<double> cumulative;
    cumulative.reserve(mesh.triangles.size());
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        total += 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm();
        cumulative.push_back(total);
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw GeometryError("sample_mesh_surface: mesh has zero total area");
    }

    Rng rng(seed);
    PointSet out;
    out.points.reserve(n);
    out.normals.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double pick = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
        if (it == cumulative.end()) --it;
        // Zero-area triangles own empty ranges; only the clamp can land on one.
        while (it != cumulative.begin() && *it == *(it - 1)) --it;
        const auto& t = mesh.triangles[static_cast<std::size_t>(it - cumulative.begin())];
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3& b = mesh.vertices[t[1]];
        const Vec3& c = mesh.vertices[t[2]];
        const double r1 = std::sqrt(rng.uniform());
        const double r2 = rng.uniform();
        out.points.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
        out.normals.push_back((b - a).cross(c - a).normalized());
    }
    return out;
}

namespace {

double mean_nearest_squared(const PointSet& from, const KdTree& to) {
    const auto hits = to.nearest_all(from.points);
    double sum = 0.0;
    for (const auto& h : hits) sum += h.squared_distance;
    return sum / static_cast<double>(hits.size());
}

}  // namespace

double chamfer_distance(const PointSet& a, const PointSet& b) {
    if (a.empty() || b.empty()) {
        throw Error("chamfer_distance: point sets must be non-empty");
    }
    const KdTree tree_a(a.points), tree_b(b.points);
    return mean_nearest_squared(a, tree_b) + mean_nearest_squared(b, tree_a);
}

AxisAffine bbox_to_bbox(const Aabb& from, const Aabb& to) {
    const Aabb src = from.inflated_degenerate();
    const Aabb dst = to.inflated_degenerate();
    AxisAffine map;
    map.factors = dst.extent().cwiseQuotient(src.extent());
    map.offset = dst.center() - map.factors.cwiseProduct(src.center());
    return map;
}

GaussianCloud baseline_bbox_scale(const GaussianCloud& cloud, const PointSet& target_points) {
    if (cloud.empty() || target_points.empty()) {
        throw Error("baseline_bbox_scale: inputs must be non-empty");
    }
    const Aabb source_box = Aabb::of(cloud.centers());
    const Aabb target_box = target_points.bbox();
    const AxisAffine map = bbox_to_bbox(source_box, target_box);
    if (source_box.inflated_degenerate().min == target_box.inflated_degenerate().min &&
        source_box.inflated_degenerate().max == target_box.inflated_degenerate().max) {
        return cloud;
    }

    const Mat3 jacobian = map.factors.asDiagonal();
    const bool uniform = map.factors[0] == map.factors[1] && map.factors[1] == map.factors[2];
    const Vec3 log_factors = map.factors.array().log().matrix();

    GaussianCloud out = cloud;
    parallel_for(cloud.size(), [&](std::size_t i) {
        GaussianSplat& s = out.splats[i];
        s.center = map.apply(cloud.splats[i].center);
        const Quaternion& q = cloud.splats[i].rotation;
        const bool axis_aligned = q.x == 0.0 && q.y == 0.0 && q.z == 0.0 && q.w != 0.0;
        // A uniform factor, or an unrotated Gaussian, scales its own axes.
        if (uniform || axis_aligned) {
            s.log_scale = cloud.splats[i].log_scale + log_factors;
        } else {
            const CovarianceUpdate update = transform_covariance(jacobian, q, cloud.splats[i].log_scale, i);
            s.rotation = update.rotation;
            s.log_scale = update.log_scale;
        }
    });
    return out;
}

TargetKind parse_target_kind(const std::string& name) {
    if (name == "mesh") return TargetKind::Mesh;
    if (name == "pointcloud") return TargetKind::PointCloud;
    if (name == "gsplat") return TargetKind::GaussianSplat;
    throw Error("unknown target kind '" + name + "' (expected mesh, pointcloud or gsplat)");
}

std::string to_string(TargetKind kind) {
    switch (kind) {
        case TargetKind::Mesh: return "mesh";
        case TargetKind::PointCloud: return "pointcloud";
        case TargetKind::GaussianSplat: return "gsplat";
    }
    return "unknown";
}

PointSet load_target_points(const std::filesystem::path& path, TargetKind kind, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw Error("load_target_points: sample count must be at least 1");
    switch (kind) {
        case TargetKind::Mesh:
            return sample_mesh_surface(read_obj(path, false), n, seed);
        case TargetKind::GaussianSplat: {
            const GaussianCloud cloud = read_gs_ply(path);
            return sample_centers(cloud, std::min(n, cloud.size()), seed);
        }
        case TargetKind::PointCloud: {
            const ply::VertexTable table = ply::read_vertices(path);
            const auto& x = table.column("x");
            const auto& y = table.column("y");
            const auto& z = table.column("z");
            if (table.count == 0) throw FormatError("point cloud '" + path.string() + "' has no vertices");
            Rng rng(seed);
            const auto picks = sample_without_replacement(table.count, std::min(n, table.count), rng);
            PointSet out;
            out.points.reserve(picks.size());
            for (std::size_t i : picks) out.points.emplace_back(x[i], y[i], z[i]);
            return out;
        }
    }
    throw Error("load_target_points: unknown target kind");
}

}  // namespace splatcage
