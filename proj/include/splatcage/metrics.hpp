#pragma once

#include "splatcage/cage.hpp"
#include "splatcage/common.hpp"
#include "splatcage/splat_model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace splatcage {

/// n points, triangle chosen with probability proportional to area, uniform
/// inside it; face normals attached.
PointSet sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

/// mean over a of min_b |a-b|² + mean over b of min_a |a-b|².
double chamfer_distance(const PointSet& a, const PointSet& b);

/// Per-axis affine map taking the bbox of the cloud's centers onto the bbox
/// of `target_points` (degenerate axes inflated first). Covariances follow
/// the same map exactly.
GaussianCloud baseline_bbox_scale(const GaussianCloud& cloud, const PointSet& target_points);

/// The diagonal factors and offset used by baseline_bbox_scale:
/// x' = factors ⊙ x + offset.
struct AxisAffine {
    Vec3 factors = Vec3::Ones();
    Vec3 offset = Vec3::Zero();
    Vec3 apply(const Vec3& p) const { return factors.cwiseProduct(p) + offset; }
};
AxisAffine bbox_to_bbox(const Aabb& from, const Aabb& to);

enum class TargetKind { Mesh, PointCloud, GaussianSplat };

TargetKind parse_target_kind(const std::string& name);
std::string to_string(TargetKind kind);

/// Target ingestion. Meshes (OBJ) are surface-sampled, point clouds (PLY with
/// x,y,z) and GS PLY centers are subsampled without replacement to at most
/// `n` points.
PointSet load_target_points(const std::filesystem::path& path, TargetKind kind, std::size_t n, std::uint64_t seed);

}  // namespace splatcage
