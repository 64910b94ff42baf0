#pragma once

#include "splatcage/cage.hpp"
#include "splatcage/common.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

namespace splatcage {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense mean value coordinates, one row per query point.
struct MvcWeights {
    RowMatrix rows;                  // points × cage vertices
    std::vector<Vec3> query_points;  // evaluated positions, row-aligned
    std::vector<Triangle> topology;  // triangles of the cage the rows refer to
};

/// Closest point on the cage surface, reported when within a tolerance.
struct SurfaceHit {
    std::size_t triangle = 0;
    Vec3 barycentric = Vec3::Zero();
    double distance = 0.0;
};

/// Mean value coordinates of a fixed closed triangle cage.
///
/// Each triangle contributes through the integral of the unit direction over
/// its spherical projection (the "mean vector"), expressed in the basis of
/// the three unit vectors toward its corners. Triangles seen exactly edge-on
/// contribute nothing. Points within 1e-10 × bbox_diag of the surface take
/// the barycentric coordinates of their closest surface point, which covers
/// the vertex, edge and face limits in one rule.
///
/// Gradients come from forward-mode differentiation of the same formula, so
/// they are exact to rounding and independent of any step size.
class MvcEvaluator {
public:
    /// Validates the cage (GeometryError on failure).
    explicit MvcEvaluator(CageMesh cage);

    const CageMesh& cage() const { return cage_; }
    std::size_t vertex_count() const { return cage_.vertices.size(); }
    double bbox_diagonal() const { return diag_; }
    /// 1e-10 × bbox_diag.
    double surface_tolerance() const { return 1e-10 * diag_; }

    /// Nearest surface point if the distance is below `threshold`.
    std::optional<SurfaceHit> near_surface(const Vec3& p, double threshold) const;

    /// Writes normalized weights for `p` into `out` (size vertex_count()).
    /// Returns true when the near-surface limit rule was used.
    bool weights(const Vec3& p, std::span<double> out) const;

    /// Weights and their spatial gradients. Throws NearSurfaceError when p is
    /// within 1e-8 × bbox_diag of the cage surface.
    void gradients(const Vec3& p, std::span<double> weights_out, std::span<Vec3> gradients_out) const;

    /// Σ ωᵢ(p) vᵢ for arbitrary vertex positions sharing this cage's topology.
    Vec3 deform(const Vec3& p, std::span<const Vec3> deformed_vertices) const;

private:
    CageMesh cage_;
    double diag_ = 0.0;
    std::vector<Vec3> unit_normals_;
};

MvcWeights mvc_weights(const CageMesh& cage, const PointSet& points);

/// p′ = Σ ωᵢ(p) v′ᵢ per row, in row order.
PointSet deform_points(const MvcWeights& weights, const CageMesh& deformed_cage);

/// ∇ωᵢ(p) for every cage vertex.
std::vector<Vec3> mvc_gradient(const CageMesh& cage, const Vec3& point);

}  // namespace splatcage
