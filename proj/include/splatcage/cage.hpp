#pragma once

#include "splatcage/common.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace splatcage {

using Triangle = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh. Cages use the same representation with the extra
/// requirements checked by validate_cage.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;

    Aabb bbox() const { return Aabb::of(vertices); }
    /// Signed enclosed volume; positive for outward winding.
    double signed_volume() const;
    bool same_topology(const TriangleMesh& other) const {
        return vertices.size() == other.vertices.size() && triangles == other.triangles;
    }
};

/// Closed control mesh. Roles: template, source cage, deformed cage.
using CageMesh = TriangleMesh;

/// Throws GeometryError unless the mesh is a closed 2-manifold (every edge
/// shared by exactly two triangles, used once in each direction), wound
/// outward, with every triangle area above 1e-14 × bbox_diag².
void validate_cage(const CageMesh& cage);

/// Generalized winding number of a closed mesh around p (1 inside, 0 outside).
double winding_number(const TriangleMesh& mesh, const Vec3& p);

/// Surface lattice of `box` grown by `padding` × extent on each side of
/// every axis, each face split into resolution² quads, two triangles per
/// quad. Degenerate axes are first inflated to 1e-3 × bbox_diag.
CageMesh build_template_cage(const Aabb& box, int resolution, double padding);

/// λ·deformed + (1-λ)·source, vertexwise. λ outside [0,1] extrapolates and
/// logs a warning.
CageMesh interpolate_cage(const CageMesh& source, const CageMesh& deformed, double lambda);

/// Reads v/f records. Polygons are fan-triangulated unless `triangles_only`,
/// in which case a non-triangular face is a FormatError.
TriangleMesh read_obj(const std::filesystem::path& path, bool triangles_only = true);
void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace splatcage
