#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatcage {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Error taxonomy shared by every module. Callers that only care about
// failure can catch splatcage::Error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file content.
class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Invalid geometric input: degenerate rotation, non-manifold cage,
/// topology mismatch, zero-area mesh.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Query point too close to the cage surface for the requested evaluation.
class NearSurfaceError : public GeometryError {
public:
    using GeometryError::GeometryError;
};

/// Non-finite value produced during computation. `index` names the offending
/// element (Gaussian, iteration, ...) or npos when unknown.
class NumericError : public Error {
public:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    explicit NumericError(const std::string& what, std::size_t index = npos)
        : Error(what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void extend(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    bool empty() const { return !(min.array() <= max.array()).all(); }
    Vec3 extent() const { return max - min; }
    Vec3 center() const { return 0.5 * (min + max); }
    double diagonal() const { return empty() ? 0.0 : extent().norm(); }

    /// Axes thinner than `fraction` × diagonal are grown symmetrically to
    /// that thickness. A point-like box becomes a cube of edge `fraction`.
    Aabb inflated_degenerate(double fraction = 1e-3) const;

    static Aabb of(std::span<const Vec3> points);
};

/// Bag of 3D points with optional index-aligned unit normals.
struct PointSet {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;  // empty, or same length as points

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_normals() const { return !normals.empty(); }
    Aabb bbox() const { return Aabb::of(points); }
};

/// Uniform-scale similarity taking a box to a unit-diagonal box centered at
/// the origin.
struct Normalization {
    Vec3 center = Vec3::Zero();
    double scale = 1.0;

    static Normalization identity() { return {}; }
    static Normalization unit_diagonal(const Aabb& box);

    Vec3 apply(const Vec3& p) const { return (p - center) * scale; }
    Vec3 invert(const Vec3& p) const { return p / scale + center; }
};

}  // namespace splatcage
