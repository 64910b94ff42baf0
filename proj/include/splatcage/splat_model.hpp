#pragma once

#include "splatcage/common.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace splatcage {

/// Quaternion in w,x,y,z order, stored unnormalized as in GS files.
struct Quaternion {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm() const;
    /// Rotation matrix of the normalized quaternion. Throws GeometryError for
    /// a zero quaternion.
    Mat3 to_matrix() const;
    static Quaternion from_matrix(const Mat3& rotation);

    bool operator==(const Quaternion&) const = default;
};

/// One Gaussian in pre-activation form: scale = exp(log_scale),
/// rotation = normalize(rotation), alpha = sigmoid(opacity_logit).
struct GaussianSplat {
    Vec3 center = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();
    Quaternion rotation;
    double opacity_logit = 0.0;
    std::array<double, 3> sh_dc{};
    std::vector<double> sh_rest;  // file order f_rest_0.., empty for degree 0

    bool operator==(const GaussianSplat&) const = default;
};

/// Number of f_rest values for a given SH degree: 3 * ((d + 1)^2 - 1).
std::size_t sh_rest_count(int sh_degree);
/// Inverse of sh_rest_count; throws FormatError for counts outside {0, 9, 24, 45}.
int sh_degree_from_rest_count(std::size_t count);

struct GaussianCloud {
    std::vector<GaussianSplat> splats;
    int sh_degree = 0;

    std::size_t size() const { return splats.size(); }
    bool empty() const { return splats.empty(); }
    std::vector<Vec3> centers() const;

    /// Throws FormatError when a splat's sh_rest length disagrees with sh_degree.
    void check_layout() const;

    bool operator==(const GaussianCloud&) const = default;
};

GaussianCloud read_gs_ply(const std::filesystem::path& path);

/// Binary little-endian float32 GS PLY with properties
/// x,y,z,nx,ny,nz,f_dc_*,f_rest_*,opacity,scale_*,rot_* (normals zero).
void write_gs_ply(const GaussianCloud& cloud, const std::filesystem::path& path);

/// Σ = R S Sᵀ Rᵀ with S = diag(exp(log_scale)).
Mat3 covariance_of(const Quaternion& rotation, const Vec3& log_scale);

/// `n` centers drawn without replacement when n <= N, with replacement
/// otherwise. Pure function of (cloud, n, seed).
PointSet sample_centers(const GaussianCloud& cloud, std::size_t n, std::uint64_t seed);

/// Indices behind sample_centers, exposed for callers that need to track
/// which Gaussians were drawn.
std::vector<std::size_t> sample_center_indices(std::size_t population, std::size_t n, std::uint64_t seed);

}  // namespace splatcage
