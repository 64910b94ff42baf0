#include "splatcage/splat_model.hpp"

#include "splatcage/ply.hpp"
#include "splatcage/random.hpp"

#include <Eigen/Geometry>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace splatcage {

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Mat3 Quaternion::to_matrix() const {
    const double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw GeometryError("degenerate rotation: quaternion has zero or non-finite norm");
    }
    return Eigen::Quaterniond(w / n, x / n, y / n, z / n).toRotationMatrix();
}

Quaternion Quaternion::from_matrix(const Mat3& rotation) {
    Eigen::Quaterniond q(rotation);
    q.normalize();
    // q and -q are the same rotation; keep w >= 0.
    if (q.w() < 0.0) {
        q.coeffs() = -q.coeffs();
    }
    return {q.w(), q.x(), q.y(), q.z()};
}

std::size_t sh_rest_count(int sh_degree) {
    if (sh_degree < 0 || sh_degree > 3) {
        throw FormatError("unsupported SH degree " + std::to_string(sh_degree));
    }
    return static_cast<std::size_t>(3 * ((sh_degree + 1) * (sh_degree + 1) - 1));
}

int sh_degree_from_rest_count(std::size_t count) {
    for (int d = 0; d <= 3; ++d) {
        if (sh_rest_count(d) == count) return d;
    }
    throw FormatError("unsupported SH layout: " + std::to_string(count) +
                      " f_rest properties (expected 0, 9, 24 or 45)");
}

std::vector<Vec3> GaussianCloud::centers() const {
    std::vector<Vec3> out;
    out.reserve(splats.size());
    for (const auto& s : splats) out.push_back(s.center);
    return out;
}

void GaussianCloud::check_layout() const {
    const std::size_t expected = sh_rest_count(sh_degree);
    for (std::size_t i = 0; i < splats.size(); ++i) {
        if (splats[i].sh_rest.size() != expected) {
            throw FormatError("splat " + std::to_string(i) + " has " + std::to_string(splats[i].sh_rest.size()) +
                              " SH rest coefficients, expected " + std::to_string(expected));
        }
    }
}

GaussianCloud read_gs_ply(const std::filesystem::path& path) {
    const ply::VertexTable table = ply::read_vertices(path);

    const auto& x = table.column("x");
    const auto& y = table.column("y");
    const auto& z = table.column("z");
    std::array<const std::vector<double>*, 3> dc{};
    std::array<const std::vector<double>*, 3> scale{};
    std::array<const std::vector<double>*, 4> rot{};
    for (int i = 0; i < 3; ++i) dc[i] = &table.column("f_dc_" + std::to_string(i));
    const auto& opacity = table.column("opacity");
    for (int i = 0; i < 3; ++i) scale[i] = &table.column("scale_" + std::to_string(i));
    for (int i = 0; i < 4; ++i) rot[i] = &table.column("rot_" + std::to_string(i));

    std::size_t rest_count = 0;
    for (const auto& name : table.names) {
        if (name.rfind("f_rest_", 0) == 0) ++rest_count;
    }
    GaussianCloud cloud;
    cloud.sh_degree = sh_degree_from_rest_count(rest_count);
    std::vector<const std::vector<double>*> rest(rest_count);
    for (std::size_t i = 0; i < rest_count; ++i) {
        rest[i] = &table.column("f_rest_" + std::to_string(i));
    }

    cloud.splats.resize(table.count);
    for (std::size_t r = 0; r < table.count; ++r) {
        GaussianSplat& s = cloud.splats[r];
        s.center = Vec3(x[r], y[r], z[r]);
        s.log_scale = Vec3((*scale[0])[r], (*scale[1])[r], (*scale[2])[r]);
        s.rotation = {(*rot[0])[r], (*rot[1])[r], (*rot[2])[r], (*rot[3])[r]};
        s.opacity_logit = opacity[r];
        s.sh_dc = {(*dc[0])[r], (*dc[1])[r], (*dc[2])[r]};
        s.sh_rest.resize(rest_count);
        for (std::size_t k = 0; k < rest_count; ++k) s.sh_rest[k] = (*rest[k])[r];
    }
    return cloud;
}

namespace {

void put_f32(std::string& out, double value) {
    float f = static_cast<float>(value);
    std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    if constexpr (std::endian::native == std::endian::big) {
        bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
    }
    char bytes[4];
    std::memcpy(bytes, &bits, 4);
    out.append(bytes, 4);
}

}  // namespace

void write_gs_ply(const GaussianCloud& cloud, const std::filesystem::path& path) {
    if (cloud.empty()) {
        throw Error("write_gs_ply: cloud is empty");
    }
    cloud.check_layout();
    const std::size_t rest = sh_rest_count(cloud.sh_degree);

    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size() << "\n";
    for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
        header << "property float " << name << "\n";
    }
    for (std::size_t i = 0; i < rest; ++i) header << "property float f_rest_" << i << "\n";
    header << "property float opacity\n";
    for (int i = 0; i < 3; ++i) header << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) header << "property float rot_" << i << "\n";
    header << "end_header\n";

    std::string body = header.str();
    body.reserve(body.size() + cloud.size() * (14 + rest) * 4);
    for (const auto& s : cloud.splats) {
        for (int k = 0; k < 3; ++k) put_f32(body, s.center[k]);
        for (int k = 0; k < 3; ++k) put_f32(body, 0.0);
        for (double c : s.sh_dc) put_f32(body, c);
        for (double c : s.sh_rest) put_f32(body, c);
        put_f32(body, s.opacity_logit);
        for (int k = 0; k < 3; ++k) put_f32(body, s.log_scale[k]);
        put_f32(body, s.rotation.w);
        put_f32(body, s.rotation.x);
        put_f32(body, s.rotation.y);
        put_f32(body, s.rotation.z);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("write_gs_ply: cannot open '" + path.string() + "' for writing");
    }
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) {
        throw IoError("write_gs_ply: write failed for '" + path.string() + "'");
    }
}

Mat3 covariance_of(const Quaternion& rotation, const Vec3& log_scale) {
    const Mat3 r = rotation.to_matrix();
    const Mat3 rs = r * log_scale.array().exp().matrix().asDiagonal();
    Mat3 sigma = rs * rs.transpose();
    // Products above are symmetric only up to rounding.
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    return sigma;
}

std::vector<std::size_t> sample_center_indices(std::size_t population, std::size_t n, std::uint64_t seed) {
    if (population == 0) {
        throw Error("sample_centers: cloud is empty");
    }
    if (n == 0) {
        throw Error("sample_centers: sample count must be at least 1");
    }
    Rng rng(seed);
    return n <= population ? sample_without_replacement(population, n, rng)
                           : sample_with_replacement(population, n, rng);
}

PointSet sample_centers(const GaussianCloud& cloud, std::size_t n, std::uint64_t seed) {
    const auto indices = sample_center_indices(cloud.size(), n, seed);
    PointSet out;
    out.points.reserve(indices.size());
    for (std::size_t i : indices) out.points.push_back(cloud.splats[i].center);
    return out;
}

}  // namespace splatcage
