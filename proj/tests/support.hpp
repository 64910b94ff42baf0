#pragma once

// Synthetic fixtures shared by the unit and acceptance tests.

#include "splatcage/cage.hpp"
#include "splatcage/random.hpp"
#include "splatcage/splat_model.hpp"

#include <cmath>
#include <filesystem>
#include <string>

namespace splatcage::testing {

inline Quaternion random_rotation(Rng& rng) {
    Quaternion q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    const double n = q.norm();
    return {q.w / n, q.x / n, q.y / n, q.z / n};
}

inline Mat3 random_matrix(Rng& rng, double spread = 1.0) {
    Mat3 m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = spread * rng.normal();
    return m;
}

// Uniform points in [lo, hi]^3 with random anisotropic Gaussians.
inline GaussianCloud random_cloud(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0,
                                  int sh_degree = 0) {
    Rng rng(seed);
    GaussianCloud cloud;
    cloud.sh_degree = sh_degree;
    cloud.splats.resize(n);
    for (auto& s : cloud.splats) {
        s.center = Vec3(rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi));
        s.log_scale = Vec3(rng.uniform(-5.0, -3.0), rng.uniform(-5.0, -3.0), rng.uniform(-5.0, -3.0));
        s.rotation = random_rotation(rng);
        s.opacity_logit = rng.uniform(-2.0, 2.0);
        s.sh_dc = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        s.sh_rest.resize(sh_rest_count(sh_degree));
        for (auto& c : s.sh_rest) c = rng.uniform(-0.5, 0.5);
    }
    return cloud;
}

// Rounds every field to float so a PLY round trip is bit exact.
inline GaussianCloud float_representable(GaussianCloud cloud) {
    auto f = [](double& v) { v = static_cast<double>(static_cast<float>(v)); };
    for (auto& s : cloud.splats) {
        s.center = s.center.cast<float>().cast<double>();
        s.log_scale = s.log_scale.cast<float>().cast<double>();
        for (double* v : {&s.rotation.w, &s.rotation.x, &s.rotation.y, &s.rotation.z, &s.opacity_logit}) f(*v);
        for (auto& c : s.sh_dc) f(c);
        for (auto& c : s.sh_rest) f(c);
    }
    return cloud;
}

inline CageMesh unit_box_cage(int resolution = 2) {
    Aabb box;
    box.extend(Vec3::Zero());
    box.extend(Vec3::Ones());
    return build_template_cage(box, resolution, 0.0);
}

// Smooth non-affine warp of a cage: a global rotation-free sinusoidal bend.
inline CageMesh smooth_perturbation(const CageMesh& cage, Rng& rng, double amplitude) {
    const Vec3 freq(rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0));
    const Vec3 phase(rng.uniform(0.0, 6.0), rng.uniform(0.0, 6.0), rng.uniform(0.0, 6.0));
    CageMesh out = cage;
    for (auto& v : out.vertices) {
        const Vec3 p = v;
        v += amplitude * Vec3(std::sin(freq[0] * p[1] + phase[0]), std::sin(freq[1] * p[2] + phase[1]),
                              std::sin(freq[2] * p[0] + phase[2]));
    }
    return out;
}

inline double relative_frobenius(const Mat3& a, const Mat3& b) { return (a - b).norm() / b.norm(); }

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("splatcage_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace splatcage::testing
