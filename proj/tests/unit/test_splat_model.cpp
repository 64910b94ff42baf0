#include "splatcage/ply.hpp"
#include "splatcage/splat_model.hpp"

#include "../support.hpp"

#include <doctest.h>

#include <fstream>
#include <iterator>
#include <set>

using namespace splatcage;
using namespace splatcage::testing;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("single splat survives a write/read round trip bit for bit") {
    const auto dir = scratch_dir("ply_one");
    const GaussianCloud cloud = float_representable(random_cloud(1, 3));
    write_gs_ply(cloud, dir / "one.ply");
    CHECK(read_gs_ply(dir / "one.ply") == cloud);
}

TEST_CASE("degree three layout is detected from 45 rest coefficients") {
    const auto dir = scratch_dir("ply_sh3");
    const GaussianCloud cloud = float_representable(random_cloud(5, 4, 0.0, 1.0, 3));
    REQUIRE(cloud.splats[0].sh_rest.size() == 45);
    write_gs_ply(cloud, dir / "sh3.ply");
    const GaussianCloud back = read_gs_ply(dir / "sh3.ply");
    CHECK(back.sh_degree == 3);
    CHECK(back == cloud);
}

TEST_CASE("missing rot_3 is reported by name") {
    const auto dir = scratch_dir("ply_norot");
    std::ofstream out(dir / "bad.ply");
    out << "ply\nformat ascii 1.0\nelement vertex 1\n";
    for (const char* name : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
                             "rot_0", "rot_1", "rot_2"}) {
        out << "property float " << name << "\n";
    }
    out << "end_header\n0 0 0 0 0 0 0 0 0 0 1 0 0\n";
    out.close();
    try {
        read_gs_ply(dir / "bad.ply");
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("rot_3") != std::string::npos);
    }
}

TEST_CASE("ascii input with double properties is accepted") {
    const auto dir = scratch_dir("ply_ascii");
    std::ofstream out(dir / "a.ply");
    out << "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 1\n";
    for (const char* name : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
                             "rot_0", "rot_1", "rot_2", "rot_3"}) {
        out << "property double " << name << "\n";
    }
    out << "end_header\n1.5 2 3 0.1 0.2 0.3 0.5 -1 -2 -3 1 0 0 0\n";
    out.close();
    const GaussianCloud c = read_gs_ply(dir / "a.ply");
    REQUIRE(c.size() == 1);
    CHECK(c.splats[0].center == Vec3(1.5, 2, 3));
    CHECK(c.splats[0].log_scale == Vec3(-1, -2, -3));
}

TEST_CASE("truncated binary body is an io error") {
    const auto dir = scratch_dir("ply_trunc");
    write_gs_ply(random_cloud(4, 1), dir / "full.ply");
    std::string bytes = slurp(dir / "full.ply");
    bytes.resize(bytes.size() - 10);
    std::ofstream(dir / "cut.ply", std::ios::binary) << bytes;
    CHECK_THROWS_AS(read_gs_ply(dir / "cut.ply"), IoError);
}

TEST_CASE("writer rejects an empty cloud and echoes the vertex count") {
    const auto dir = scratch_dir("ply_count");
    CHECK_THROWS_AS(write_gs_ply(GaussianCloud{}, dir / "empty.ply"), Error);
    write_gs_ply(random_cloud(2, 9), dir / "two.ply");
    CHECK(slurp(dir / "two.ply").find("element vertex 2\n") != std::string::npos);
}

TEST_CASE("write, read, write gives byte identical files") {
    const auto dir = scratch_dir("ply_bytes");
    write_gs_ply(random_cloud(50, 11, 0.0, 1.0, 1), dir / "a.ply");
    write_gs_ply(read_gs_ply(dir / "a.ply"), dir / "b.ply");
    CHECK(slurp(dir / "a.ply") == slurp(dir / "b.ply"));
}

TEST_CASE("covariance from rotation and log scale") {
    CHECK((covariance_of(Quaternion{}, Vec3::Zero()) - Mat3::Identity()).norm() == doctest::Approx(0.0));

    const double h = std::sqrt(0.5);
    const Mat3 c = covariance_of(Quaternion{h, 0, 0, h}, Vec3(std::log(2.0), 0, 0));
    CHECK((c - Vec3(1, 4, 1).asDiagonal().toDenseMatrix()).norm() < 1e-12);

    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        const Mat3 s = covariance_of(random_rotation(rng), Vec3(rng.uniform(-4, 1), rng.uniform(-4, 1), rng.uniform(-4, 1)));
        CHECK((s - s.transpose()).norm() <= 1e-12 * s.norm());
        Eigen::SelfAdjointEigenSolver<Mat3> eig(s);
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("quaternion conversions round trip with a non-negative w") {
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        const Mat3 r = random_rotation(rng).to_matrix();
        const Quaternion q = Quaternion::from_matrix(r);
        CHECK(q.w >= 0.0);
        CHECK((q.to_matrix() - r).norm() < 1e-12);
    }
    CHECK_THROWS_AS((Quaternion{0, 0, 0, 0}.to_matrix()), GeometryError);
}

TEST_CASE("center sampling") {
    const GaussianCloud cloud = random_cloud(300, 2);
    SUBCASE("n = N draws every center once") {
        const auto idx = sample_center_indices(cloud.size(), cloud.size(), 7);
        CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == cloud.size());
    }
    SUBCASE("same seed, same points") {
        CHECK(sample_centers(cloud, 40, 3).points == sample_centers(cloud, 40, 3).points);
    }
    SUBCASE("30000 distinct draws from a large population") {
        const auto idx = sample_center_indices(500000, 30000, 1);
        CHECK(idx.size() == 30000);
        CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 30000);
    }
}
