#include "splatcage/cage.hpp"
#include "splatcage/covariance_transform.hpp"
#include "splatcage/mvc.hpp"
#include "splatcage/spatial_index.hpp"

#include "../support.hpp"

#include <doctest.h>

using namespace splatcage;
using namespace splatcage::testing;

namespace {

CageMesh regular_tetrahedron() {
    CageMesh t;
    t.vertices = {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)};
    for (std::uint32_t skip = 0; skip < 4; ++skip) {
        Triangle f{};
        int k = 0;
        for (std::uint32_t v = 0; v < 4; ++v) {
            if (v != skip) f[k++] = v;
        }
        const Vec3 n = (t.vertices[f[1]] - t.vertices[f[0]]).cross(t.vertices[f[2]] - t.vertices[f[0]]);
        if (n.dot(t.vertices[skip] - t.vertices[f[0]]) > 0) std::swap(f[1], f[2]);
        t.triangles.push_back(f);
    }
    return t;
}

std::vector<double> weights_at(const MvcEvaluator& mvc, const Vec3& p) {
    std::vector<double> w(mvc.vertex_count());
    mvc.weights(p, w);
    return w;
}

}  // namespace

TEST_CASE("template cage counts and extent") {
    Aabb unit;
    unit.extend(Vec3::Zero());
    unit.extend(Vec3::Ones());
    const CageMesh r1 = build_template_cage(unit, 1, 0.0);
    CHECK(r1.vertices.size() == 8);
    CHECK(r1.triangles.size() == 12);
    for (int r = 1; r <= 5; ++r) {
        const CageMesh c = build_template_cage(unit, r, 0.1);
        CHECK(c.vertices.size() == std::size_t((r + 1) * (r + 1) * (r + 1) - (r - 1) * (r - 1) * (r - 1)));
        CHECK(c.triangles.size() == std::size_t(12 * r * r));
        CHECK_NOTHROW(validate_cage(c));
        CHECK((c.bbox().extent() - Vec3::Constant(1.2)).norm() < 1e-12);
        CHECK((c.bbox().center() - unit.center()).norm() < 1e-12);
    }
}

TEST_CASE("cage validation rejects broken meshes") {
    CageMesh open = regular_tetrahedron();
    open.triangles.pop_back();
    CHECK_THROWS_AS(validate_cage(open), GeometryError);

    CageMesh inverted = regular_tetrahedron();
    for (auto& f : inverted.triangles) std::swap(f[1], f[2]);
    CHECK_THROWS_AS(validate_cage(inverted), GeometryError);

    CageMesh flat = regular_tetrahedron();
    flat.vertices[3] = flat.vertices[0];
    CHECK_THROWS_AS(validate_cage(flat), GeometryError);
}

TEST_CASE("winding number separates inside from outside") {
    const CageMesh cube = unit_box_cage(2);
    CHECK(winding_number(cube, Vec3(0.5, 0.5, 0.5)) == doctest::Approx(1.0));
    CHECK(winding_number(cube, Vec3(1.5, 0.5, 0.5)) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("tetrahedron centroid weights are one quarter each") {
    const MvcEvaluator mvc(regular_tetrahedron());
    for (double w : weights_at(mvc, Vec3::Zero())) CHECK(w == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("query at a cage vertex gives the indicator row") {
    const CageMesh cube = unit_box_cage(2);
    const MvcEvaluator mvc(cube);
    const auto w = weights_at(mvc, cube.vertices[3]);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] == doctest::Approx(i == 3 ? 1.0 : 0.0));
}

TEST_CASE("near-surface queries use barycentric coordinates on the face") {
    const CageMesh cube = unit_box_cage(1);
    const MvcEvaluator mvc(cube);
    const Vec3 p(0.3, 0.6, 1.0);
    const auto w = weights_at(mvc, p);
    Vec3 back = Vec3::Zero();
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        back += w[i] * cube.vertices[i];
        sum += w[i];
        CHECK(w[i] >= -1e-15);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((back - p).norm() < 1e-14);
}

TEST_CASE("random interior points: partition of unity and linear reproduction") {
    const CageMesh cube = unit_box_cage(2);
    const MvcEvaluator mvc(cube);
    Rng rng(42);
    for (int i = 0; i < 100; ++i) {
        const Vec3 p(rng.uniform(), rng.uniform(), rng.uniform());
        const auto w = weights_at(mvc, p);
        double sum = 0.0;
        Vec3 back = Vec3::Zero();
        for (std::size_t k = 0; k < w.size(); ++k) {
            sum += w[k];
            back += w[k] * cube.vertices[k];
            CHECK(w[k] >= -1e-12);  // convex cage
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        CHECK((back - p).norm() <= 1e-8 * cube.bbox().diagonal());
    }
}

TEST_CASE("deform_points reproduces identity, translation and scaling") {
    const CageMesh cube = unit_box_cage(2);
    PointSet pts;
    Rng rng(1);
    for (int i = 0; i < 50; ++i) pts.points.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    const MvcWeights w = mvc_weights(cube, pts);

    const PointSet same = deform_points(w, cube);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK((same.points[i] - pts.points[i]).norm() <= 1e-12);

    const Vec3 t(0.3, -2.0, 5.0);
    CageMesh moved = cube, stretched = cube;
    for (auto& v : moved.vertices) v += t;
    for (auto& v : stretched.vertices) v.x() *= 2.0;
    const PointSet a = deform_points(w, moved);
    const PointSet b = deform_points(w, stretched);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK((a.points[i] - (pts.points[i] + t)).norm() <= 1e-12);
        CHECK(b.points[i].x() == doctest::Approx(2.0 * pts.points[i].x()).epsilon(1e-12));
        CHECK(b.points[i].y() == doctest::Approx(pts.points[i].y()).epsilon(1e-12));
    }

    CageMesh other = cube;
    other.triangles.pop_back();
    CHECK_THROWS_AS(deform_points(w, other), GeometryError);
}

TEST_CASE("weight gradients: differentiated identities and a finite-difference oracle") {
    Rng rng(7);
    const CageMesh cage = smooth_perturbation(unit_box_cage(2), rng, 0.05);
    const MvcEvaluator mvc(cage);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 p(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8));
        const auto grad = mvc_gradient(cage, p);
        Vec3 sum = Vec3::Zero();
        Mat3 outer = Mat3::Zero();
        for (std::size_t i = 0; i < grad.size(); ++i) {
            sum += grad[i];
            outer += cage.vertices[i] * grad[i].transpose();
        }
        CHECK(sum.norm() <= 1e-7);
        CHECK((outer - Mat3::Identity()).norm() <= 1e-7);

        const double h = 1e-5;
        for (int k = 0; k < 3; ++k) {
            const auto plus = weights_at(mvc, p + h * Vec3::Unit(k));
            const auto minus = weights_at(mvc, p - h * Vec3::Unit(k));
            for (std::size_t i = 0; i < grad.size(); ++i) {
                CHECK(std::abs((plus[i] - minus[i]) / (2 * h) - grad[i][k]) <= 1e-5);
            }
        }
    }
    CHECK_THROWS_AS(mvc_gradient(cage, cage.vertices[0]), NearSurfaceError);
}

TEST_CASE("cage interpolation endpoints and linearity") {
    Rng rng(3);
    const CageMesh src = unit_box_cage(2);
    const CageMesh dst = smooth_perturbation(src, rng, 0.1);
    CHECK(interpolate_cage(src, dst, 0.0).vertices == src.vertices);
    CHECK(interpolate_cage(src, dst, 1.0).vertices == dst.vertices);

    PointSet pts;
    for (int i = 0; i < 30; ++i) pts.points.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    const MvcWeights w = mvc_weights(src, pts);
    const PointSet full = deform_points(w, dst);
    for (double lambda : {0.25, 0.5, 0.75}) {
        const PointSet mid = deform_points(w, interpolate_cage(src, dst, lambda));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const Vec3 expect = lambda * full.points[i] + (1.0 - lambda) * pts.points[i];
            CHECK((mid.points[i] - expect).norm() <= 1e-12);
        }
    }
    CageMesh other = dst;
    other.vertices.pop_back();
    CHECK_THROWS_AS(interpolate_cage(src, other, 0.5), GeometryError);
}

TEST_CASE("obj round trip keeps vertices exactly") {
    Rng rng(4);
    const CageMesh c = smooth_perturbation(unit_box_cage(3), rng, 0.07);
    const auto dir = scratch_dir("obj");
    write_obj(c, dir / "c.obj");
    const CageMesh back = read_obj(dir / "c.obj");
    CHECK(back.vertices == c.vertices);
    CHECK(back.triangles == c.triangles);
}

TEST_CASE("kd-tree matches brute force, ties included") {
    Rng rng(12);
    std::vector<Vec3> pts;
    for (int i = 0; i < 2000; ++i) pts.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    // Duplicates and a lattice create exact ties.
    for (int i = 0; i < 200; ++i) pts.push_back(pts[static_cast<std::size_t>(i) * 3]);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) pts.emplace_back(i * 0.25, j * 0.25, 0.5);
    const KdTree tree(pts);
    std::vector<Vec3> queries;
    for (int i = 0; i < 500; ++i) queries.emplace_back(rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2), rng.uniform());
    for (int i = 0; i < 4; ++i) queries.emplace_back(0.125 + 0.25 * i, 0.125, 0.5);
    for (int i = 0; i < 100; ++i) queries.push_back(pts[static_cast<std::size_t>(i) * 3]);
    const auto hits = tree.nearest_all(queries);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const Neighbor ref = nearest_brute_force(pts, queries[q]);
        CHECK(hits[q].index == ref.index);
        CHECK(hits[q].squared_distance == ref.squared_distance);
    }
}
