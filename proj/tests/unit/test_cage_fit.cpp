#include "splatcage/cage_fit.hpp"
#include "splatcage/metrics.hpp"
#include "splatcage/mvc.hpp"

#include "../support.hpp"

#include <doctest.h>

using namespace splatcage;
using namespace splatcage::testing;

namespace {

PointSet random_points(std::size_t n, Rng& rng, double lo = 0.0, double hi = 1.0) {
    PointSet p;
    for (std::size_t i = 0; i < n; ++i) p.points.emplace_back(rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi));
    return p;
}

}  // namespace

TEST_CASE("source cage construction") {
    Rng rng(1);
    PointSet pts = random_points(500, rng);
    pts.points.push_back(Vec3::Zero());
    pts.points.push_back(Vec3::Ones());
    const CageMesh c = build_source_cage(pts, 2, 0.1);
    CHECK(c.vertices.size() == 26);
    CHECK((c.bbox().extent() - Vec3::Constant(1.2)).norm() < 1e-12);
    CHECK(mvc_positivity_penalty(c, pts) == 0.0);
    CHECK_THROWS_AS(build_source_cage(pts, 2, 0.0), GeometryError);

    PointSet flat = pts;
    for (auto& p : flat.points) p.z() = 0.5;
    const CageMesh thin = build_source_cage(flat, 2, 0.1);
    CHECK_NOTHROW(validate_cage(thin));
    CHECK(thin.bbox().extent().z() > 0.0);
}

TEST_CASE("refined cage is no looser and keeps every point inside") {
    Rng rng(2);
    const PointSet pts = random_points(300, rng);
    const CageMesh loose = build_source_cage(pts, 2, 0.3);
    const CageMesh tight = refine_source_cage(pts, 2, 0.3);
    CHECK(tight.bbox().diagonal() <= loose.bbox().diagonal());
    for (const auto& p : pts.points) CHECK(winding_number(tight, p) > 0.5);
}

TEST_CASE("alignment loss closed forms") {
    PointSet a, b;
    a.points = {Vec3(0, 0, 0)};
    b.points = {Vec3(1, 0, 0)};
    const AlignmentLoss l = alignment_loss(a, b);
    CHECK(l.value == doctest::Approx(2.0));
    CHECK((l.gradients[0] - 4.0 * (a.points[0] - b.points[0])).norm() < 1e-15);

    Rng rng(3);
    const PointSet c = random_points(40, rng);
    const AlignmentLoss zero = alignment_loss(c, c);
    CHECK(zero.value == 0.0);
    for (const auto& g : zero.gradients) CHECK(g.norm() == 0.0);
}

TEST_CASE("alignment gradient matches central differences") {
    Rng rng(4);
    const PointSet target = random_points(50, rng);
    PointSet moving = random_points(50, rng);
    const AlignmentLoss l = alignment_loss(moving, target);
    const double h = 1e-7;
    for (std::size_t i = 0; i < moving.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            PointSet plus = moving, minus = moving;
            plus.points[i][k] += h;
            minus.points[i][k] -= h;
            const double fd = (alignment_loss(plus, target).value - alignment_loss(minus, target).value) / (2 * h);
            CHECK(std::abs(fd - l.gradients[i][k]) <= 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("normal preservation gradient matches central differences") {
    Rng rng(5);
    const CageMesh ref = unit_box_cage(2);
    const CageMesh cur = smooth_perturbation(ref, rng, 0.05);
    std::vector<Vec3> grad;
    const double value = normal_preservation(ref, cur.vertices, &grad);
    CHECK(value > 0.0);
    CHECK(normal_preservation(ref, ref.vertices, nullptr) == doctest::Approx(0.0).epsilon(1e-12));
    const double h = 1e-6;
    for (std::size_t v = 0; v < cur.vertices.size(); ++v) {
        for (int k = 0; k < 3; ++k) {
            auto plus = cur.vertices, minus = cur.vertices;
            plus[v][k] += h;
            minus[v][k] -= h;
            const double fd = (normal_preservation(ref, plus, nullptr) - normal_preservation(ref, minus, nullptr)) / (2 * h);
            CHECK(std::abs(fd - grad[v][k]) <= 1e-6);
        }
    }
}

TEST_CASE("fitting to itself stays at the source cage") {
    Rng rng(6);
    const PointSet pts = random_points(800, rng);
    const CageMesh cage = build_source_cage(pts, 2, 0.1);
    FitConfig cfg;
    cfg.iterations = 50;
    const FitResult r = fit_deformed_cage(cage, pts, pts, cfg);
    for (std::size_t i = 0; i < cage.vertices.size(); ++i) {
        CHECK((r.cage.vertices[i] - cage.vertices[i]).norm() <= 1e-6 * cage.bbox().diagonal());
    }
    CHECK(r.report.final_chamfer <= r.report.initial_chamfer);
}

TEST_CASE("fitting recovers a stretch along x") {
    Rng rng(7);
    const PointSet src = random_points(2000, rng);
    PointSet dst = src;
    for (auto& p : dst.points) p.x() *= 2.0;
    const CageMesh cage = build_source_cage(src, 2, 0.1);
    FitConfig cfg;
    const FitResult r = fit_deformed_cage(cage, src, dst, cfg);
    const double diag = dst.bbox().diagonal();
    CHECK(r.report.final_chamfer <= 1e-4 * diag * diag);
    for (std::size_t i = 1; i < r.report.loss_trace.size(); ++i) {
        CHECK(r.report.loss_trace[i].best_total <= r.report.loss_trace[i - 1].best_total);
    }
}

TEST_CASE("fit refuses samples outside the source cage") {
    Rng rng(8);
    const PointSet pts = random_points(200, rng);
    const CageMesh small = build_source_cage(random_points(200, rng, 0.4, 0.6), 1, 0.01);
    CHECK_THROWS_AS(fit_deformed_cage(small, pts, pts, FitConfig{}), GeometryError);
}

TEST_CASE("config validation") {
    FitConfig c;
    c.iterations = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = FitConfig{};
    c.weight_normal = -1.0;
    CHECK_THROWS_AS(c.validate(), Error);
}
