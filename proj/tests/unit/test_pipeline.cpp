#include "splatcage/pipeline.hpp"

#include "../support.hpp"

#include <doctest.h>

#include <fstream>
#include <iterator>

using namespace splatcage;
using namespace splatcage::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

PipelineConfig small_config(const fs::path& dir, const fs::path& source, const fs::path& target) {
    PipelineConfig c;
    c.source = source;
    c.target = target;
    c.output = dir / "out";
    c.fit.iterations = 150;
    c.fit.source_sample_count = 1500;
    c.jacobian_sites = 200;
    c.cage_resolution = 2;
    return c;
}

GaussianCloud stretched(GaussianCloud cloud, const Vec3& factors) {
    for (auto& s : cloud.splats) s.center = s.center.cwiseProduct(factors);
    return cloud;
}

}  // namespace

TEST_CASE("lambda list writes one file per value and lambda 0 keeps the source") {
    const auto dir = scratch_dir("pipe_lambda");
    const GaussianCloud src = random_cloud(1500, 1);
    write_gs_ply(src, dir / "src.ply");
    write_gs_ply(stretched(random_cloud(1500, 2), Vec3(1.5, 1, 1)), dir / "dst.ply");
    PipelineConfig c = small_config(dir, dir / "src.ply", dir / "dst.ply");
    c.lambdas = {0.0, 0.5, 1.0};
    const PipelineResult r = run_pipeline(c);
    for (double l : c.lambdas) CHECK(fs::exists(c.output / output_name_for_lambda(l)));
    CHECK(output_name_for_lambda(0.5) == "deformed_lambda_0.500.ply");
    for (const char* f : {"source_cage.obj", "deformed_cage.obj", "fit_trace.csv", "metrics.json", "timings.json"}) {
        CHECK(fs::exists(c.output / f));
    }
    // The pipeline sees the float values stored in the file.
    const GaussianCloud stored = read_gs_ply(dir / "src.ply");
    CHECK(read_gs_ply(c.output / output_name_for_lambda(0.0)) == stored);
    CHECK(r.outputs[0] == stored);
    CHECK(r.metrics["frame"] == "normalized_unit_diagonal");
}

TEST_CASE("same config twice gives byte identical outputs") {
    const auto dir = scratch_dir("pipe_det");
    write_gs_ply(random_cloud(1000, 3), dir / "src.ply");
    write_gs_ply(stretched(random_cloud(1000, 4), Vec3(1, 2, 1)), dir / "dst.ply");
    PipelineConfig a = small_config(dir, dir / "src.ply", dir / "dst.ply");
    a.fit.iterations = 40;
    PipelineConfig b = a;
    b.output = dir / "out2";
    b.workers = 3;
    run_pipeline(a);
    run_pipeline(b);
    for (const char* f : {"deformed_lambda_1.000.ply", "source_cage.obj", "deformed_cage.obj", "fit_trace.csv",
                          "metrics.json"}) {
        CHECK(slurp(a.output / f) == slurp(b.output / f));
    }
}

TEST_CASE("self target is a fixed point") {
    const auto dir = scratch_dir("pipe_self");
    const GaussianCloud src = random_cloud(1200, 5);
    write_gs_ply(src, dir / "src.ply");
    PipelineConfig c = small_config(dir, dir / "src.ply", dir / "src.ply");
    c.fit.iterations = 60;
    const PipelineResult r = run_pipeline(c);
    CHECK(r.metrics["cd"].get<double>() <= r.metrics["cd_input"].get<double>() * (1 + 1e-12) + 1e-15);
    const double diag = Aabb::of(src.centers()).diagonal();
    for (std::size_t i = 0; i < src.size(); ++i) {
        CHECK((r.outputs[0].splats[i].center - src.splats[i].center).norm() <= 1e-3 * diag);
    }
}

TEST_CASE("affine recovery through the full pipeline") {
    const auto dir = scratch_dir("pipe_affine");
    const GaussianCloud src = random_cloud(3000, 6);
    const Vec3 factors(2.0, 1.0, 0.75);
    write_gs_ply(src, dir / "src.ply");
    write_gs_ply(stretched(src, factors), dir / "dst.ply");
    PipelineConfig c = small_config(dir, dir / "src.ply", dir / "dst.ply");
    c.fit.iterations = 500;
    c.fit.source_sample_count = 3000;
    const PipelineResult r = run_pipeline(c);
    const double diag = Aabb::of(stretched(src, factors).centers()).diagonal();
    double worst = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        worst = std::max(worst, (r.outputs[0].splats[i].center - src.splats[i].center.cwiseProduct(factors)).norm());
    }
    CHECK(worst <= 1e-3 * diag);
}

TEST_CASE("apply-cage, update_covariance off and baseline modes") {
    const auto dir = scratch_dir("pipe_modes");
    write_gs_ply(random_cloud(800, 7), dir / "src.ply");
    write_gs_ply(stretched(random_cloud(800, 8), Vec3(1, 1, 3)), dir / "dst.ply");
    PipelineConfig c = small_config(dir, dir / "src.ply", dir / "dst.ply");
    c.fit.iterations = 30;
    const PipelineResult full = run_pipeline(c, PipelineMode::Deform);

    PipelineConfig apply = c;
    apply.target.clear();
    apply.output = dir / "apply";
    apply.cage_in = c.output / "source_cage.obj";
    apply.deformed_cage_in = c.output / "deformed_cage.obj";
    apply.update_covariance = false;
    const PipelineResult reused = run_pipeline(apply, PipelineMode::ApplyCage);
    for (std::size_t i = 0; i < full.outputs[0].size(); ++i) {
        CHECK(reused.outputs[0].splats[i].center == full.outputs[0].splats[i].center);
    }

    PipelineConfig base = c;
    base.output = dir / "base";
    run_pipeline(base, PipelineMode::Baseline);
    CHECK(fs::exists(base.output / "baseline.ply"));
}

TEST_CASE("failures are stage tagged and leave no partial outputs") {
    const auto dir = scratch_dir("pipe_fail");
    write_gs_ply(random_cloud(300, 9), dir / "src.ply");
    PipelineConfig c = small_config(dir, dir / "src.ply", dir / "missing.ply");
    try {
        run_pipeline(c);
        FAIL("expected failure");
    } catch (const PipelineError& e) {
        CHECK(e.stage() == "load-target");
    }
    CHECK(!fs::exists(c.output / "metrics.json"));

    PipelineConfig bad = c;
    bad.lambdas = {1.5};
    CHECK_THROWS_AS(run_pipeline(bad), PipelineError);

    PipelineConfig clash = c;
    clash.output = c.source;
    CHECK_THROWS_AS(run_pipeline(clash), PipelineError);
}

TEST_CASE("config json round trip") {
    PipelineConfig c;
    c.source = "a.ply";
    c.target = "b.obj";
    c.target_kind = TargetKind::Mesh;
    c.lambdas = {0.25, 1.0};
    c.fit.iterations = 77;
    c.jacobian_method = JacobianMethod::Analytic;
    const nlohmann::json j = c;
    const PipelineConfig back = j.get<PipelineConfig>();
    CHECK(back.target_kind == TargetKind::Mesh);
    CHECK(back.lambdas == c.lambdas);
    CHECK(back.fit.iterations == 77);
    CHECK(back.jacobian_method == JacobianMethod::Analytic);
    CHECK(nlohmann::json(back) == j);
}
