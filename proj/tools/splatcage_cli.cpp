#include "splatcage/parallel.hpp"
#include "splatcage/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <optional>

using namespace splatcage;

namespace {

// Flags are optional so that values from --config survive unless overridden.
struct Overrides {
    std::string config;
    std::optional<std::string> source, target, target_kind, output, cage_in, deformed_cage_in, cage_out,
        jacobian_method;
    std::optional<std::size_t> sites, samples;
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<double>> lambdas;
    std::optional<int> iterations, cage_resolution;
    std::optional<double> cage_padding, step_size;
    std::optional<unsigned> workers;
    bool no_covariance = false;
    bool no_normalize = false;
    bool refine = false;
};

void add_common(CLI::App* cmd, Overrides& o, bool with_target) {
    cmd->add_option("--config", o.config, "JSON config file; flags override its values");
    cmd->add_option("--source", o.source, "source Gaussian splat PLY");
    if (with_target) {
        cmd->add_option("--target", o.target, "target model");
        cmd->add_option("--target-kind", o.target_kind, "mesh | pointcloud | gsplat")
            ->check(CLI::IsMember({"mesh", "pointcloud", "gsplat"}));
    }
    cmd->add_option("--output", o.output, "output directory");
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--samples", o.samples, "number of sampled centers / target points");
    cmd->add_option("--workers", o.workers, "worker threads (0 = all cores)");
    cmd->add_flag("--no-normalize", o.no_normalize, "fit in raw coordinates");
    cmd->add_option("--cage-resolution", o.cage_resolution, "box cage subdivisions per edge");
    cmd->add_option("--cage-padding", o.cage_padding, "box cage padding as a fraction of the extent");
    cmd->add_option("--cage-in", o.cage_in, "existing source cage OBJ");
    cmd->add_option("--cage-out", o.cage_out, "directory for cage OBJ files");
}

void add_deform(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--lambda", o.lambdas, "interpolation weights in [0, 1]")->delimiter(',');
    cmd->add_option("--sites", o.sites, "Jacobian sample sites");
    cmd->add_option("--jacobian", o.jacobian_method, "fd | analytic")->check(CLI::IsMember({"fd", "analytic"}));
    cmd->add_flag("--no-covariance", o.no_covariance, "move centers only");
}

void add_fit(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--iterations", o.iterations, "optimizer iterations");
    cmd->add_option("--step-size", o.step_size, "initial step as a fraction of the cage diagonal");
    cmd->add_flag("--refine-cage", o.refine, "shrink the source cage padding before fitting");
}

PipelineConfig resolve(const Overrides& o) {
    PipelineConfig c = o.config.empty() ? PipelineConfig{} : load_pipeline_config(o.config);
    if (o.source) c.source = *o.source;
    if (o.target) c.target = *o.target;
    if (o.target_kind) c.target_kind = parse_target_kind(*o.target_kind);
    if (o.output) c.output = *o.output;
    if (o.cage_in) c.cage_in = *o.cage_in;
    if (o.deformed_cage_in) c.deformed_cage_in = *o.deformed_cage_in;
    if (o.cage_out) c.cage_out = *o.cage_out;
    if (o.jacobian_method) {
        c.jacobian_method = *o.jacobian_method == "analytic" ? JacobianMethod::Analytic : JacobianMethod::FiniteDifference;
    }
    if (o.sites) c.jacobian_sites = *o.sites;
    if (o.samples) c.fit.source_sample_count = *o.samples;
    if (o.seed) c.seed = c.fit.seed = *o.seed;
    if (o.lambdas) c.lambdas = *o.lambdas;
    if (o.iterations) c.fit.iterations = *o.iterations;
    if (o.step_size) c.fit.step_size = *o.step_size;
    if (o.cage_resolution) c.cage_resolution = *o.cage_resolution;
    if (o.cage_padding) c.cage_padding = *o.cage_padding;
    if (o.workers) c.workers = *o.workers;
    if (o.no_covariance) c.update_covariance = false;
    if (o.no_normalize) c.normalize = false;
    if (o.refine) c.fit.refine_source_cage = true;
    return c;
}

void print_timings(const PipelineResult& result) {
    for (const auto& t : result.timings) std::cout << "  " << t.stage << ": " << t.seconds << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* level = std::getenv("SPLATCAGE_LOG")) {
        spdlog::set_level(spdlog::level::from_str(level));
    }

    CLI::App app{"Cage-based deformation of Gaussian splat models"};
    app.require_subcommand(1);
    Overrides o;

    auto* deform = app.add_subcommand("deform", "fit a cage to the target and deform the source");
    add_common(deform, o, true);
    add_deform(deform, o);
    add_fit(deform, o);

    auto* fit = app.add_subcommand("fit-cage", "fit and write the cage pair only");
    add_common(fit, o, true);
    add_fit(fit, o);

    auto* apply = app.add_subcommand("apply-cage", "deform the source with an existing cage pair");
    add_common(apply, o, false);
    add_deform(apply, o);
    apply->add_option("--deformed-cage", o.deformed_cage_in, "deformed cage OBJ")->required();

    auto* baseline = app.add_subcommand("baseline", "bounding-box scaling baseline");
    add_common(baseline, o, true);

    std::string a, b, a_kind = "gsplat", b_kind = "gsplat";
    std::size_t metric_samples = 30000;
    std::uint64_t metric_seed = 0;
    bool metric_raw = false;
    auto* metrics = app.add_subcommand("metrics", "Chamfer distance between two models");
    metrics->add_option("a", a, "first model")->required();
    metrics->add_option("b", b, "second model (defines the normalization frame)")->required();
    metrics->add_option("--a-kind", a_kind)->check(CLI::IsMember({"mesh", "pointcloud", "gsplat"}));
    metrics->add_option("--b-kind", b_kind)->check(CLI::IsMember({"mesh", "pointcloud", "gsplat"}));
    metrics->add_option("--samples", metric_samples);
    metrics->add_option("--seed", metric_seed);
    metrics->add_flag("--no-normalize", metric_raw);

    CLI11_PARSE(app, argc, argv);

    try {
        if (metrics->parsed()) {
            const auto report = compare_models(a, parse_target_kind(a_kind), b, parse_target_kind(b_kind),
                                               metric_samples, metric_seed, !metric_raw);
            std::cout << report.dump(2) << "\n";
            return 0;
        }
        PipelineMode mode = PipelineMode::Deform;
        if (fit->parsed()) mode = PipelineMode::FitCage;
        if (apply->parsed()) mode = PipelineMode::ApplyCage;
        if (baseline->parsed()) mode = PipelineMode::Baseline;

        const PipelineResult result = run_pipeline(resolve(o), mode);
        std::cout << "stage timings:\n";
        print_timings(result);
        if (result.metrics.contains("cd_input")) std::cout << "cd_input: " << result.metrics["cd_input"] << "\n";
        if (result.metrics.contains("cd")) std::cout << "cd_output: " << result.metrics["cd"] << "\n";
        for (const auto& path : result.artifacts) std::cout << "wrote " << path.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
