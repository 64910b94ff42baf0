#include "splatcage/pipeline.hpp"

#include "splatcage/mvc.hpp"
#include "splatcage/parallel.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace splatcage {

namespace fs = std::filesystem;
using nlohmann::json;

void to_json(json& j, const FitConfig& c) {
    j = json{{"iterations", c.iterations},
             {"step_size", c.step_size},
             {"final_step_ratio", c.final_step_ratio},
             {"beta1", c.beta1},
             {"beta2", c.beta2},
             {"adam_epsilon", c.adam_epsilon},
             {"weight_align", c.weight_align},
             {"weight_mvc_positivity", c.weight_mvc_positivity},
             {"weight_normal", c.weight_normal},
             {"seed", c.seed},
             {"source_sample_count", c.source_sample_count},
             {"convergence_tol", c.convergence_tol},
             {"convergence_window", c.convergence_window},
             {"refine_source_cage", c.refine_source_cage}};
}

void from_json(const json& j, FitConfig& c) {
    const FitConfig d;
    c.iterations = j.value("iterations", d.iterations);
    c.step_size = j.value("step_size", d.step_size);
    c.final_step_ratio = j.value("final_step_ratio", d.final_step_ratio);
    c.beta1 = j.value("beta1", d.beta1);
    c.beta2 = j.value("beta2", d.beta2);
    c.adam_epsilon = j.value("adam_epsilon", d.adam_epsilon);
    c.weight_align = j.value("weight_align", d.weight_align);
    c.weight_mvc_positivity = j.value("weight_mvc_positivity", d.weight_mvc_positivity);
    c.weight_normal = j.value("weight_normal", d.weight_normal);
    c.seed = j.value("seed", d.seed);
    c.source_sample_count = j.value("source_sample_count", d.source_sample_count);
    c.convergence_tol = j.value("convergence_tol", d.convergence_tol);
    c.convergence_window = j.value("convergence_window", d.convergence_window);
    c.refine_source_cage = j.value("refine_source_cage", d.refine_source_cage);
}

void to_json(json& j, const PipelineConfig& c) {
    j = json{{"source", c.source.string()},
             {"target", c.target.string()},
             {"target_kind", to_string(c.target_kind)},
             {"output", c.output.string()},
             {"fit", c.fit},
             {"jacobian_sites", c.jacobian_sites},
             {"jacobian_method", c.jacobian_method == JacobianMethod::Analytic ? "analytic" : "fd"},
             {"lambdas", c.lambdas},
             {"seed", c.seed},
             {"update_covariance", c.update_covariance},
             {"normalize", c.normalize},
             {"baseline_mode", c.baseline_mode},
             {"cage_resolution", c.cage_resolution},
             {"cage_padding", c.cage_padding},
             {"cage_in", c.cage_in.string()},
             {"deformed_cage_in", c.deformed_cage_in.string()},
             {"cage_out", c.cage_out.string()},
             {"workers", c.workers}};
}

void from_json(const json& j, PipelineConfig& c) {
    const PipelineConfig d;
    c.source = j.value("source", std::string());
    c.target = j.value("target", std::string());
    c.target_kind = parse_target_kind(j.value("target_kind", to_string(d.target_kind)));
    c.output = j.value("output", std::string());
    c.fit = j.contains("fit") ? j.at("fit").get<FitConfig>() : d.fit;
    c.jacobian_sites = j.value("jacobian_sites", d.jacobian_sites);
    const std::string method = j.value("jacobian_method", std::string("fd"));
    if (method != "fd" && method != "analytic") {
        throw Error("config: jacobian_method must be 'fd' or 'analytic'");
    }
    c.jacobian_method = method == "analytic" ? JacobianMethod::Analytic : JacobianMethod::FiniteDifference;
    c.lambdas = j.value("lambdas", d.lambdas);
    c.seed = j.value("seed", d.seed);
    c.update_covariance = j.value("update_covariance", d.update_covariance);
    c.normalize = j.value("normalize", d.normalize);
    c.baseline_mode = j.value("baseline_mode", d.baseline_mode);
    c.cage_resolution = j.value("cage_resolution", d.cage_resolution);
    c.cage_padding = j.value("cage_padding", d.cage_padding);
    c.cage_in = j.value("cage_in", std::string());
    c.deformed_cage_in = j.value("deformed_cage_in", std::string());
    c.cage_out = j.value("cage_out", std::string());
    c.workers = j.value("workers", d.workers);
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    try {
        return json::parse(in).get<PipelineConfig>();
    } catch (const json::exception& e) {
        throw FormatError("config '" + path.string() + "': " + e.what());
    }
}

void PipelineConfig::validate(bool need_target) const {
    if (source.empty()) throw Error("config: source path is required");
    if (output.empty()) throw Error("config: output directory is required");
    if (need_target && target.empty()) throw Error("config: target path is required");
    std::set<fs::path> distinct;
    for (const fs::path& p : {source, target, output, cage_in, deformed_cage_in}) {
        if (p.empty()) continue;
        if (!distinct.insert(fs::weakly_canonical(p)).second) {
            // A self-target (same file as source and target) is a legitimate
            // sanity run.
            if (p == target && fs::weakly_canonical(target) == fs::weakly_canonical(source)) continue;
            throw Error("config: paths must be distinct ('" + p.string() + "' repeats)");
        }
    }
    if (lambdas.empty()) throw Error("config: at least one lambda is required");
    for (double l : lambdas) {
        if (!(l >= 0.0 && l <= 1.0)) throw Error("config: lambda values must lie in [0, 1]");
    }
    if (jacobian_sites < 1) throw Error("config: jacobian_sites must be >= 1");
    if (cage_resolution < 1) throw Error("config: cage_resolution must be >= 1");
    if (!(cage_padding > 0.0)) throw Error("config: cage_padding must be positive");
    fit.validate();
}

std::string output_name_for_lambda(double lambda) {
    std::ostringstream name;
    name.setf(std::ios::fixed);
    name.precision(3);
    name << "deformed_lambda_" << lambda << ".ply";
    return name.str();
}

namespace {

CageMesh transformed(const CageMesh& cage, const std::function<Vec3(const Vec3&)>& f) {
    CageMesh out = cage;
    for (auto& v : out.vertices) v = f(v);
    return out;
}

PointSet transformed(const PointSet& points, const Normalization& n) {
    PointSet out;
    out.points.reserve(points.size());
    for (const auto& p : points.points) out.points.push_back(n.apply(p));
    out.normals = points.normals;
    return out;
}

// Writes `content` deterministically and records the artifact.
void write_text(const fs::path& path, const std::string& content, std::vector<fs::path>& artifacts) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
    artifacts.push_back(path);
}

class StageRunner {
public:
    explicit StageRunner(PipelineResult& result) : result_(result) {}

    template <class F>
    auto operator()(const std::string& stage, F&& body) -> decltype(body()) {
        spdlog::info("stage {}: start", stage);
        const auto start = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(body())>) {
                body();
                finish(stage, start);
            } else {
                auto value = body();
                finish(stage, start);
                return value;
            }
        } catch (const PipelineError&) {
            throw;
        } catch (const std::exception& e) {
            throw PipelineError(stage, e.what());
        }
    }

private:
    void finish(const std::string& stage, std::chrono::steady_clock::time_point start) {
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result_.timings.push_back({stage, seconds});
        spdlog::info("stage {}: {:.3f} s", stage, seconds);
    }

    PipelineResult& result_;
};

void check_written_cloud(const fs::path& path, const GaussianCloud& expected) {
    const GaussianCloud back = read_gs_ply(path);
    if (back.size() != expected.size() || back.sh_degree != expected.sh_degree) {
        throw Error("re-read of '" + path.string() + "' does not match the written cloud");
    }
    for (const auto& s : back.splats) {
        if (!s.center.allFinite() || !s.log_scale.allFinite() || !(s.rotation.norm() > 0.0)) {
            throw NumericError("output '" + path.string() + "' contains non-finite or degenerate splats");
        }
    }
}

PipelineResult run_stages(const PipelineConfig& config, PipelineMode mode, PipelineResult& result) {
    StageRunner stage(result);
    const bool need_target = mode != PipelineMode::ApplyCage;
    stage("config", [&] {
        config.validate(need_target);
        if (mode == PipelineMode::ApplyCage && (config.cage_in.empty() || config.deformed_cage_in.empty())) {
            throw Error("apply-cage needs both cage_in and deformed_cage_in");
        }
        set_worker_count(config.workers);
        fs::create_directories(config.output);
        if (!config.cage_out.empty()) fs::create_directories(config.cage_out);
    });
    const fs::path cage_dir = config.cage_out.empty() ? config.output : config.cage_out;
    const std::size_t n_sample = config.fit.source_sample_count;

    const GaussianCloud cloud = stage("load-source", [&] { return read_gs_ply(config.source); });
    // Drawing more samples than splats would only add duplicates.
    const std::size_t n_source = std::min(n_sample, cloud.size());
    const PointSet source_samples = stage("sample-source", [&] { return sample_centers(cloud, n_source, config.seed); });
    PointSet target;
    if (!config.target.empty()) {
        target = stage("load-target", [&] {
            return load_target_points(config.target, config.target_kind, n_sample, config.seed + 1);
        });
    }

    json metrics;
    metrics["frame"] = config.normalize ? "normalized_unit_diagonal" : "raw";
    metrics["n_source"] = source_samples.size();
    metrics["n_target"] = target.size();
    metrics["n_gaussians"] = cloud.size();
    metrics["seed"] = config.seed;
    metrics["normalize"] = config.normalize;
    metrics["update_covariance"] = config.update_covariance;

    const Normalization source_frame =
        config.normalize ? Normalization::unit_diagonal(source_samples.bbox()) : Normalization::identity();
    const Normalization target_frame = (config.normalize && !target.empty())
                                           ? Normalization::unit_diagonal(target.bbox())
                                           : Normalization::identity();
    const PointSet target_n = transformed(target, target_frame);
    if (!target.empty()) {
        metrics["cd_input"] = chamfer_distance(transformed(source_samples, source_frame), target_n);
    }

    if (mode == PipelineMode::Baseline || config.baseline_mode) {
        const GaussianCloud out = stage("baseline", [&] { return baseline_bbox_scale(cloud, target); });
        stage("write-output", [&] {
            const fs::path path = config.output / "baseline.ply";
            write_gs_ply(out, path);
            result.artifacts.push_back(path);
            check_written_cloud(path, out);
        });
        const PointSet moved = [&] {
            PointSet p;
            const auto idx = sample_center_indices(out.size(), n_source, config.seed);
            for (std::size_t i : idx) p.points.push_back(target_frame.apply(out.splats[i].center));
            return p;
        }();
        metrics["mode"] = "baseline";
        metrics["cd"] = chamfer_distance(moved, target_n);
        result.outputs.push_back(out);
        result.metrics = metrics;
        write_text(config.output / "metrics.json", metrics.dump(2) + "\n", result.artifacts);
        return result;
    }

    // Cages in the world frame.
    CageMesh source_cage, deformed_cage;
    stage("source-cage", [&] {
        if (!config.cage_in.empty()) {
            source_cage = read_obj(config.cage_in, true);
            validate_cage(source_cage);
            return;
        }
        PointSet centers_n;
        centers_n.points.reserve(cloud.size());
        for (const auto& s : cloud.splats) centers_n.points.push_back(source_frame.apply(s.center));
        const CageMesh cage_n = config.fit.refine_source_cage
                                    ? refine_source_cage(centers_n, config.cage_resolution, config.cage_padding)
                                    : build_source_cage(centers_n, config.cage_resolution, config.cage_padding);
        source_cage = transformed(cage_n, [&](const Vec3& v) { return source_frame.invert(v); });
    });

    if (mode == PipelineMode::ApplyCage) {
        stage("load-deformed-cage", [&] {
            deformed_cage = read_obj(config.deformed_cage_in, true);
            if (!deformed_cage.same_topology(source_cage)) {
                throw GeometryError("deformed cage topology differs from the source cage");
            }
        });
        metrics["mode"] = "apply-cage";
    } else {
        stage("fit-cage", [&] {
            const CageMesh cage_n = transformed(source_cage, [&](const Vec3& v) { return source_frame.apply(v); });
            FitResult fit = fit_deformed_cage(cage_n, transformed(source_samples, source_frame), target_n, config.fit);
            deformed_cage = transformed(fit.cage, [&](const Vec3& v) { return target_frame.invert(v); });
            result.fit_report = std::move(fit.report);
        });
        metrics["mode"] = mode == PipelineMode::FitCage ? "fit-cage" : "deform";
        metrics["fit"] = {{"initial_chamfer", result.fit_report.initial_chamfer},
                          {"final_chamfer", result.fit_report.final_chamfer},
                          {"iterations_run", result.fit_report.iterations_run},
                          {"best_iteration", result.fit_report.best_iteration},
                          {"converged", result.fit_report.converged}};
        stage("write-cages", [&] {
            write_obj(source_cage, cage_dir / "source_cage.obj");
            result.artifacts.push_back(cage_dir / "source_cage.obj");
            write_obj(deformed_cage, cage_dir / "deformed_cage.obj");
            result.artifacts.push_back(cage_dir / "deformed_cage.obj");
            write_loss_trace_csv(result.fit_report, config.output / "fit_trace.csv");
            result.artifacts.push_back(config.output / "fit_trace.csv");
        });
    }

    if (mode != PipelineMode::FitCage) {
        const MvcWeights sample_weights =
            stage("sample-weights", [&] { return mvc_weights(source_cage, source_samples); });
        json per_lambda = json::array();
        for (double lambda : config.lambdas) {
            const std::string tag = output_name_for_lambda(lambda);
            const CageMesh cage = interpolate_cage(source_cage, deformed_cage, lambda);
            DeformOptions options;
            options.sites = config.jacobian_sites;
            options.seed = config.seed;
            options.update_covariance = config.update_covariance;
            options.jacobian.method = config.jacobian_method;
            GaussianCloud out = stage("deform " + tag, [&] { return deform_cloud(cloud, source_cage, cage, options); });
            stage("write " + tag, [&] {
                write_gs_ply(out, config.output / tag);
                result.artifacts.push_back(config.output / tag);
                check_written_cloud(config.output / tag, out);
            });
            json entry{{"lambda", lambda}, {"file", tag}};
            if (!target.empty()) {
                const PointSet moved = transformed(deform_points(sample_weights, cage), target_frame);
                entry["cd"] = chamfer_distance(moved, target_n);
            }
            per_lambda.push_back(entry);
            result.outputs.push_back(std::move(out));
        }
        metrics["results"] = per_lambda;
        if (!target.empty()) metrics["cd"] = per_lambda.back()["cd"];
    }

    result.metrics = metrics;
    write_text(config.output / "metrics.json", metrics.dump(2) + "\n", result.artifacts);
    return result;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, PipelineMode mode) {
    PipelineResult result;
    try {
        run_stages(config, mode, result);
    } catch (...) {
        for (const auto& path : result.artifacts) {
            std::error_code ec;
            fs::remove(path, ec);
        }
        throw;
    }
    json timings = json::object();
    for (const auto& t : result.timings) timings[t.stage] = t.seconds;
    std::ofstream(config.output / "timings.json", std::ios::trunc) << timings.dump(2) << "\n";
    result.artifacts.push_back(config.output / "timings.json");
    return result;
}

json compare_models(const fs::path& a, TargetKind a_kind, const fs::path& b, TargetKind b_kind, std::size_t samples,
                    std::uint64_t seed, bool normalize) {
    const PointSet pa = load_target_points(a, a_kind, samples, seed);
    const PointSet pb = load_target_points(b, b_kind, samples, seed + 1);
    const Normalization frame = normalize ? Normalization::unit_diagonal(pb.bbox()) : Normalization::identity();
    return json{{"cd", chamfer_distance(transformed(pa, frame), transformed(pb, frame))},
                {"n_source", pa.size()},
                {"n_target", pb.size()},
                {"seed", seed},
                {"frame", normalize ? "normalized_unit_diagonal" : "raw"}};
}

}  // namespace splatcage
