#pragma once

#include "splatcage/cage_fit.hpp"
#include "splatcage/covariance_transform.hpp"
#include "splatcage/metrics.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace splatcage {

/// Everything a pipeline run needs. Serialized to and from JSON with the
/// same key names the CLI exposes as flags.
struct PipelineConfig {
    std::filesystem::path source;
    std::filesystem::path target;
    TargetKind target_kind = TargetKind::GaussianSplat;
    /// Output directory; created if missing.
    std::filesystem::path output;

    FitConfig fit;  // fit.source_sample_count doubles as the target sample count
    std::size_t jacobian_sites = 10000;
    JacobianMethod jacobian_method = JacobianMethod::FiniteDifference;
    std::vector<double> lambdas{1.0};
    std::uint64_t seed = 0;

    bool update_covariance = true;
    bool normalize = true;
    bool baseline_mode = false;

    int cage_resolution = 2;
    double cage_padding = 0.1;
    /// Existing source cage (world frame) used instead of building one.
    std::filesystem::path cage_in;
    /// Existing deformed cage (world frame) for apply-cage.
    std::filesystem::path deformed_cage_in;
    /// Directory for cage OBJ files; defaults to `output`.
    std::filesystem::path cage_out;

    unsigned workers = 0;

    /// Throws Error on missing paths, colliding paths, bad λ or bad counts.
    void validate(bool need_target) const;
};

void to_json(nlohmann::json& j, const FitConfig& c);
void from_json(const nlohmann::json& j, FitConfig& c);
void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

enum class PipelineMode { Deform, FitCage, ApplyCage, Baseline };

/// Failure of one pipeline stage. Artifacts written before it are removed.
class PipelineError : public Error {
public:
    PipelineError(std::string stage, const std::string& message)
        : Error("[" + stage + "] " + message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct PipelineResult {
    std::vector<std::filesystem::path> artifacts;
    nlohmann::json metrics;
    FitReport fit_report;
    std::vector<StageTiming> timings;
    /// In-memory output clouds, one per λ (or one for the baseline).
    std::vector<GaussianCloud> outputs;
};

/// Runs the requested stages and writes artifacts into config.output:
///   deformed_lambda_<λ>.ply (or baseline.ply), source_cage.obj,
///   deformed_cage.obj, fit_trace.csv, metrics.json and timings.json.
/// Everything except timings.json is a pure function of the config.
PipelineResult run_pipeline(const PipelineConfig& config, PipelineMode mode = PipelineMode::Deform);

/// Output file name used for a given λ.
std::string output_name_for_lambda(double lambda);

/// Chamfer distance between two models in the unit-diagonal frame of `b`
/// (or raw coordinates when `normalize` is false).
nlohmann::json compare_models(const std::filesystem::path& a, TargetKind a_kind, const std::filesystem::path& b,
                              TargetKind b_kind, std::size_t samples, std::uint64_t seed, bool normalize);

}  // namespace splatcage
