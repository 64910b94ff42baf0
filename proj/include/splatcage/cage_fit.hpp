#pragma once

#include "splatcage/cage.hpp"
#include "splatcage/common.hpp"
#include "splatcage/spatial_index.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace splatcage {

/// Optimizer and loss settings for fitting a deformed cage.
struct FitConfig {
    int iterations = 500;
    /// Initial step, as a fraction of the source cage bbox diagonal.
    double step_size = 1e-2;
    /// Step at the last iteration relative to the initial step; the step
    /// decays geometrically in between.
    double final_step_ratio = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-12;
    double weight_align = 1.0;
    double weight_mvc_positivity = 0.1;
    double weight_normal = 0.05;
    std::uint64_t seed = 0;
    std::size_t source_sample_count = 30000;
    /// Stop when the best loss improves by less than this fraction over
    /// `convergence_window` iterations.
    double convergence_tol = 1e-5;
    int convergence_window = 20;
    /// Shrink the source cage padding before fitting (see refine_source_cage).
    bool refine_source_cage = false;

    /// Throws Error on negative weights, non-positive steps or iterations < 1.
    void validate() const;
};

struct LossRecord {
    int iteration = 0;
    double total = 0.0;
    double align = 0.0;
    double mvc = 0.0;
    double normal = 0.0;
    double best_total = 0.0;
};

struct FitReport {
    std::vector<LossRecord> loss_trace;
    double initial_chamfer = 0.0;
    double final_chamfer = 0.0;
    int iterations_run = 0;
    int best_iteration = 0;
    bool converged = false;
};

struct FitResult {
    CageMesh cage;
    FitReport report;
};

/// Box cage over the bbox of `source_points`, padded by `padding` × extent
/// per side, so every point sits at least padding × extent inside.
CageMesh build_source_cage(const PointSet& source_points, int resolution, double padding);

/// Smallest padding in [min_padding, padding] (bisection) for which every
/// point keeps non-negative weights and lies strictly inside.
CageMesh refine_source_cage(const PointSet& source_points, int resolution, double padding, double min_padding = 0.01);

struct AlignmentLoss {
    double value = 0.0;
    std::vector<Vec3> gradients;  // d value / d deformed_samples[i]
};

/// Symmetric squared Chamfer and its gradient with nearest-neighbor
/// assignments frozen at the current positions.
AlignmentLoss alignment_loss(const PointSet& deformed_samples, const PointSet& target_samples);
AlignmentLoss alignment_loss(std::span<const Vec3> deformed_samples, const KdTree& target_tree,
                             std::span<const Vec3> target_samples);

/// Σ_f (1 - n_f(current) · n_f(reference)) over cage faces, with gradient
/// per current vertex.
double normal_preservation(const CageMesh& reference, std::span<const Vec3> current, std::vector<Vec3>* gradient);

/// Σ max(0, -ω)² over all weights of the samples with respect to the cage.
double mvc_positivity_penalty(const CageMesh& cage, const PointSet& samples);

/// Optimizes vertex offsets Δv of C_s + Δv (starting at zero) against the
/// target samples with a first-order adaptive-moment method and returns the
/// best cage seen. Throws NumericError carrying the iteration on a
/// non-finite loss.
FitResult fit_deformed_cage(const CageMesh& source_cage, const PointSet& source_samples,
                            const PointSet& target_samples, const FitConfig& config);

/// CSV with header iteration,total,align,mvc,normal.
void write_loss_trace_csv(const FitReport& report, const std::filesystem::path& path);

}  // namespace splatcage
