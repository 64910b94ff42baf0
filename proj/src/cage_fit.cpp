#include "splatcage/cage_fit.hpp"

#include "splatcage/metrics.hpp"
#include "splatcage/mvc.hpp"
#include "splatcage/parallel.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace splatcage {

void FitConfig::validate() const {
    if (iterations < 1) throw Error("fit config: iterations must be >= 1");
    if (!(step_size > 0.0)) throw Error("fit config: step_size must be positive");
    if (!(final_step_ratio > 0.0)) throw Error("fit config: final_step_ratio must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw Error("fit config: beta1 and beta2 must lie in [0, 1)");
    }
    if (weight_align < 0.0 || weight_mvc_positivity < 0.0 || weight_normal < 0.0) {
        throw Error("fit config: loss weights must be non-negative");
    }
    if (convergence_window < 1) throw Error("fit config: convergence_window must be >= 1");
    if (source_sample_count < 1) throw Error("fit config: source_sample_count must be >= 1");
}

CageMesh build_source_cage(const PointSet& source_points, int resolution, double padding) {
    if (source_points.empty()) {
        throw Error("build_source_cage: no source points");
    }
    if (!(padding > 0.0)) {
        throw GeometryError("build_source_cage: padding must be positive to keep points interior");
    }
    return build_template_cage(source_points.bbox(), resolution, padding);
}

CageMesh refine_source_cage(const PointSet& source_points, int resolution, double padding, double min_padding) {
    if (!(min_padding > 0.0) || min_padding > padding) {
        throw Error("refine_source_cage: need 0 < min_padding <= padding");
    }
    auto admissible = [&](double pad) {
        const CageMesh cage = build_source_cage(source_points, resolution, pad);
        if (mvc_positivity_penalty(cage, source_points) > 0.0) return false;
        for (const auto& p : source_points.points) {
            if (winding_number(cage, p) < 0.5) return false;
        }
        return true;
    };
    if (admissible(min_padding)) return build_source_cage(source_points, resolution, min_padding);
    double lo = min_padding, hi = padding;
    for (int i = 0; i < 30 && hi - lo > 1e-4 * padding; ++i) {
        const double mid = 0.5 * (lo + hi);
        (admissible(mid) ? hi : lo) = mid;
    }
    return build_source_cage(source_points, resolution, hi);
}

AlignmentLoss alignment_loss(std::span<const Vec3> deformed, const KdTree& target_tree,
                             std::span<const Vec3> target) {
    if (deformed.empty() || target.empty()) {
        throw Error("alignment_loss: point sets must be non-empty");
    }
    const double inv_d = 1.0 / static_cast<double>(deformed.size());
    const double inv_t = 1.0 / static_cast<double>(target.size());

    AlignmentLoss out;
    out.gradients.assign(deformed.size(), Vec3::Zero());

    const auto forward = target_tree.nearest_all(deformed);
    double forward_sum = 0.0;
    for (std::size_t i = 0; i < deformed.size(); ++i) {
        forward_sum += forward[i].squared_distance;
        out.gradients[i] = 2.0 * inv_d * (deformed[i] - target[forward[i].index]);
    }

    const KdTree deformed_tree(deformed);
    const auto backward = deformed_tree.nearest_all(target);
    double backward_sum = 0.0;
    // Sequential scatter keeps the accumulation order fixed.
    for (std::size_t j = 0; j < target.size(); ++j) {
        backward_sum += backward[j].squared_distance;
        const std::size_t k = backward[j].index;
        out.gradients[k] += 2.0 * inv_t * (deformed[k] - target[j]);
    }
    out.value = forward_sum * inv_d + backward_sum * inv_t;
    return out;
}

AlignmentLoss alignment_loss(const PointSet& deformed_samples, const PointSet& target_samples) {
    if (target_samples.empty()) {
        throw Error("alignment_loss: point sets must be non-empty");
    }
    const KdTree tree(target_samples.points);
    return alignment_loss(deformed_samples.points, tree, target_samples.points);
}

double normal_preservation(const CageMesh& reference, std::span<const Vec3> current, std::vector<Vec3>* gradient) {
    if (current.size() != reference.vertices.size()) {
        throw GeometryError("normal_preservation: vertex count mismatch");
    }
    if (gradient) gradient->assign(current.size(), Vec3::Zero());
    double total = 0.0;
    for (const auto& t : reference.triangles) {
        const Vec3 ref = (reference.vertices[t[1]] - reference.vertices[t[0]])
                             .cross(reference.vertices[t[2]] - reference.vertices[t[0]])
                             .normalized();
        const Vec3 e1 = current[t[1]] - current[t[0]];
        const Vec3 e2 = current[t[2]] - current[t[0]];
        const Vec3 area_normal = e1.cross(e2);
        const double len = area_normal.norm();
        if (!(len > 0.0)) {
            throw NumericError("normal_preservation: cage face collapsed");
        }
        const Vec3 n = area_normal / len;
        total += 1.0 - n.dot(ref);
        if (gradient) {
            // d(-n·ref)/dN, then through N = e1 × e2.
            const Vec3 g_area = -(ref - n * n.dot(ref)) / len;
            const Vec3 g_e1 = e2.cross(g_area);
            const Vec3 g_e2 = g_area.cross(e1);
            (*gradient)[t[1]] += g_e1;
            (*gradient)[t[2]] += g_e2;
            (*gradient)[t[0]] -= g_e1 + g_e2;
        }
    }
    return total;
}

double mvc_positivity_penalty(const CageMesh& cage, const PointSet& samples) {
    const MvcWeights weights = mvc_weights(cage, samples);
    return weights.rows.array().min(0.0).square().sum();
}

namespace {

std::size_t count_exterior(const CageMesh& cage, const PointSet& samples) {
    std::vector<std::uint8_t> outside(samples.size(), 0);
    parallel_for(samples.size(), [&](std::size_t i) { outside[i] = winding_number(cage, samples.points[i]) < 0.5; });
    std::size_t n = 0;
    for (auto o : outside) n += o;
    return n;
}

}  // namespace

FitResult fit_deformed_cage(const CageMesh& source_cage, const PointSet& source_samples,
                            const PointSet& target_samples, const FitConfig& config) {
    config.validate();
    validate_cage(source_cage);
    if (source_samples.empty() || target_samples.empty()) {
        throw Error("fit_deformed_cage: source and target samples must be non-empty");
    }
    const std::size_t exterior = count_exterior(source_cage, source_samples);
    if (exterior * 100 > source_samples.size()) {
        throw GeometryError("fit_deformed_cage: " + std::to_string(exterior) + " of " +
                            std::to_string(source_samples.size()) + " source samples lie outside the source cage");
    }
    if (exterior > 0) {
        spdlog::warn("fit_deformed_cage: {} source samples lie outside the source cage", exterior);
    }

    const MvcWeights weights = mvc_weights(source_cage, source_samples);
    const double mvc_term = weights.rows.array().min(0.0).square().sum();
    const KdTree target_tree(target_samples.points);
    const std::size_t nv = source_cage.vertices.size();
    const std::size_t ns = source_samples.size();
    const double base_step = config.step_size * source_cage.bbox().diagonal();

    std::vector<Vec3> offset(nv, Vec3::Zero()), first(nv, Vec3::Zero()), second(nv, Vec3::Zero());
    std::vector<Vec3> vertices(nv), deformed(ns), grad(nv), normal_grad;
    FitResult result;
    FitReport& report = result.report;
    result.cage = source_cage;
    double best = std::numeric_limits<double>::infinity();

    for (int it = 0; it < config.iterations; ++it) {
        for (std::size_t k = 0; k < nv; ++k) vertices[k] = source_cage.vertices[k] + offset[k];
        parallel_for(ns, [&](std::size_t i) {
            const double* row = weights.rows.row(static_cast<Eigen::Index>(i)).data();
            Vec3 p = Vec3::Zero();
            for (std::size_t k = 0; k < nv; ++k) p += row[k] * vertices[k];
            deformed[i] = p;
        });
        const AlignmentLoss align = alignment_loss(deformed, target_tree, target_samples.points);
        const double normal = normal_preservation(source_cage, vertices, &normal_grad);
        const double total =
            config.weight_align * align.value + config.weight_mvc_positivity * mvc_term + config.weight_normal * normal;
        if (!std::isfinite(total)) {
            throw NumericError("fit_deformed_cage: non-finite loss at iteration " + std::to_string(it),
                               static_cast<std::size_t>(it));
        }
        if (it == 0) report.initial_chamfer = align.value;
        if (total < best) {
            best = total;
            report.best_iteration = it;
            result.cage.vertices = vertices;
        }
        report.loss_trace.push_back({it, total, align.value, mvc_term, normal, best});
        report.iterations_run = it + 1;

        const int window = config.convergence_window;
        if (best == 0.0) {
            report.converged = true;
            break;
        }
        // A stalled best alone is not enough: Adam's first steps can overshoot
        // and leave the current loss above the best for a whole window.
        if (it >= window && total - best <= config.convergence_tol * best) {
            const double past = report.loss_trace[static_cast<std::size_t>(it - window)].best_total;
            if (past - best <= config.convergence_tol * past) {
                report.converged = true;
                break;
            }
        }

        // Deformed samples are linear in the cage vertices: dL/dV = Wᵀ dL/dP.
        std::fill(grad.begin(), grad.end(), Vec3::Zero());
        for (std::size_t i = 0; i < ns; ++i) {
            const double* row = weights.rows.row(static_cast<Eigen::Index>(i)).data();
            for (std::size_t k = 0; k < nv; ++k) grad[k] += row[k] * align.gradients[i];
        }
        const double progress = config.iterations > 1 ? double(it) / double(config.iterations - 1) : 0.0;
        const double step = base_step * std::pow(config.final_step_ratio, progress);
        const double bias1 = 1.0 - std::pow(config.beta1, it + 1);
        const double bias2 = 1.0 - std::pow(config.beta2, it + 1);
        for (std::size_t k = 0; k < nv; ++k) {
            const Vec3 g = config.weight_align * grad[k] + config.weight_normal * normal_grad[k];
            first[k] = config.beta1 * first[k] + (1.0 - config.beta1) * g;
            second[k] = config.beta2 * second[k] + (1.0 - config.beta2) * g.cwiseProduct(g);
            const Vec3 m_hat = first[k] / bias1;
            const Vec3 v_hat = second[k] / bias2;
            offset[k] -= step * m_hat.cwiseQuotient((v_hat.array().sqrt() + config.adam_epsilon).matrix());
        }
    }

    const PointSet fitted = deform_points(weights, result.cage);
    report.final_chamfer = chamfer_distance(fitted, target_samples);
    return result;
}

void write_loss_trace_csv(const FitReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << "iteration,total,align,mvc,normal\n" << std::setprecision(17);
    for (const auto& r : report.loss_trace) {
        out << r.iteration << ',' << r.total << ',' << r.align << ',' << r.mvc << ',' << r.normal << '\n';
    }
    if (!out) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

}  // namespace splatcage
