#pragma once

#include "splatcage/cage.hpp"
#include "splatcage/mvc.hpp"
#include "splatcage/splat_model.hpp"

#include <cstdint>
#include <vector>

namespace splatcage {

enum class JacobianMethod { FiniteDifference, Analytic };

/// The deformation p -> Σ ωᵢ(p) v′ᵢ defined by a source cage and a deformed
/// cage of identical topology.
class CageMap {
public:
    CageMap(const CageMesh& source, const CageMesh& deformed);

    const MvcEvaluator& evaluator() const { return evaluator_; }
    const CageMesh& deformed() const { return deformed_; }
    /// True when the deformed vertices equal the source vertices bit-for-bit.
    bool is_identity() const { return identity_; }
    /// 1e-5 × source bbox diagonal.
    double default_step() const { return 1e-5 * evaluator_.bbox_diagonal(); }

    Vec3 apply(const Vec3& p) const { return evaluator_.deform(p, deformed_.vertices); }

    /// Central differences, column k = (f(p + h eₖ) - f(p - h eₖ)) / 2h. When
    /// a stencil point falls within 1e-10 × bbox_diag of the cage surface the
    /// step is halved, at most four times, before NearSurfaceError.
    Mat3 jacobian_fd(const Vec3& p, double step) const;
    /// Σ v′ᵢ ∇ωᵢ(p)ᵀ.
    Mat3 jacobian_analytic(const Vec3& p) const;
    Mat3 jacobian(const Vec3& p, JacobianMethod method, double step) const;

private:
    MvcEvaluator evaluator_;
    CageMesh deformed_;
    bool identity_ = false;
};

/// `step <= 0` selects the default 1e-5 × bbox_diag.
Mat3 jacobian_fd(const CageMesh& source, const CageMesh& deformed, const Vec3& point, double step = 0.0);
Mat3 jacobian_analytic(const CageMesh& source, const CageMesh& deformed, const Vec3& point);

struct JacobianOptions {
    JacobianMethod method = JacobianMethod::FiniteDifference;
    /// Finite-difference step as a fraction of the source cage diagonal.
    double step_fraction = 1e-5;
    /// Sites per evaluation block. Scheduling only; no numerical effect.
    std::size_t block_size = 200;
};

/// Jacobians at sampled Gaussian centers plus a nearest-site assignment for
/// every Gaussian.
struct JacobianField {
    std::vector<std::size_t> site_indices;   // Gaussian index of each site, ascending
    std::vector<Mat3> site_jacobians;        // one per site
    std::vector<std::size_t> assignment;     // per Gaussian, index into sites
    std::vector<std::uint8_t> site_singular; // 1 where |det J| <= 1e-12

    std::size_t singular_count() const;
    const Mat3& jacobian_for(std::size_t gaussian) const { return site_jacobians[assignment[gaussian]]; }
};

/// Samples min(m, N) sites without replacement, evaluates their Jacobians and
/// assigns each remaining Gaussian the Jacobian of its nearest site center
/// (ties to the lowest site). m >= N makes every Gaussian its own site.
JacobianField build_jacobian_field(const GaussianCloud& cloud, const CageMesh& source_cage,
                                   const CageMesh& deformed_cage, std::size_t m, std::uint64_t seed,
                                   const JacobianOptions& options = {});

struct CovarianceUpdate {
    Quaternion rotation;
    Vec3 log_scale = Vec3::Zero();
};

/// Re-factors Σ′ = J R S Sᵀ Rᵀ Jᵀ into rotation and log-scale. Eigenvalues
/// are sorted descending, R′ is made proper by negating its third column if
/// needed, and eigenvalues are clamped below at 1e-18. Only Σ′ is unique:
/// axis order and quaternion sign are conventions. `index` tags errors.
CovarianceUpdate transform_covariance(const Mat3& jacobian, const Quaternion& rotation, const Vec3& log_scale,
                                      std::size_t index = NumericError::npos);

struct DeformOptions {
    std::size_t sites = 10000;
    std::uint64_t seed = 0;
    bool update_covariance = true;
    JacobianOptions jacobian;
    /// Centers deformed per chunk. Scheduling only; no numerical effect.
    std::size_t center_chunk = 30000;
};

/// Moves centers through the cage map and, optionally, transports each
/// covariance through its assigned Jacobian. Opacity and SH are copied, and
/// splat order is preserved. An identical cage pair returns the input as is.
GaussianCloud deform_cloud(const GaussianCloud& cloud, const CageMesh& source_cage, const CageMesh& deformed_cage,
                           const DeformOptions& options = {});

}  // namespace splatcage
