#include "splatcage/mvc.hpp"

#include "splatcage/parallel.hpp"

#include <cmath>
#include <limits>

namespace splatcage {

namespace {

// Forward-mode dual number carrying the gradient with respect to the query
// point.
struct Dual {
    double v = 0.0;
    Vec3 g = Vec3::Zero();
};

inline Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.g + b.g}; }
inline Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.g - b.g}; }
inline Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.g * b.v + b.g * a.v}; }
inline Dual operator/(const Dual& a, const Dual& b) { return {a.v / b.v, (a.g * b.v - b.g * a.v) / (b.v * b.v)}; }
inline Dual operator*(double s, const Dual& a) { return {s * a.v, s * a.g}; }
inline Dual& operator+=(Dual& a, const Dual& b) {
    a.v += b.v;
    a.g += b.g;
    return a;
}
inline Dual sqrt(const Dual& a) {
    const double r = std::sqrt(a.v);
    return {r, a.g / (2.0 * r)};
}
inline Dual atan2(const Dual& y, const Dual& x) {
    const double r2 = x.v * x.v + y.v * y.v;
    return {std::atan2(y.v, x.v), (x.v * y.g - y.v * x.g) / r2};
}

inline double value(double x) { return x; }
inline double value(const Dual& x) { return x.v; }

using std::atan2;
using std::sqrt;

template <class T>
struct V3 {
    T x, y, z;
};

template <class T>
inline T dot(const V3<T>& a, const V3<T>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}
template <class T>
inline V3<T> cross(const V3<T>& a, const V3<T>& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
template <class T>
inline V3<T> divided(const V3<T>& a, const T& s) {
    return {a.x / s, a.y / s, a.z / s};
}

inline double lift(double c, double) { return c; }
inline Dual lift(double c, const Dual&) { return {c, Vec3::Zero()}; }

// Unnormalized mean value weights accumulated into `w`. `x` is the query
// point; for Dual it carries the identity seed so every derived quantity
// tracks d/dx.
template <class T>
void accumulate_weights(const CageMesh& cage, const V3<T>& x, std::vector<T>& w, std::vector<V3<T>>& u,
                        std::vector<T>& d) {
    const std::size_t nv = cage.vertices.size();
    const T zero = lift(0.0, x.x);
    w.assign(nv, zero);
    u.resize(nv);
    d.resize(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        const Vec3& p = cage.vertices[i];
        const V3<T> a{lift(p.x(), x.x) - x.x, lift(p.y(), x.x) - x.y, lift(p.z(), x.x) - x.z};
        d[i] = sqrt(dot(a, a));
        u[i] = divided(a, d[i]);
    }
    for (const auto& t : cage.triangles) {
        const V3<T>* corner[3] = {&u[t[0]], &u[t[1]], &u[t[2]]};
        V3<T> c[3];
        for (int k = 0; k < 3; ++k) {
            c[k] = cross(*corner[(k + 1) % 3], *corner[(k + 2) % 3]);
        }
        const T det = dot(*corner[0], c[0]);
        // Edge-on triangles subtend no solid angle; their contribution
        // vanishes in the limit.
        if (std::abs(value(det)) < 1e-15) continue;

        V3<T> mean{zero, zero, zero};
        for (int k = 0; k < 3; ++k) {
            const T s = sqrt(dot(c[k], c[k]));
            if (value(s) == 0.0) continue;
            const T theta = atan2(s, dot(*corner[(k + 1) % 3], *corner[(k + 2) % 3]));
            const T coeff = (0.5 * theta) / s;
            mean.x += coeff * c[k].x;
            mean.y += coeff * c[k].y;
            mean.z += coeff * c[k].z;
        }
        for (int k = 0; k < 3; ++k) {
            w[t[k]] += dot(c[k], mean) / (det * d[t[k]]);
        }
    }
}

// Closest point on triangle abc to p, returned as barycentric coordinates.
Vec3 closest_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return {1, 0, 0};
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return {0, 1, 0};
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return {1 - v, v, 0};
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return {0, 0, 1};
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return {1 - w, 0, w};
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return {0, 1 - w, w};
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return {1 - v - w, v, w};
}

}  // namespace

MvcEvaluator::MvcEvaluator(CageMesh cage) : cage_(std::move(cage)) {
    validate_cage(cage_);
    diag_ = cage_.bbox().diagonal();
    unit_normals_.reserve(cage_.triangles.size());
    for (const auto& t : cage_.triangles) {
        const Vec3& a = cage_.vertices[t[0]];
        unit_normals_.push_back((cage_.vertices[t[1]] - a).cross(cage_.vertices[t[2]] - a).normalized());
    }
}

std::optional<SurfaceHit> MvcEvaluator::near_surface(const Vec3& p, double threshold) const {
    std::optional<SurfaceHit> best;
    for (std::size_t f = 0; f < cage_.triangles.size(); ++f) {
        const auto& t = cage_.triangles[f];
        const Vec3& a = cage_.vertices[t[0]];
        if (std::abs((p - a).dot(unit_normals_[f])) >= threshold) continue;
        const Vec3& b = cage_.vertices[t[1]];
        const Vec3& c = cage_.vertices[t[2]];
        const Vec3 bary = closest_barycentric(p, a, b, c);
        const double dist = (bary[0] * a + bary[1] * b + bary[2] * c - p).norm();
        if (dist < threshold && (!best || dist < best->distance)) {
            best = SurfaceHit{f, bary, dist};
        }
    }
    return best;
}

bool MvcEvaluator::weights(const Vec3& p, std::span<double> out) const {
    const std::size_t nv = vertex_count();
    if (out.size() != nv) {
        throw Error("MvcEvaluator::weights: output size mismatch");
    }
    if (const auto hit = near_surface(p, surface_tolerance())) {
        std::fill(out.begin(), out.end(), 0.0);
        const auto& t = cage_.triangles[hit->triangle];
        for (int k = 0; k < 3; ++k) out[t[k]] += hit->barycentric[k];
        return true;
    }
    thread_local std::vector<double> w, d;
    thread_local std::vector<V3<double>> u;
    accumulate_weights(cage_, V3<double>{p.x(), p.y(), p.z()}, w, u, d);
    double total = 0.0;
    for (double x : w) total += x;
    if (!std::isfinite(total) || total == 0.0) {
        throw NumericError("mean value coordinates: weight sum is zero or non-finite");
    }
    for (std::size_t i = 0; i < nv; ++i) out[i] = w[i] / total;
    return false;
}

void MvcEvaluator::gradients(const Vec3& p, std::span<double> weights_out, std::span<Vec3> gradients_out) const {
    const std::size_t nv = vertex_count();
    if (weights_out.size() != nv || gradients_out.size() != nv) {
        throw Error("MvcEvaluator::gradients: output size mismatch");
    }
    if (near_surface(p, 1e-8 * diag_)) {
        throw NearSurfaceError("mean value gradient: point is within 1e-8 x bbox_diag of the cage surface");
    }
    thread_local std::vector<Dual> w, d;
    thread_local std::vector<V3<Dual>> u;
    const V3<Dual> x{{p.x(), Vec3::UnitX()}, {p.y(), Vec3::UnitY()}, {p.z(), Vec3::UnitZ()}};
    accumulate_weights(cage_, x, w, u, d);
    Dual total;
    for (const auto& wi : w) total += wi;
    if (!std::isfinite(total.v) || total.v == 0.0) {
        throw NumericError("mean value gradient: weight sum is zero or non-finite");
    }
    for (std::size_t i = 0; i < nv; ++i) {
        const Dual normalized = w[i] / total;
        weights_out[i] = normalized.v;
        gradients_out[i] = normalized.g;
    }
}

Vec3 MvcEvaluator::deform(const Vec3& p, std::span<const Vec3> deformed_vertices) const {
    thread_local std::vector<double> row;
    row.resize(vertex_count());
    weights(p, row);
    Vec3 out = Vec3::Zero();
    for (std::size_t i = 0; i < row.size(); ++i) out += row[i] * deformed_vertices[i];
    return out;
}

MvcWeights mvc_weights(const CageMesh& cage, const PointSet& points) {
    const MvcEvaluator evaluator(cage);
    MvcWeights result;
    result.rows.resize(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(cage.vertices.size()));
    result.query_points = points.points;
    result.topology = cage.triangles;
    const std::size_t nv = cage.vertices.size();
    parallel_for(points.size(), [&](std::size_t i) {
        evaluator.weights(points.points[i], std::span<double>(result.rows.row(static_cast<Eigen::Index>(i)).data(), nv));
    });
    return result;
}

PointSet deform_points(const MvcWeights& weights, const CageMesh& deformed_cage) {
    if (static_cast<std::size_t>(weights.rows.cols()) != deformed_cage.vertices.size() ||
        weights.topology != deformed_cage.triangles) {
        throw GeometryError("deform_points: deformed cage topology differs from the weighted cage");
    }
    PointSet out;
    out.points.resize(static_cast<std::size_t>(weights.rows.rows()));
    const std::size_t nv = deformed_cage.vertices.size();
    parallel_for(out.points.size(), [&](std::size_t i) {
        const double* row = weights.rows.row(static_cast<Eigen::Index>(i)).data();
        Vec3 p = Vec3::Zero();
        for (std::size_t k = 0; k < nv; ++k) p += row[k] * deformed_cage.vertices[k];
        out.points[i] = p;
    });
    return out;
}

std::vector<Vec3> mvc_gradient(const CageMesh& cage, const Vec3& point) {
    const MvcEvaluator evaluator(cage);
    std::vector<double> w(cage.vertices.size());
    std::vector<Vec3> grad(cage.vertices.size());
    evaluator.gradients(point, w, grad);
    return grad;
}

}  // namespace splatcage
