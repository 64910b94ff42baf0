#include "splatcage/common.hpp"
#include "splatcage/random.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace splatcage {

Aabb Aabb::inflated_degenerate(double fraction) const {
    if (empty()) {
        throw GeometryError("cannot inflate an empty bounding box");
    }
    Aabb out = *this;
    const double diag = diagonal();
    const double thickness = diag > 0.0 ? fraction * diag : fraction;
    for (int axis = 0; axis < 3; ++axis) {
        if (max[axis] - min[axis] < thickness) {
            const double mid = 0.5 * (min[axis] + max[axis]);
            out.min[axis] = mid - 0.5 * thickness;
            out.max[axis] = mid + 0.5 * thickness;
        }
    }
    return out;
}

Aabb Aabb::of(std::span<const Vec3> points) {
    Aabb box;
    for (const auto& p : points) {
        box.extend(p);
    }
    return box;
}

Normalization Normalization::unit_diagonal(const Aabb& box) {
    const Aabb safe = box.inflated_degenerate();
    return {safe.center(), 1.0 / safe.diagonal()};
}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) {
        return 0;
    }
    // Reject the top partial bucket so every residue is equally likely.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count, Rng& rng) {
    if (count > population) {
        throw Error("sample_without_replacement: count exceeds population");
    }
    std::vector<std::size_t> pool(population);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(population - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

std::vector<std::size_t> sample_with_replacement(std::size_t population, std::size_t count, Rng& rng) {
    std::vector<std::size_t> out(count);
    for (auto& idx : out) {
        idx = static_cast<std::size_t>(rng.below(population));
    }
    return out;
}

}  // namespace splatcage
