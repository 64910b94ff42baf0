#pragma once

#include "splatcage/common.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace splatcage {

struct Neighbor {
    std::size_t index = 0;
    double squared_distance = 0.0;
};

/// Static 3-d tree over a point array for exact nearest-neighbor queries.
/// Equidistant candidates resolve to the lowest point index, so results do
/// not depend on tree shape.
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(std::span<const Vec3> points);

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }

    Neighbor nearest(const Vec3& query) const;

    /// nearest() for every query, data-parallel.
    std::vector<Neighbor> nearest_all(std::span<const Vec3> queries) const;

private:
    struct Node {
        std::uint32_t begin = 0, end = 0;  // range into order_ for leaves
        std::int32_t left = -1, right = -1;
        int axis = -1;                     // -1 for leaves
        double split = 0.0;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);
    void search(std::int32_t node, const Vec3& q, Neighbor& best) const;

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

/// Brute-force reference with the same tie rule, for tests and tiny sets.
Neighbor nearest_brute_force(std::span<const Vec3> points, const Vec3& query);

}  // namespace splatcage
