#include "splatcage/spatial_index.hpp"

#include "splatcage/parallel.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace splatcage {

namespace {

constexpr std::uint32_t kLeafSize = 12;

inline bool better(double d2, std::size_t idx, const Neighbor& best) {
    return d2 < best.squared_distance || (d2 == best.squared_distance && idx < best.index);
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    if (points_.size() >= std::numeric_limits<std::uint32_t>::max()) {
        throw Error("KdTree: too many points");
    }
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / kLeafSize + 1);
        build(0, static_cast<std::uint32_t>(points_.size()));
    }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) {
        return id;
    }
    Aabb box;
    for (std::uint32_t i = begin; i < end; ++i) box.extend(points_[order_[i]]);
    int axis = 0;
    box.extent().maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double pa = points_[a][axis], pb = points_[b][axis];
                         return pa < pb || (pa == pb && a < b);
                     });
    const double split = points_[order_[mid]][axis];
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
}

void KdTree::search(std::int32_t id, const Vec3& q, Neighbor& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.axis < 0) {
        for (std::uint32_t i = node.begin; i < node.end; ++i) {
            const std::uint32_t idx = order_[i];
            const double d2 = (points_[idx] - q).squaredNorm();
            if (better(d2, idx, best)) best = {idx, d2};
        }
        return;
    }
    // Left holds coordinates <= split, right holds >= split.
    const double delta = q[node.axis] - node.split;
    const std::int32_t near = delta < 0.0 ? node.left : node.right;
    const std::int32_t far = delta < 0.0 ? node.right : node.left;
    search(near, q, best);
    // Equality keeps equidistant lower indices reachable.
    if (delta * delta <= best.squared_distance) {
        search(far, q, best);
    }
}

Neighbor KdTree::nearest(const Vec3& query) const {
    if (points_.empty()) {
        throw Error("KdTree::nearest: index is empty");
    }
    Neighbor best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
    search(0, query, best);
    return best;
}

std::vector<Neighbor> KdTree::nearest_all(std::span<const Vec3> queries) const {
    std::vector<Neighbor> out(queries.size());
    parallel_for(queries.size(), [&](std::size_t i) { out[i] = nearest(queries[i]); });
    return out;
}

Neighbor nearest_brute_force(std::span<const Vec3> points, const Vec3& query) {
    if (points.empty()) {
        throw Error("nearest_brute_force: empty point set");
    }
    Neighbor best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double d2 = (points[i] - query).squaredNorm();
        if (better(d2, i, best)) best = {i, d2};
    }
    return best;
}

}  // namespace splatcage
