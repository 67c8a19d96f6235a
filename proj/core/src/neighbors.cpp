#include "splinetrace/neighbors.hpp"

#include "splinetrace/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace splinetrace {

namespace {

const char* const kModule = "neighbors";
constexpr std::uint32_t kLeafSize = 8;

struct Candidate {
    double d2;
    std::size_t owner;
};

bool closer(const Candidate& a, const Candidate& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.owner < b.owner);
}

/// Bounded max-heap of the best K candidates, ordered by closer().
class BestK {
public:
    explicit BestK(std::size_t K) : K_(K) { heap_.reserve(K); }

    bool full() const { return heap_.size() == K_; }
    double worst_d2() const { return heap_.front().d2; }

    void offer(const Candidate& c) {
        if (!full()) {
            heap_.push_back(c);
            std::push_heap(heap_.begin(), heap_.end(), closer);
        } else if (closer(c, heap_.front())) {
            std::pop_heap(heap_.begin(), heap_.end(), closer);
            heap_.back() = c;
            std::push_heap(heap_.begin(), heap_.end(), closer);
        }
    }

    void drain(std::vector<Neighbor>& out) {
        std::sort_heap(heap_.begin(), heap_.end(), closer);
        out.clear();
        for (const auto& c : heap_) out.push_back({c.owner, std::sqrt(c.d2)});
    }

private:
    std::size_t K_;
    std::vector<Candidate> heap_;
};

}  // namespace

NeighborIndex::NeighborIndex(std::span<const Vec3> points, std::span<const std::size_t> owners)
    : points_(points.begin(), points.end()) {
    if (points_.empty()) throw Error(kModule, "cannot build an index over zero points");
    if (!owners.empty() && owners.size() != points_.size())
        throw Error(kModule, "owner list length differs from point count");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!is_finite(points_[i])) throw Error(kModule, "non-finite point at index " + std::to_string(i));
        bounds_.expand(points_[i]);
    }
    if (owners.empty()) {
        owners_.resize(points_.size());
        std::iota(owners_.begin(), owners_.end(), std::size_t{0});
    } else {
        owners_.assign(owners.begin(), owners.end());
    }
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t NeighborIndex::build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) return id;

    Box3 box;
    for (std::uint32_t i = begin; i < end; ++i) box.expand(points_[order_[i]]);
    const Vec3 ext = box.extent();
    int axis = 0;
    if (ext.y > ext[axis]) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    if (ext[axis] == 0.0) return id;  // all points coincide

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    nodes_[id].axis = axis;
    nodes_[id].split = points_[order_[mid]][axis];
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

std::vector<Neighbor> NeighborIndex::knn(const Vec3& query, std::size_t K) const {
    std::vector<Neighbor> out;
    knn(query, K, out);
    return out;
}

void NeighborIndex::knn(const Vec3& query, std::size_t K, std::vector<Neighbor>& out) const {
    if (K == 0) throw Error(kModule, "K must be at least 1");
    BestK best(std::min(K, points_.size()));

    // Explicit stack of (node, lower bound on squared distance to its region).
    struct Item {
        std::int32_t node;
        double bound;
    };
    std::vector<Item> stack{{0, 0.0}};
    while (!stack.empty()) {
        const Item item = stack.back();
        stack.pop_back();
        // Equal distances must still be visited for the owner-id tie-break.
        if (best.full() && item.bound > best.worst_d2()) continue;
        const Node& node = nodes_[static_cast<std::size_t>(item.node)];
        if (node.axis < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const std::uint32_t p = order_[i];
                best.offer({squared_norm(points_[p] - query), owners_[p]});
            }
            continue;
        }
        const double diff = query[node.axis] - node.split;
        const double plane = diff * diff;
        const std::int32_t near = diff < 0.0 ? node.left : node.right;
        const std::int32_t far = diff < 0.0 ? node.right : node.left;
        stack.push_back({far, std::max(item.bound, plane)});
        stack.push_back({near, item.bound});
    }
    best.drain(out);
}

std::vector<Neighbor> knn_linear_scan(std::span<const Vec3> points, std::span<const std::size_t> owners,
                                      const Vec3& query, std::size_t K) {
    std::vector<Candidate> all;
    all.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        all.push_back({squared_norm(points[i] - query), owners.empty() ? i : owners[i]});
    const std::size_t take = std::min(K, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), closer);
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < take; ++i) out.push_back({all[i].owner, std::sqrt(all[i].d2)});
    return out;
}

NeighborWeights idw_weights(std::span<const Neighbor> neighbors, double power, double snap_distance) {
    if (neighbors.empty()) throw Error(kModule, "IDW needs at least one neighbor");
    if (!(power > 0.0)) throw Error(kModule, "IDW power must be positive");
    NeighborWeights out;
    out.owners.reserve(neighbors.size());
    out.weights.assign(neighbors.size(), 0.0);
    for (const auto& nb : neighbors) out.owners.push_back(nb.owner);

    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        if (neighbors[i].distance <= snap_distance) {
            out.weights[i] = 1.0;
            return out;
        }
    }
    // Relative to the nearest distance so large powers do not underflow.
    double d_min = neighbors[0].distance;
    for (const auto& nb : neighbors) d_min = std::min(d_min, nb.distance);
    double sum = 0.0;
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        out.weights[i] = std::pow(d_min / neighbors[i].distance, power);
        sum += out.weights[i];
    }
    for (double& w : out.weights) w /= sum;
    return out;
}

}  // namespace splinetrace
