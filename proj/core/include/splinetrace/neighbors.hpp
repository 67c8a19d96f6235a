#pragma once

#include "splinetrace/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace splinetrace {

struct Neighbor {
    std::size_t owner = 0;
    double distance = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exact k-d tree over 3D points, each tagged with an owner id (a pathline or
/// curve index). Built once with median splits; immutable afterwards, so
/// concurrent queries are safe.
class NeighborIndex {
public:
    /// Owner ids default to the point index. Throws on an empty input or a
    /// non-finite point.
    explicit NeighborIndex(std::span<const Vec3> points, std::span<const std::size_t> owners = {});

    std::size_t size() const { return points_.size(); }
    const Box3& bounds() const { return bounds_; }
    double diameter() const { return bounds_.diagonal(); }

    /// The min(K, size()) nearest points, sorted by distance then owner id.
    std::vector<Neighbor> knn(const Vec3& query, std::size_t K) const;
    /// Same, writing into `out` to avoid reallocation in tracing loops.
    void knn(const Vec3& query, std::size_t K, std::vector<Neighbor>& out) const;

private:
    struct Node {
        std::uint32_t begin;
        std::uint32_t end;
        std::int32_t left = -1;
        std::int32_t right = -1;
        int axis = -1;
        double split = 0.0;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);

    std::vector<Vec3> points_;
    std::vector<std::size_t> owners_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    Box3 bounds_;
};

/// Brute-force reference for knn with the same ordering rule.
std::vector<Neighbor> knn_linear_scan(std::span<const Vec3> points, std::span<const std::size_t> owners,
                                      const Vec3& query, std::size_t K);

struct NeighborWeights {
    std::vector<std::size_t> owners;
    std::vector<double> weights;
};

/// Normalized inverse-distance weights, w_i proportional to d_i^-power. A
/// neighbor closer than snap_distance takes all the weight (the first such
/// neighbor in list order). Throws on an empty list or power <= 0.
NeighborWeights idw_weights(std::span<const Neighbor> neighbors, double power, double snap_distance);

/// Snap threshold used by the tracers: 1e-12 of the dataset diameter.
inline double snap_distance_for(double diameter) { return 1e-12 * diameter; }

}  // namespace splinetrace
