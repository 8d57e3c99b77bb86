#pragma once

#include <cstdint>
#include <vector>

#include "defgraph/types.hpp"

namespace defgraph {

/// Uniform-grid spatial hash over a fixed point set. The grid only prunes:
/// query results are exact and use the same distance/tie rule as a linear
/// scan (ascending squared distance, ties by lower point index).
class GridIndex {
public:
    static constexpr int kCellsPerAxis = 32;

    explicit GridIndex(const PointCloud& points);

    /// Exact k nearest neighbors of `query`, sorted ascending by distance,
    /// ties broken by lower index. Throws invalid_argument if k < 1 or
    /// k > size().
    std::vector<int> knn(const Point3& query, int k) const;

    /// All indices within `radius` of `query` (inclusive), sorted by index.
    std::vector<int> radius_query(const Point3& query, double radius) const;

    std::size_t size() const { return points_->size(); }
    const PointCloud& points() const { return *points_; }

private:
    const PointCloud* points_;
    Point3 origin_;
    double cell_ = 1.0;
    int dims_[3] = {1, 1, 1};
    std::vector<int> cell_start_;  // CSR offsets, dims_[0]*dims_[1]*dims_[2] + 1
    std::vector<int> cell_items_;  // point indices grouped by cell

    int cell_of(int cx, int cy, int cz) const {
        return (cz * dims_[1] + cy) * dims_[0] + cx;
    }
    void coords_of(const Point3& p, int out[3], bool clamp) const;
};

/// Farthest point sampling: greedily selects `count` indices, each
/// maximizing the minimum distance to the already-selected set (ties by
/// lower index). Deterministic given seed_index.
std::vector<int> farthest_point_sample(const PointCloud& cloud, int count, int seed_index = 0);

/// Exact k nearest neighbors via linear scan. Same contract as
/// GridIndex::knn; kept as the simple path for one-off queries.
std::vector<int> knn(const Point3& query, const PointCloud& cloud, int k);

}  // namespace defgraph
