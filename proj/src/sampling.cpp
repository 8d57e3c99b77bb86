#include "defgraph/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace defgraph {

namespace {

struct Neighbor {
    double d2;
    int index;
    bool operator<(const Neighbor& o) const {
        return d2 < o.d2 || (d2 == o.d2 && index < o.index);
    }
};

}  // namespace

GridIndex::GridIndex(const PointCloud& points) : points_(&points) {
    require_cloud(points, "index cloud");
    Point3 lo = points[0], hi = points[0];
    for (const Point3& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    origin_ = lo;
    const Point3 extent = hi - lo;
    const double max_extent = extent.maxCoeff();
    cell_ = max_extent > 0.0 ? max_extent / kCellsPerAxis : 1.0;
    for (int a = 0; a < 3; ++a) {
        int d = max_extent > 0.0 ? static_cast<int>(std::floor(extent[a] / cell_)) + 1 : 1;
        dims_[a] = std::clamp(d, 1, kCellsPerAxis);
    }

    const int ncells = dims_[0] * dims_[1] * dims_[2];
    std::vector<int> counts(static_cast<std::size_t>(ncells) + 1, 0);
    std::vector<int> home(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        int c[3];
        coords_of(points[i], c, true);
        home[i] = cell_of(c[0], c[1], c[2]);
        ++counts[static_cast<std::size_t>(home[i]) + 1];
    }
    std::partial_sum(counts.begin(), counts.end(), counts.begin());
    cell_start_ = counts;
    cell_items_.resize(points.size());
    std::vector<int> cursor(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) {
        cell_items_[static_cast<std::size_t>(cursor[home[i]]++)] = static_cast<int>(i);
    }
}

void GridIndex::coords_of(const Point3& p, int out[3], bool clamp) const {
    for (int a = 0; a < 3; ++a) {
        int c = static_cast<int>(std::floor((p[a] - origin_[a]) / cell_));
        out[a] = clamp ? std::clamp(c, 0, dims_[a] - 1) : c;
    }
}

std::vector<int> GridIndex::knn(const Point3& query, int k) const {
    const PointCloud& pts = *points_;
    if (k < 1) throw std::invalid_argument("knn: k must be positive");
    if (static_cast<std::size_t>(k) > pts.size())
        throw std::invalid_argument("knn: k exceeds cloud size");

    int qc[3];
    coords_of(query, qc, false);

    // Worst of the current best-k, kept as a sorted vector (k is small).
    std::vector<Neighbor> best;
    best.reserve(static_cast<std::size_t>(k) + 1);
    auto consider = [&](int idx) {
        Neighbor cand{(pts[static_cast<std::size_t>(idx)] - query).squaredNorm(), idx};
        if (best.size() == static_cast<std::size_t>(k) && !(cand < best.back())) return;
        best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
        if (best.size() > static_cast<std::size_t>(k)) best.pop_back();
    };

    const int max_ring =
        std::max({std::max(qc[0], dims_[0] - 1 - qc[0]), std::max(qc[1], dims_[1] - 1 - qc[1]),
                  std::max(qc[2], dims_[2] - 1 - qc[2])});
    for (int ring = 0; ring <= max_ring; ++ring) {
        // Cells on ring r (Chebyshev) only hold points at least (r-1)*cell_
        // away, since both query and point float inside their cells.
        if (best.size() == static_cast<std::size_t>(k) && ring > 1) {
            const double bound = static_cast<double>(ring - 1) * cell_;
            if (bound * bound > best.back().d2) break;
        }
        const int x0 = std::max(0, qc[0] - ring), x1 = std::min(dims_[0] - 1, qc[0] + ring);
        const int y0 = std::max(0, qc[1] - ring), y1 = std::min(dims_[1] - 1, qc[1] + ring);
        const int z0 = std::max(0, qc[2] - ring), z1 = std::min(dims_[2] - 1, qc[2] + ring);
        for (int cz = z0; cz <= z1; ++cz) {
            for (int cy = y0; cy <= y1; ++cy) {
                for (int cx = x0; cx <= x1; ++cx) {
                    const bool on_shell = std::max({std::abs(cx - qc[0]), std::abs(cy - qc[1]),
                                                    std::abs(cz - qc[2])}) == ring;
                    if (!on_shell) continue;
                    const int c = cell_of(cx, cy, cz);
                    for (int it = cell_start_[c]; it < cell_start_[static_cast<std::size_t>(c) + 1]; ++it)
                        consider(cell_items_[static_cast<std::size_t>(it)]);
                }
            }
        }
    }

    std::vector<int> out;
    out.reserve(best.size());
    for (const Neighbor& n : best) out.push_back(n.index);
    return out;
}

std::vector<int> GridIndex::radius_query(const Point3& query, double radius) const {
    const PointCloud& pts = *points_;
    std::vector<int> out;
    if (radius < 0.0) return out;
    int lo[3], hi[3];
    coords_of(query - Point3::Constant(radius), lo, true);
    coords_of(query + Point3::Constant(radius), hi, true);
    const double r2 = radius * radius;
    for (int cz = lo[2]; cz <= hi[2]; ++cz) {
        for (int cy = lo[1]; cy <= hi[1]; ++cy) {
            for (int cx = lo[0]; cx <= hi[0]; ++cx) {
                const int c = cell_of(cx, cy, cz);
                for (int it = cell_start_[c]; it < cell_start_[static_cast<std::size_t>(c) + 1]; ++it) {
                    const int idx = cell_items_[static_cast<std::size_t>(it)];
                    if ((pts[static_cast<std::size_t>(idx)] - query).squaredNorm() <= r2)
                        out.push_back(idx);
                }
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> farthest_point_sample(const PointCloud& cloud, int count, int seed_index) {
    require_cloud(cloud);
    const int n = static_cast<int>(cloud.size());
    if (count < 1) throw std::invalid_argument("farthest_point_sample: count must be positive");
    if (count > n) throw std::invalid_argument("farthest_point_sample: count exceeds cloud size");
    if (seed_index < 0 || seed_index >= n)
        throw std::invalid_argument("farthest_point_sample: seed_index out of range");

    std::vector<int> selected;
    selected.reserve(static_cast<std::size_t>(count));
    selected.push_back(seed_index);
    std::vector<char> chosen(cloud.size(), 0);
    chosen[static_cast<std::size_t>(seed_index)] = 1;
    std::vector<double> min_d2(cloud.size(), std::numeric_limits<double>::infinity());
    for (int round = 1; round < count; ++round) {
        const Point3& last = cloud[static_cast<std::size_t>(selected.back())];
        int arg = -1;
        double best = -1.0;
        for (int i = 0; i < n; ++i) {
            const double d2 = (cloud[static_cast<std::size_t>(i)] - last).squaredNorm();
            if (d2 < min_d2[static_cast<std::size_t>(i)]) min_d2[static_cast<std::size_t>(i)] = d2;
            if (!chosen[static_cast<std::size_t>(i)] && min_d2[static_cast<std::size_t>(i)] > best) {
                best = min_d2[static_cast<std::size_t>(i)];
                arg = i;
            }
        }
        selected.push_back(arg);
        chosen[static_cast<std::size_t>(arg)] = 1;
    }
    return selected;
}

std::vector<int> knn(const Point3& query, const PointCloud& cloud, int k) {
    require_cloud(cloud);
    if (k < 1) throw std::invalid_argument("knn: k must be positive");
    if (static_cast<std::size_t>(k) > cloud.size())
        throw std::invalid_argument("knn: k exceeds cloud size");
    std::vector<Neighbor> all;
    all.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        all.push_back({(cloud[i] - query).squaredNorm(), static_cast<int>(i)});
    std::partial_sort(all.begin(), all.begin() + k, all.end());
    std::vector<int> out(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = all[static_cast<std::size_t>(i)].index;
    return out;
}

}  // namespace defgraph
