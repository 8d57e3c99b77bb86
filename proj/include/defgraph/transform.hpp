#pragma once

#include <optional>
#include <vector>

#include "defgraph/types.hpp"

namespace defgraph {

/// Nodes admitted as one locally rigid part around a center node.
struct RigidGroup {
    int center_node = -1;
    std::vector<int> members;  // always contains the nearest candidate
    double epsilon_used = 0.0;
};

/// Keeps candidate k iff its worst-over-frames relative distance deviation
/// to the center (vs rest distance) stays below epsilon; the nearest
/// candidate is always kept. When fewer than 4 members survive, epsilon is
/// raised by 0.1 and the filter rerun until the floor is met or every
/// candidate is admitted. Candidates must be ordered by ascending rest
/// distance to the center (candidates[0] is the nearest).
RigidGroup rigidity_filter(int center, const std::vector<int>& candidates, const PointCloud& rest,
                           const std::vector<PointCloud>& traj, double eps0 = 0.2);

/// Worst-over-frames |dist ratio - 1| of one candidate against the center.
/// A zero rest distance (duplicate node) counts as deviation 0.
double rigidity_deviation(int center, int candidate, const PointCloud& rest,
                          const std::vector<PointCloud>& traj);

/// Weighted Kabsch: the rigid motion minimizing sum w_i |R src_i + t - dst_i|^2,
/// with the reflection corrected so det(R) = +1. Throws invalid_argument on
/// size mismatch or fewer than 3 points, NumericalError when the rotation is
/// not unique (second singular value of the cross-covariance below 1e-12).
Se3 procrustes(const PointCloud& src, const PointCloud& dst,
               const std::vector<double>* weights = nullptr);

/// Residual sum w_i |R src_i + t - dst_i|^2 of a candidate transform.
double procrustes_residual(const PointCloud& src, const PointCloud& dst, const Se3& t,
                           const std::vector<double>* weights = nullptr);

struct TransformOptions {
    int group_candidates = 8;  // K nearest nodes considered per group
    double eps0 = 0.2;
};

struct TransformDiagnostics {
    std::size_t degenerate_groups = 0;  // fell back to translation-only
};

/// Fills graph.transforms: per node and frame, a rigidity-filtered group of
/// neighbors plus the node itself is aligned rest -> frame via Procrustes.
/// Degenerate groups fall back to a translation-only transform.
TransformDiagnostics estimate_transforms(DeformationGraph& graph, const TransformOptions& options = {});

}  // namespace defgraph
