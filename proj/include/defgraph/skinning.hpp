#pragma once

#include <vector>

#include "defgraph/sampling.hpp"
#include "defgraph/types.hpp"

namespace defgraph {

/// Graph nodes driving one source point, nearest (anchor) first.
struct SkinBinding {
    int point_index = -1;
    std::vector<int> nodes;
    double epsilon_used = 0.0;
};

struct SkinningOptions {
    int k_init = 6;     // candidate nodes per point before filtering
    int k_max = 4;      // final cap on surviving nodes
    double eps0 = 0.2;  // rigidity filter threshold
};

/// Candidate nodes are the k_init nearest rest nodes; candidates whose
/// distance ratio to the anchor (the nearest node) deviates beyond epsilon
/// in any frame are filtered out, with the same >= 4 escalation as the
/// transform grouping; survivors are capped at k_max nearest. The anchor is
/// always kept. `rest_index` must index graph.rest_nodes.
SkinBinding assign_nodes(const Point3& x, const DeformationGraph& graph,
                         const GridIndex& rest_index, const SkinningOptions& options = {});

/// Gaussian falloff exp(-d^2 / (2 r^2)).
double rbf_weight(const Point3& x, const Point3& node_rest, double radius);

/// Normalized blend of the binding's node transforms applied to x. When the
/// total weight underflows, the nearest node's transform alone is used.
Point3 warp_point(const Point3& x, const SkinBinding& binding, const DeformationGraph& graph,
                  int frame);

/// Bindings once per source point, warp per frame; wall-clock per frame is
/// recorded into the result.
RegistrationResult register_clouds(const PointCloud& source, const DeformationGraph& graph,
                                   const SkinningOptions& options = {}, int threads = 0);

}  // namespace defgraph
