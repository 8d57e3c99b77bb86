#pragma once

#include <vector>

#include "defgraph/triplane.hpp"
#include "defgraph/types.hpp"

namespace defgraph {

struct MatchOptions {
    int iterations = 6;        // M rounds of residual updates
    int k_neighbors = 16;      // local candidate window per node
    int global_candidates = 8; // feature-correlation candidates per node
    bool pre_align = true;     // rigid pre-alignment from correspondences
    double sigma_start = 0.2;  // soft closest point scale, annealed
    double sigma_end = 0.02;
    double step = 0.5;         // eta
    double smoothing = 0.3;    // beta, displacement Laplacian
    int smoothing_neighbors = 4;
    double gate_sigmas = 3.0;  // candidates beyond gate*sigma carry no weight
    DescriptorParams descriptor_params{};
    int threads = 0;
};

/// Estimates node positions for one target frame, starting every node at
/// its rest position (after a rigid pre-alignment). Each round moves nodes
/// toward a descriptor-weighted soft closest point among their local
/// neighbors plus a handful of global feature-correlation candidates, then
/// applies one displacement-smoothing step over the rest-graph
/// neighborhood. Deterministic. `confidence_out`, when given, receives a
/// per-node weight in [0, 1]: the worst-round geometric support, which
/// drops toward 0 for nodes that never saw target geometry (occlusion).
PointCloud match_frame(const PointCloud& rest_nodes, const std::vector<Descriptor>& rest_desc,
                       const PointCloud& target, const TriplaneGrid& target_grid,
                       const MatchOptions& options = {},
                       std::vector<double>* confidence_out = nullptr);

/// match_frame independently per frame; frames never share state, so
/// occlusions in one frame cannot corrupt another.
std::vector<PointCloud> match_sequence(const PointCloud& rest_nodes,
                                       const std::vector<Descriptor>& rest_desc,
                                       const PointCloudSeq& seq,
                                       const std::vector<TriplaneGrid>& grids,
                                       const MatchOptions& options = {},
                                       std::vector<std::vector<double>>* confidence_out = nullptr);

}  // namespace defgraph
