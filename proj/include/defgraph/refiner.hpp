#pragma once

#include <optional>
#include <vector>

#include "defgraph/triplane.hpp"
#include "defgraph/types.hpp"

namespace defgraph {

struct EnergyWeights {
    double lambda_node = 1.0;
    double lambda_rigid = 0.1;
    double alpha = 0.8;  // per-round step decay
};

struct RefineOptions {
    int window = 8;            // T_w, even
    int iterations = 6;        // M outer rounds (re-anchoring) per window
    int inner_iterations = 25; // line-searched descent steps per round
    double sigma = 0.02;       // soft closest point scale for E_reg anchors
    int k_neighbors = 16;
    double gate_sigmas = 3.0;
    double huber_delta = 0.01;
    int rigid_neighbors = 4;   // rest-graph degree for E_rigid
    double initial_step = 0.25;
    double min_step = 1e-8;
    int threads = 0;
};

struct RestEdge {
    int p = 0, q = 0;
    double rest_dist = 0.0;
    double weight = 1.0;
};

/// Windowed objective with fixed data anchors:
///   E = E_reg + lambda_node * E_node + lambda_rigid * E_rigid
/// where E_reg is a Huber penalty on distance to the anchor point, E_node
/// anchors to the coarse initialization, and E_rigid combines rest-distance
/// preservation over the edge set with temporal second differences. Frames
/// below `free_from` are constants: they contribute context to temporal
/// terms but are never moved.
struct WindowEnergy {
    int length = 0;
    int node_count = 0;
    int free_from = 0;
    EnergyWeights weights{};
    double huber_delta = 0.01;
    std::vector<std::vector<char>> anchor_valid;  // length x B
    std::vector<PointCloud> anchors;              // length x B
    std::vector<PointCloud> coarse;               // length x B
    std::vector<std::vector<double>> coarse_weight;  // length x B; empty = all 1
    std::vector<RestEdge> edges;

    double energy(const std::vector<PointCloud>& pos) const;
    void gradient(const std::vector<PointCloud>& pos, std::vector<PointCloud>& grad) const;
};

struct WindowSolution {
    int start = 0;
    int length = 0;
    std::vector<PointCloud> node_pos;  // length x B
};

struct RefineResult {
    std::vector<PointCloud> node_traj;              // T x B
    std::vector<WindowSolution> windows;            // per-window final states
    std::vector<std::vector<double>> energy_trace;  // accepted energies per window
};

/// Half-overlapping sliding-window refinement of coarse node trajectories.
/// Each non-initial window freezes its first T_w/2 frames to the previous
/// window's solution (bitwise) and optimizes the rest. `grids`, when given,
/// vetoes data anchors that fall in empty triplane regions.
/// `coarse_confidence` (T x B in [0, 1], typically from match_sequence)
/// softens the coarse anchoring where the matcher saw no geometry, letting
/// the rigidity and temporal terms govern occluded nodes.
RefineResult refine(const PointCloudSeq& seq, const std::vector<PointCloud>& coarse_nodes,
                    const PointCloud& rest_nodes, const EnergyWeights& weights = {},
                    const RefineOptions& options = {},
                    const std::vector<TriplaneGrid>* grids = nullptr,
                    const std::vector<std::vector<double>>* coarse_confidence = nullptr);

/// Per-node influence radius: median distance to the (up to) 4 nearest rest
/// neighbors, scaled by 0.7 + 0.6 * motion coherence. Coherence is the mean
/// clamped cosine between the node's displacement and its neighbors' across
/// frames; pairs of zero displacements count as fully coherent.
std::vector<double> estimate_radii(const std::vector<PointCloud>& node_traj,
                                   const PointCloud& rest_nodes);

/// Unique undirected edges of the k-nearest-neighbor rest graph.
std::vector<RestEdge> build_rest_edges(const PointCloud& rest_nodes, int k);

}  // namespace defgraph
