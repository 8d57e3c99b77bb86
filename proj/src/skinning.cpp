#include "defgraph/skinning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "defgraph/parallel.hpp"
#include "defgraph/transform.hpp"

namespace defgraph {

SkinBinding assign_nodes(const Point3& x, const DeformationGraph& graph,
                         const GridIndex& rest_index, const SkinningOptions& options) {
    if (graph.node_traj.empty()) throw std::invalid_argument("assign_nodes: graph has no trajectory");
    const int k_init = std::min<int>(std::max(options.k_init, 1),
                                     static_cast<int>(graph.rest_nodes.size()));
    const std::vector<int> candidates = rest_index.knn(x, k_init);

    SkinBinding binding;
    binding.epsilon_used = options.eps0;
    if (candidates.size() == 1) {
        binding.nodes = candidates;
        return binding;
    }

    // Filter against the anchor exactly like the transform grouping: the
    // anchor's trajectory stands in for the center.
    const int anchor = candidates[0];
    const std::vector<int> others(candidates.begin() + 1, candidates.end());
    const RigidGroup group =
        rigidity_filter(anchor, others, graph.rest_nodes, graph.node_traj, options.eps0);
    binding.epsilon_used = group.epsilon_used;

    binding.nodes.push_back(anchor);
    // Survivors in candidate (= ascending rest distance to x) order.
    for (int j : others) {
        if (static_cast<int>(binding.nodes.size()) >= options.k_max) break;
        if (std::find(group.members.begin(), group.members.end(), j) != group.members.end())
            binding.nodes.push_back(j);
    }
    return binding;
}

double rbf_weight(const Point3& x, const Point3& node_rest, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("rbf_weight: radius must be positive");
    const double d2 = (x - node_rest).squaredNorm();
    return std::exp(-d2 / (2.0 * radius * radius));
}

Point3 warp_point(const Point3& x, const SkinBinding& binding, const DeformationGraph& graph,
                  int frame) {
    if (binding.nodes.empty()) throw std::invalid_argument("warp_point: empty binding");
    const auto& transforms = graph.transforms.at(static_cast<std::size_t>(frame));
    Point3 acc = Point3::Zero();
    double total = 0.0;
    for (int node : binding.nodes) {
        const double w = rbf_weight(x, graph.rest_nodes[static_cast<std::size_t>(node)],
                                    graph.radii[static_cast<std::size_t>(node)]);
        acc += w * transforms[static_cast<std::size_t>(node)].apply(x);
        total += w;
    }
    if (total < 1e-12) {
        return transforms[static_cast<std::size_t>(binding.nodes[0])].apply(x);
    }
    return acc / total;
}

RegistrationResult register_clouds(const PointCloud& source, const DeformationGraph& graph,
                                   const SkinningOptions& options, int threads) {
    require_cloud(source, "source");
    if (graph.rest_nodes.empty() || graph.node_traj.empty() || graph.transforms.empty() ||
        graph.radii.size() != graph.rest_nodes.size())
        throw std::invalid_argument("register_clouds: graph is not fully populated");

    const GridIndex rest_index(graph.rest_nodes);
    std::vector<SkinBinding> bindings(source.size());
    parallel_for(source.size(), [&](std::size_t i) {
        bindings[i] = assign_nodes(source[i], graph, rest_index, options);
        bindings[i].point_index = static_cast<int>(i);
    }, threads);

    RegistrationResult result;
    result.graph = graph;
    const std::size_t frames = graph.transforms.size();
    result.warped.resize(frames);
    result.per_frame_seconds.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        const auto t0 = std::chrono::steady_clock::now();
        PointCloud& out = result.warped[f];
        out.resize(source.size());
        parallel_for(source.size(), [&](std::size_t i) {
            out[i] = warp_point(source[i], bindings[i], graph, static_cast<int>(f));
        }, threads);
        const auto t1 = std::chrono::steady_clock::now();
        result.per_frame_seconds[f] = std::chrono::duration<double>(t1 - t0).count();
    }
    return result;
}

}  // namespace defgraph
