#include "defgraph/transform.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "defgraph/parallel.hpp"
#include "defgraph/sampling.hpp"

namespace defgraph {

double rigidity_deviation(int center, int candidate, const PointCloud& rest,
                          const std::vector<PointCloud>& traj) {
    const double rest_dist =
        (rest[static_cast<std::size_t>(candidate)] - rest[static_cast<std::size_t>(center)]).norm();
    if (rest_dist == 0.0) return 0.0;  // duplicate node: ratio defined as 1
    double worst = 0.0;
    for (const PointCloud& frame : traj) {
        const double d = (frame[static_cast<std::size_t>(candidate)] -
                          frame[static_cast<std::size_t>(center)]).norm();
        worst = std::max(worst, std::abs(d / rest_dist - 1.0));
    }
    return worst;
}

RigidGroup rigidity_filter(int center, const std::vector<int>& candidates, const PointCloud& rest,
                           const std::vector<PointCloud>& traj, double eps0) {
    if (candidates.empty()) throw std::invalid_argument("rigidity_filter: no candidates");
    if (traj.empty()) throw std::invalid_argument("rigidity_filter: empty trajectory");

    std::vector<double> deviation(candidates.size());
    for (std::size_t k = 0; k < candidates.size(); ++k)
        deviation[k] = rigidity_deviation(center, candidates[k], rest, traj);

    const std::size_t floor = std::min<std::size_t>(4, candidates.size());
    double eps = eps0;
    for (;;) {
        RigidGroup group;
        group.center_node = center;
        group.epsilon_used = eps;
        group.members.push_back(candidates[0]);  // nearest: always kept
        for (std::size_t k = 1; k < candidates.size(); ++k) {
            if (deviation[k] < eps) group.members.push_back(candidates[k]);
        }
        if (group.members.size() >= floor || group.members.size() == candidates.size())
            return group;
        eps += 0.1;
    }
}

Se3 procrustes(const PointCloud& src, const PointCloud& dst, const std::vector<double>* weights) {
    if (src.size() != dst.size())
        throw std::invalid_argument("procrustes: src and dst sizes differ");
    if (src.size() < 3) throw std::invalid_argument("procrustes: need at least 3 points");
    if (weights && weights->size() != src.size())
        throw std::invalid_argument("procrustes: weight count must match point count");

    double total_w = 0.0;
    Point3 mu_src = Point3::Zero(), mu_dst = Point3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double w = weights ? (*weights)[i] : 1.0;
        if (weights && !(w > 0.0)) throw std::invalid_argument("procrustes: weights must be positive");
        total_w += w;
        mu_src += w * src[i];
        mu_dst += w * dst[i];
    }
    mu_src /= total_w;
    mu_dst /= total_w;

    Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double w = weights ? (*weights)[i] : 1.0;
        cross += w * (src[i] - mu_src) * (dst[i] - mu_dst).transpose();
    }

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sigma = svd.singularValues();
    if (sigma[1] < 1e-12)
        throw NumericalError("procrustes: degenerate configuration, rotation not unique");

    const Eigen::Matrix3d u = svd.matrixU();
    const Eigen::Matrix3d v = svd.matrixV();
    Eigen::Vector3d d = Eigen::Vector3d::Ones();
    d[2] = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    Se3 out;
    out.rotation = v * d.asDiagonal() * u.transpose();
    out.translation = mu_dst - out.rotation * mu_src;
    return out;
}

double procrustes_residual(const PointCloud& src, const PointCloud& dst, const Se3& t,
                           const std::vector<double>* weights) {
    double r = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double w = weights ? (*weights)[i] : 1.0;
        r += w * (t.apply(src[i]) - dst[i]).squaredNorm();
    }
    return r;
}

TransformDiagnostics estimate_transforms(DeformationGraph& graph, const TransformOptions& options) {
    const std::size_t node_count = graph.rest_nodes.size();
    const std::size_t frame_count = graph.node_traj.size();
    if (node_count < 4) throw std::invalid_argument("estimate_transforms: need at least 4 nodes");
    if (frame_count == 0) throw std::invalid_argument("estimate_transforms: empty trajectory");

    const GridIndex rest_index(graph.rest_nodes);
    const int k = std::min<int>(options.group_candidates + 1, static_cast<int>(node_count));

    // Per node: the rigidity group is frame-independent (worst over frames).
    std::vector<std::vector<int>> group_points(node_count);
    for (std::size_t p = 0; p < node_count; ++p) {
        std::vector<int> nbrs = rest_index.knn(graph.rest_nodes[p], k);
        // Drop the node itself (distance 0 -> first unless duplicates).
        std::vector<int> candidates;
        candidates.reserve(nbrs.size());
        for (int j : nbrs)
            if (j != static_cast<int>(p)) candidates.push_back(j);
        const RigidGroup group =
            rigidity_filter(static_cast<int>(p), candidates, graph.rest_nodes, graph.node_traj,
                            options.eps0);
        // The center itself belongs to its own rigid part.
        group_points[p].push_back(static_cast<int>(p));
        group_points[p].insert(group_points[p].end(), group.members.begin(), group.members.end());
    }

    graph.transforms.assign(frame_count, std::vector<Se3>(node_count));
    std::vector<std::size_t> degenerate(node_count, 0);
    parallel_for(node_count, [&](std::size_t p) {
        PointCloud src, dst;
        src.reserve(group_points[p].size());
        for (int j : group_points[p]) src.push_back(graph.rest_nodes[static_cast<std::size_t>(j)]);
        for (std::size_t f = 0; f < frame_count; ++f) {
            dst.clear();
            for (int j : group_points[p])
                dst.push_back(graph.node_traj[f][static_cast<std::size_t>(j)]);
            try {
                graph.transforms[f][p] = procrustes(src, dst);
            } catch (const NumericalError&) {
                // Degenerate geometry: translation-only fallback.
                Point3 mean_disp = Point3::Zero();
                for (std::size_t i = 0; i < src.size(); ++i) mean_disp += dst[i] - src[i];
                mean_disp /= static_cast<double>(src.size());
                graph.transforms[f][p] = Se3{Eigen::Matrix3d::Identity(), mean_disp};
                ++degenerate[p];
            }
        }
    });

    TransformDiagnostics diag;
    for (std::size_t c : degenerate) diag.degenerate_groups += c;
    return diag;
}

}  // namespace defgraph
