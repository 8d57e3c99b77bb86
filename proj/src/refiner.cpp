#include "defgraph/refiner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "defgraph/parallel.hpp"
#include "defgraph/sampling.hpp"

namespace defgraph {

namespace {

double huber(double r, double delta) {
    return r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
}

// d(huber(|v - a|))/d|v - a|, divided by |v - a| for the chain rule; the
// quadratic branch limit at r -> 0 is 1.
double huber_slope_over_r(double r, double delta) {
    if (r <= delta) return 1.0;
    return delta / r;
}

}  // namespace

double WindowEnergy::energy(const std::vector<PointCloud>& pos) const {
    double e = 0.0;
    for (int f = free_from; f < length; ++f) {
        const PointCloud& frame = pos[static_cast<std::size_t>(f)];
        for (int p = 0; p < node_count; ++p) {
            if (anchor_valid[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)]) {
                const double r =
                    (frame[static_cast<std::size_t>(p)] -
                     anchors[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)]).norm();
                e += huber(r, huber_delta);
            }
            const double cw =
                coarse_weight.empty()
                    ? 1.0
                    : coarse_weight[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)];
            e += weights.lambda_node * cw *
                 (frame[static_cast<std::size_t>(p)] -
                  coarse[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)]).squaredNorm();
        }
        for (const RestEdge& edge : edges) {
            const double d = (frame[static_cast<std::size_t>(edge.p)] -
                              frame[static_cast<std::size_t>(edge.q)]).norm();
            const double v = d - edge.rest_dist;
            e += weights.lambda_rigid * edge.weight * v * v;
        }
    }
    for (int f = 1; f + 1 < length; ++f) {
        if (f + 1 < free_from) continue;  // stencil entirely frozen
        for (int p = 0; p < node_count; ++p) {
            const Point3 acc = pos[static_cast<std::size_t>(f) - 1][static_cast<std::size_t>(p)] -
                               2.0 * pos[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)] +
                               pos[static_cast<std::size_t>(f) + 1][static_cast<std::size_t>(p)];
            e += weights.lambda_rigid * acc.squaredNorm();
        }
    }
    return e;
}

void WindowEnergy::gradient(const std::vector<PointCloud>& pos,
                            std::vector<PointCloud>& grad) const {
    grad.assign(static_cast<std::size_t>(length),
                PointCloud(static_cast<std::size_t>(node_count), Point3::Zero()));
    for (int f = free_from; f < length; ++f) {
        const PointCloud& frame = pos[static_cast<std::size_t>(f)];
        PointCloud& g = grad[static_cast<std::size_t>(f)];
        for (int p = 0; p < node_count; ++p) {
            if (anchor_valid[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)]) {
                const Point3 diff =
                    frame[static_cast<std::size_t>(p)] -
                    anchors[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)];
                const double r = diff.norm();
                if (r > 0.0)
                    g[static_cast<std::size_t>(p)] += huber_slope_over_r(r, huber_delta) * diff;
            }
            const double cw =
                coarse_weight.empty()
                    ? 1.0
                    : coarse_weight[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)];
            g[static_cast<std::size_t>(p)] +=
                2.0 * weights.lambda_node * cw *
                (frame[static_cast<std::size_t>(p)] -
                 coarse[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)]);
        }
        for (const RestEdge& edge : edges) {
            const Point3 diff = frame[static_cast<std::size_t>(edge.p)] -
                                frame[static_cast<std::size_t>(edge.q)];
            const double d = diff.norm();
            if (d < 1e-15) continue;
            const Point3 contrib =
                2.0 * weights.lambda_rigid * edge.weight * (d - edge.rest_dist) / d * diff;
            g[static_cast<std::size_t>(edge.p)] += contrib;
            g[static_cast<std::size_t>(edge.q)] -= contrib;
        }
    }
    for (int f = 1; f + 1 < length; ++f) {
        if (f + 1 < free_from) continue;
        for (int p = 0; p < node_count; ++p) {
            const Point3 acc = pos[static_cast<std::size_t>(f) - 1][static_cast<std::size_t>(p)] -
                               2.0 * pos[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)] +
                               pos[static_cast<std::size_t>(f) + 1][static_cast<std::size_t>(p)];
            const Point3 base = 2.0 * weights.lambda_rigid * acc;
            if (f - 1 >= free_from)
                grad[static_cast<std::size_t>(f) - 1][static_cast<std::size_t>(p)] += base;
            if (f >= free_from)
                grad[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)] -= 2.0 * base;
            if (f + 1 >= free_from)
                grad[static_cast<std::size_t>(f) + 1][static_cast<std::size_t>(p)] += base;
        }
    }
}

std::vector<RestEdge> build_rest_edges(const PointCloud& rest_nodes, int k) {
    const std::size_t node_count = rest_nodes.size();
    std::vector<RestEdge> edges;
    if (node_count < 2 || k < 1) return edges;
    const int kk = std::min<int>(k, static_cast<int>(node_count) - 1);
    const GridIndex index(rest_nodes);
    std::set<std::pair<int, int>> seen;
    for (std::size_t p = 0; p < node_count; ++p) {
        std::vector<int> nn = index.knn(rest_nodes[p], kk + 1);
        int taken = 0;
        for (int j : nn) {
            if (j == static_cast<int>(p)) continue;
            if (taken++ >= kk) break;
            const int a = std::min<int>(static_cast<int>(p), j);
            const int b = std::max<int>(static_cast<int>(p), j);
            if (!seen.insert({a, b}).second) continue;
            RestEdge e;
            e.p = a;
            e.q = b;
            e.rest_dist = (rest_nodes[static_cast<std::size_t>(a)] -
                           rest_nodes[static_cast<std::size_t>(b)]).norm();
            edges.push_back(e);
        }
    }
    return edges;
}

namespace {

// Soft closest target point for every (free frame, node); invalid when no
// candidate lies within the gate or the triplane region is empty.
void compute_anchors(WindowEnergy& energy, const std::vector<PointCloud>& pos,
                     const PointCloudSeq& seq, const std::vector<GridIndex>& indices, int start,
                     const RefineOptions& options, const std::vector<TriplaneGrid>* grids) {
    const double inv_two_sigma2 = 1.0 / (2.0 * options.sigma * options.sigma);
    const double gate2 =
        options.gate_sigmas * options.gate_sigmas * options.sigma * options.sigma;
    for (int f = energy.free_from; f < energy.length; ++f) {
        const int global_frame = start + f;
        const PointCloud& target = seq[static_cast<std::size_t>(global_frame)];
        const GridIndex& index = indices[static_cast<std::size_t>(global_frame)];
        const int k = std::min<int>(options.k_neighbors, static_cast<int>(target.size()));
        parallel_for(static_cast<std::size_t>(energy.node_count), [&](std::size_t p) {
            const Point3& v = pos[static_cast<std::size_t>(f)][p];
            const std::vector<int> nn = index.knn(v, k);
            Point3 acc = Point3::Zero();
            double total = 0.0;
            for (int j : nn) {
                const Point3& q = target[static_cast<std::size_t>(j)];
                const double d2 = (q - v).squaredNorm();
                if (d2 > gate2) continue;
                const double w = std::exp(-d2 * inv_two_sigma2);
                acc += w * q;
                total += w;
            }
            bool valid = total > 1e-12;
            Point3 anchor = valid ? Point3(acc / total) : Point3::Zero();
            if (valid && grids) {
                const Eigen::VectorXd feat =
                    (*grids)[static_cast<std::size_t>(global_frame)].sample(anchor);
                if (feat.norm() < 1e-12) valid = false;
            }
            energy.anchor_valid[static_cast<std::size_t>(f)][p] = valid ? 1 : 0;
            energy.anchors[static_cast<std::size_t>(f)][p] = anchor;
        }, options.threads);
    }
}

}  // namespace

RefineResult refine(const PointCloudSeq& seq, const std::vector<PointCloud>& coarse_nodes,
                    const PointCloud& rest_nodes, const EnergyWeights& weights,
                    const RefineOptions& options, const std::vector<TriplaneGrid>* grids,
                    const std::vector<std::vector<double>>* coarse_confidence) {
    require_seq(seq);
    require_cloud(rest_nodes, "rest nodes");
    const int frame_count = static_cast<int>(seq.size());
    const int node_count = static_cast<int>(rest_nodes.size());
    if (static_cast<int>(coarse_nodes.size()) != frame_count)
        throw std::invalid_argument("refine: coarse trajectory must cover every frame");
    for (const PointCloud& frame : coarse_nodes) {
        if (static_cast<int>(frame.size()) != node_count)
            throw std::invalid_argument("refine: coarse node count mismatch");
    }
    if (options.iterations < 1) throw std::invalid_argument("refine: iterations must be >= 1");
    if (options.window < 2 || options.window % 2 != 0)
        throw std::invalid_argument("refine: window must be even and >= 2");
    if (grids && static_cast<int>(grids->size()) != frame_count)
        throw std::invalid_argument("refine: need one grid per frame");
    if (coarse_confidence && static_cast<int>(coarse_confidence->size()) != frame_count)
        throw std::invalid_argument("refine: confidence shape mismatch");

    std::vector<GridIndex> indices;
    indices.reserve(seq.size());
    for (const PointCloud& frame : seq) indices.emplace_back(frame);

    const std::vector<RestEdge> edges = build_rest_edges(rest_nodes, options.rigid_neighbors);

    const int window = std::min(options.window, frame_count);
    const int hop = std::max(1, window / 2);
    std::vector<int> starts;
    for (int s = 0;; s += hop) {
        if (s + window >= frame_count) {
            starts.push_back(frame_count - window);
            break;
        }
        starts.push_back(s);
    }

    RefineResult result;
    result.node_traj = coarse_nodes;

    for (std::size_t w = 0; w < starts.size(); ++w) {
        const int start = starts[w];
        WindowEnergy energy;
        energy.length = window;
        energy.node_count = node_count;
        energy.free_from = w == 0 ? 0 : hop;
        energy.weights = weights;
        energy.huber_delta = options.huber_delta;
        energy.edges = edges;
        energy.anchor_valid.assign(static_cast<std::size_t>(window),
                                   std::vector<char>(static_cast<std::size_t>(node_count), 0));
        energy.anchors.assign(static_cast<std::size_t>(window),
                              PointCloud(static_cast<std::size_t>(node_count), Point3::Zero()));
        energy.coarse.resize(static_cast<std::size_t>(window));
        for (int f = 0; f < window; ++f)
            energy.coarse[static_cast<std::size_t>(f)] =
                coarse_nodes[static_cast<std::size_t>(start + f)];
        if (coarse_confidence) {
            energy.coarse_weight.resize(static_cast<std::size_t>(window));
            for (int f = 0; f < window; ++f) {
                energy.coarse_weight[static_cast<std::size_t>(f)] =
                    (*coarse_confidence)[static_cast<std::size_t>(start + f)];
                // Never fully unanchored: a tiny pull keeps the problem
                // well posed when a node is occluded for a whole window.
                for (double& w : energy.coarse_weight[static_cast<std::size_t>(f)])
                    w = std::max(w, 0.02);
            }
        }

        // Window state: frozen prefix comes from the already-refined
        // trajectory (the previous window's solution, bitwise).
        std::vector<PointCloud> pos(static_cast<std::size_t>(window));
        for (int f = 0; f < window; ++f)
            pos[static_cast<std::size_t>(f)] = result.node_traj[static_cast<std::size_t>(start + f)];

        std::vector<double> trace;
        std::vector<PointCloud> best_pos = pos;
        double best_energy = std::numeric_limits<double>::infinity();
        std::vector<PointCloud> grad, candidate;

        for (int m = 0; m < options.iterations; ++m) {
            compute_anchors(energy, pos, seq, indices, start, options, grids);
            double current = energy.energy(pos);
            if (current < best_energy) {
                best_energy = current;
                best_pos = pos;
                trace.push_back(current);
            }
            double step = options.initial_step * std::pow(weights.alpha, m);
            for (int it = 0; it < options.inner_iterations; ++it) {
                energy.gradient(pos, grad);
                double gnorm2 = 0.0;
                for (int f = energy.free_from; f < window; ++f)
                    for (int p = 0; p < node_count; ++p)
                        gnorm2 += grad[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)]
                                      .squaredNorm();
                if (gnorm2 < 1e-24) break;

                bool accepted = false;
                while (step >= options.min_step) {
                    candidate = pos;
                    for (int f = energy.free_from; f < window; ++f)
                        for (int p = 0; p < node_count; ++p)
                            candidate[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)] -=
                                step * grad[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)];
                    const double cand_energy = energy.energy(candidate);
                    if (cand_energy < current) {
                        pos.swap(candidate);
                        current = cand_energy;
                        if (current < best_energy) {
                            best_energy = current;
                            best_pos = pos;
                            trace.push_back(current);
                        }
                        step *= 1.5;
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if (!accepted) break;  // step underflow: keep best iterate
            }
            pos = best_pos;
        }

        for (int f = energy.free_from; f < window; ++f)
            result.node_traj[static_cast<std::size_t>(start + f)] =
                best_pos[static_cast<std::size_t>(f)];
        result.windows.push_back(WindowSolution{start, window, best_pos});
        result.energy_trace.push_back(std::move(trace));
    }
    return result;
}

std::vector<double> estimate_radii(const std::vector<PointCloud>& node_traj,
                                   const PointCloud& rest_nodes) {
    require_cloud(rest_nodes, "rest nodes");
    if (node_traj.empty()) throw std::invalid_argument("estimate_radii: empty trajectory");
    const std::size_t node_count = rest_nodes.size();
    for (const PointCloud& frame : node_traj) {
        if (frame.size() != node_count)
            throw std::invalid_argument("estimate_radii: node count mismatch");
        for (const Point3& p : frame)
            if (!finite(p)) throw std::invalid_argument("estimate_radii: non-finite trajectory");
    }
    if (node_count == 1) return {1e-6};

    const int k = std::min<int>(4, static_cast<int>(node_count) - 1);
    const GridIndex index(rest_nodes);
    std::vector<double> radii(node_count);
    for (std::size_t p = 0; p < node_count; ++p) {
        std::vector<int> nn = index.knn(rest_nodes[p], k + 1);
        std::vector<int> nbrs;
        for (int j : nn)
            if (j != static_cast<int>(p) && nbrs.size() < static_cast<std::size_t>(k))
                nbrs.push_back(j);

        std::vector<double> dists;
        dists.reserve(nbrs.size());
        for (int j : nbrs)
            dists.push_back((rest_nodes[static_cast<std::size_t>(j)] - rest_nodes[p]).norm());
        std::sort(dists.begin(), dists.end());
        const std::size_t m = dists.size();
        const double median = m % 2 == 1 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);

        double coh_sum = 0.0;
        std::size_t coh_count = 0;
        for (const PointCloud& frame : node_traj) {
            const Point3 own = frame[p] - rest_nodes[p];
            const double own_norm = own.norm();
            for (int j : nbrs) {
                const Point3 other = frame[static_cast<std::size_t>(j)] -
                                     rest_nodes[static_cast<std::size_t>(j)];
                const double other_norm = other.norm();
                double c;
                if (own_norm < 1e-12 && other_norm < 1e-12) {
                    c = 1.0;  // both stationary: fully coherent
                } else if (own_norm < 1e-12 || other_norm < 1e-12) {
                    c = 0.0;
                } else {
                    c = std::max(0.0, own.dot(other) / (own_norm * other_norm));
                }
                coh_sum += c;
                ++coh_count;
            }
        }
        const double coherence = coh_count > 0 ? coh_sum / static_cast<double>(coh_count) : 1.0;
        radii[p] = std::max((0.7 + 0.6 * coherence) * median, 1e-9);
    }
    return radii;
}

}  // namespace defgraph
