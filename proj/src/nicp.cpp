#include "defgraph/nicp.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <Eigen/Sparse>
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>

#include "defgraph/parallel.hpp"
#include "defgraph/refiner.hpp"
#include "defgraph/sampling.hpp"

namespace defgraph {

namespace {

Eigen::Matrix3d skew(const Point3& v) {
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return m;
}

// One node's state: node-centered transform x -> R (x - g) + g + t.
struct NodeState {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

struct Skin {
    std::array<int, 4> nodes{};
    std::array<double, 4> weights{};  // normalized
    int count = 0;
};

Point3 warp(const Point3& x, const Skin& skin, const PointCloud& nodes,
            const std::vector<NodeState>& state) {
    Point3 out = Point3::Zero();
    for (int k = 0; k < skin.count; ++k) {
        const std::size_t p = static_cast<std::size_t>(skin.nodes[static_cast<std::size_t>(k)]);
        out += skin.weights[static_cast<std::size_t>(k)] *
               (state[p].rotation * (x - nodes[p]) + nodes[p] + state[p].translation);
    }
    return out;
}

}  // namespace

RegistrationResult chained_nicp(const PointCloud& source, const PointCloudSeq& seq,
                                const PointCloud& rest_nodes, const NicpOptions& options) {
    require_cloud(source, "source");
    require_cloud(rest_nodes, "rest nodes");
    if (seq.empty()) throw std::invalid_argument("chained_nicp: empty sequence");
    const std::size_t node_count = rest_nodes.size();
    if (node_count < 4) throw std::invalid_argument("chained_nicp: need at least 4 nodes");

    // Static skinning weights (no rigidity filtering: this is the classic
    // baseline). Radii from rest spacing.
    const std::vector<PointCloud> static_traj{rest_nodes};
    const std::vector<double> radii = estimate_radii(static_traj, rest_nodes);
    const GridIndex node_index(rest_nodes);
    const int k_skin = std::min<int>(options.skin_neighbors, static_cast<int>(node_count));

    auto make_skin = [&](const Point3& x) {
        Skin skin;
        const std::vector<int> nn = node_index.knn(x, k_skin);
        double total = 0.0;
        for (int j : nn) {
            const double d2 = (x - rest_nodes[static_cast<std::size_t>(j)]).squaredNorm();
            const double r = radii[static_cast<std::size_t>(j)];
            const double w = std::exp(-d2 / (2.0 * r * r));
            skin.nodes[static_cast<std::size_t>(skin.count)] = j;
            skin.weights[static_cast<std::size_t>(skin.count)] = w;
            ++skin.count;
            total += w;
        }
        if (total < 1e-12) {
            for (int k = 0; k < skin.count; ++k)
                skin.weights[static_cast<std::size_t>(k)] = 1.0 / skin.count;
        } else {
            for (int k = 0; k < skin.count; ++k) skin.weights[static_cast<std::size_t>(k)] /= total;
        }
        return skin;
    };

    // Subsample the source for the data term; warp the full cloud at the end.
    PointCloud data_points = source;
    if (static_cast<int>(source.size()) > options.max_data_points) {
        const std::vector<int> idx =
            farthest_point_sample(source, options.max_data_points, 0);
        data_points.clear();
        data_points.reserve(idx.size());
        for (int i : idx) data_points.push_back(source[static_cast<std::size_t>(i)]);
    }
    std::vector<Skin> data_skins(data_points.size());
    for (std::size_t i = 0; i < data_points.size(); ++i) data_skins[i] = make_skin(data_points[i]);
    std::vector<Skin> full_skins(source.size());
    parallel_for(source.size(), [&](std::size_t i) { full_skins[i] = make_skin(source[i]); },
                 options.threads);

    const std::vector<RestEdge> edges = build_rest_edges(rest_nodes, options.arap_neighbors);

    std::vector<NodeState> state(node_count);
    RegistrationResult result;
    result.graph.rest_nodes = rest_nodes;
    result.graph.radii = radii;
    result.warped.resize(seq.size());
    result.per_frame_seconds.resize(seq.size());
    result.graph.node_traj.resize(seq.size());
    result.graph.transforms.resize(seq.size());

    const int dof = static_cast<int>(node_count) * 6;
    Eigen::SparseMatrix<double> hessian(dof, dof);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;

    auto arap_energy = [&](const std::vector<NodeState>& s) {
        double e = 0.0;
        for (const RestEdge& edge : edges) {
            const std::size_t p = static_cast<std::size_t>(edge.p);
            const std::size_t q = static_cast<std::size_t>(edge.q);
            const Point3 rp = s[p].rotation * (rest_nodes[q] - rest_nodes[p]) + rest_nodes[p] +
                              s[p].translation - (rest_nodes[q] + s[q].translation);
            const Point3 rq = s[q].rotation * (rest_nodes[p] - rest_nodes[q]) + rest_nodes[q] +
                              s[q].translation - (rest_nodes[p] + s[p].translation);
            e += rp.squaredNorm() + rq.squaredNorm();
        }
        return e;
    };

    for (std::size_t f = 0; f < seq.size(); ++f) {
        const auto t0 = std::chrono::steady_clock::now();
        const PointCloud& target = seq[f];
        if (target.empty()) {
            // Unusable frame: carry the previous transforms, flag it.
            ++result.skipped_frame_count;
        } else {
            const GridIndex target_index(target);
            double prev_energy = std::numeric_limits<double>::infinity();
            double mu = 1e-6;
            for (int iter = 0; iter < options.max_iterations; ++iter) {
                // (a) Closest-point correspondences from the current warp.
                std::vector<Point3> warped(data_points.size());
                std::vector<Point3> corr(data_points.size());
                parallel_for(data_points.size(), [&](std::size_t i) {
                    warped[i] = warp(data_points[i], data_skins[i], rest_nodes, state);
                    const std::vector<int> nn = target_index.knn(warped[i], 1);
                    corr[i] = target[static_cast<std::size_t>(nn[0])];
                }, options.threads);

                double data_energy = 0.0;
                for (std::size_t i = 0; i < data_points.size(); ++i)
                    data_energy += (warped[i] - corr[i]).squaredNorm();
                const double energy = data_energy + options.lambda_arap * arap_energy(state);
                if (std::abs(prev_energy - energy) <=
                    options.relative_tol * std::max(prev_energy, 1e-12))
                    break;
                prev_energy = std::min(prev_energy, energy);

                // (b) Damped Gauss-Newton step on the node transforms.
                std::vector<Eigen::Triplet<double>> triplets;
                triplets.reserve(data_points.size() * 576 + edges.size() * 288);
                Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dof);

                auto add_block = [&](int a, int b, const Eigen::Matrix<double, 6, 6>& m) {
                    for (int r = 0; r < 6; ++r)
                        for (int c = 0; c < 6; ++c)
                            if (m(r, c) != 0.0) triplets.emplace_back(a * 6 + r, b * 6 + c, m(r, c));
                };

                for (std::size_t i = 0; i < data_points.size(); ++i) {
                    const Skin& skin = data_skins[i];
                    const Point3 residual = warped[i] - corr[i];
                    // Jacobian per node k: [-w [R(x-g)]_x | w I].
                    std::array<Eigen::Matrix<double, 3, 6>, 4> jac;
                    for (int k = 0; k < skin.count; ++k) {
                        const std::size_t p =
                            static_cast<std::size_t>(skin.nodes[static_cast<std::size_t>(k)]);
                        const double w = skin.weights[static_cast<std::size_t>(k)];
                        jac[static_cast<std::size_t>(k)].leftCols<3>() =
                            -w * skew(state[p].rotation * (data_points[i] - rest_nodes[p]));
                        jac[static_cast<std::size_t>(k)].rightCols<3>() =
                            w * Eigen::Matrix3d::Identity();
                    }
                    for (int a = 0; a < skin.count; ++a) {
                        const int pa = skin.nodes[static_cast<std::size_t>(a)];
                        rhs.segment<6>(pa * 6) -=
                            jac[static_cast<std::size_t>(a)].transpose() * residual;
                        for (int b = 0; b < skin.count; ++b) {
                            const int pb = skin.nodes[static_cast<std::size_t>(b)];
                            add_block(pa, pb,
                                      jac[static_cast<std::size_t>(a)].transpose() *
                                          jac[static_cast<std::size_t>(b)]);
                        }
                    }
                }

                const double lam = options.lambda_arap;
                for (const RestEdge& edge : edges) {
                    for (int dir = 0; dir < 2; ++dir) {
                        const std::size_t p = static_cast<std::size_t>(dir == 0 ? edge.p : edge.q);
                        const std::size_t q = static_cast<std::size_t>(dir == 0 ? edge.q : edge.p);
                        const Point3 lever = state[p].rotation * (rest_nodes[q] - rest_nodes[p]);
                        const Point3 residual = lever + rest_nodes[p] + state[p].translation -
                                                (rest_nodes[q] + state[q].translation);
                        Eigen::Matrix<double, 3, 6> jp;
                        jp.leftCols<3>() = -skew(lever);
                        jp.rightCols<3>() = Eigen::Matrix3d::Identity();
                        Eigen::Matrix<double, 3, 6> jq = Eigen::Matrix<double, 3, 6>::Zero();
                        jq.rightCols<3>() = -Eigen::Matrix3d::Identity();
                        rhs.segment<6>(static_cast<int>(p) * 6) -= lam * jp.transpose() * residual;
                        rhs.segment<6>(static_cast<int>(q) * 6) -= lam * jq.transpose() * residual;
                        add_block(static_cast<int>(p), static_cast<int>(p),
                                  lam * jp.transpose() * jp);
                        add_block(static_cast<int>(p), static_cast<int>(q),
                                  lam * jp.transpose() * jq);
                        add_block(static_cast<int>(q), static_cast<int>(p),
                                  lam * jq.transpose() * jp);
                        add_block(static_cast<int>(q), static_cast<int>(q),
                                  lam * jq.transpose() * jq);
                    }
                }

                bool stepped = false;
                for (int attempt = 0; attempt < 8 && !stepped; ++attempt) {
                    std::vector<Eigen::Triplet<double>> damped = triplets;
                    for (int d = 0; d < dof; ++d) damped.emplace_back(d, d, mu);
                    hessian.setFromTriplets(damped.begin(), damped.end());
                    solver.compute(hessian);
                    if (solver.info() != Eigen::Success) {
                        mu *= 10.0;
                        continue;
                    }
                    const Eigen::VectorXd delta = solver.solve(rhs);
                    if (solver.info() != Eigen::Success) {
                        mu *= 10.0;
                        continue;
                    }

                    std::vector<NodeState> trial = state;
                    for (std::size_t p = 0; p < node_count; ++p) {
                        const Eigen::Vector3d omega = delta.segment<3>(static_cast<int>(p) * 6);
                        const Eigen::Vector3d tau = delta.segment<3>(static_cast<int>(p) * 6 + 3);
                        const double angle = omega.norm();
                        if (angle > 1e-300) {
                            trial[p].rotation =
                                Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix() *
                                trial[p].rotation;
                        }
                        trial[p].translation += tau;
                    }
                    double trial_data = 0.0;
                    for (std::size_t i = 0; i < data_points.size(); ++i)
                        trial_data +=
                            (warp(data_points[i], data_skins[i], rest_nodes, trial) - corr[i])
                                .squaredNorm();
                    const double trial_energy = trial_data + lam * arap_energy(trial);
                    if (trial_energy <= energy) {
                        state = std::move(trial);
                        mu = std::max(mu * 0.5, 1e-9);
                        stepped = true;
                    } else {
                        mu *= 10.0;
                    }
                }
                if (!stepped) break;
            }
            // Keep rotations numerically orthonormal across chained frames.
            for (NodeState& s : state)
                s.rotation = Eigen::Quaterniond(s.rotation).normalized().toRotationMatrix();
        }

        // Record the frame solution.
        result.graph.node_traj[f].resize(node_count);
        result.graph.transforms[f].resize(node_count);
        for (std::size_t p = 0; p < node_count; ++p) {
            result.graph.node_traj[f][p] = rest_nodes[p] + state[p].translation;
            Se3 t;
            t.rotation = state[p].rotation;
            t.translation =
                rest_nodes[p] + state[p].translation - state[p].rotation * rest_nodes[p];
            result.graph.transforms[f][p] = t;
        }
        PointCloud& out = result.warped[f];
        out.resize(source.size());
        parallel_for(source.size(), [&](std::size_t i) {
            out[i] = warp(source[i], full_skins[i], rest_nodes, state);
        }, options.threads);
        const auto t1 = std::chrono::steady_clock::now();
        result.per_frame_seconds[f] = std::chrono::duration<double>(t1 - t0).count();
    }
    return result;
}

}  // namespace defgraph
