#include <doctest.h>

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>

#include "defgraph/rng.hpp"
#include "defgraph/sampling.hpp"
#include "defgraph/synth.hpp"
#include "defgraph/transform.hpp"

using namespace defgraph;

namespace {

Se3 random_rigid(Rng& rng, double max_angle = 3.0, double max_shift = 0.5) {
    Se3 t;
    t.rotation = Eigen::AngleAxisd(rng.uniform(-max_angle, max_angle), rng.unit_vector())
                     .toRotationMatrix();
    t.translation = rng.cube(max_shift);
    return t;
}

PointCloud apply_all(const Se3& t, const PointCloud& cloud) {
    PointCloud out;
    out.reserve(cloud.size());
    for (const Point3& p : cloud) out.push_back(t.apply(p));
    return out;
}

// Places candidate nodes around a center so that candidate k has a
// prescribed worst-over-frames rigidity deviation: the rest distance is
// d_k, and in the worst frame the distance becomes d_k * (1 + dev_k).
struct DeviationSetup {
    PointCloud rest;
    std::vector<PointCloud> traj;
    std::vector<int> candidates;  // ordered by rest distance to center 0
};

DeviationSetup make_deviation_setup(const std::vector<double>& deviations) {
    DeviationSetup s;
    s.rest.push_back({0, 0, 0});  // center
    const int n = static_cast<int>(deviations.size());
    for (int k = 0; k < n; ++k) {
        const double dist = 0.1 + 0.01 * k;  // strictly increasing
        const double angle = 2.0 * M_PI * k / n;
        s.rest.push_back({dist * std::cos(angle), dist * std::sin(angle), 0.0});
        s.candidates.push_back(k + 1);
    }
    // Frame 0: rest configuration (deviation 0); frame 1: scaled distances.
    s.traj.push_back(s.rest);
    PointCloud stretched = s.rest;
    for (int k = 0; k < n; ++k) {
        const Point3 dir = s.rest[static_cast<std::size_t>(k + 1)].normalized();
        const double dist = s.rest[static_cast<std::size_t>(k + 1)].norm();
        stretched[static_cast<std::size_t>(k + 1)] = dir * dist * (1.0 + deviations[static_cast<std::size_t>(k)]);
    }
    s.traj.push_back(stretched);
    return s;
}

// Hand-traced escalation oracle over prescribed deviations.
std::pair<std::vector<int>, double> filter_oracle(const std::vector<double>& deviations,
                                                  const std::vector<int>& candidates,
                                                  double eps0) {
    double eps = eps0;
    for (;;) {
        std::vector<int> members{candidates[0]};
        for (std::size_t k = 1; k < candidates.size(); ++k)
            if (deviations[k] < eps) members.push_back(candidates[k]);
        const std::size_t floor = std::min<std::size_t>(4, candidates.size());
        if (members.size() >= floor || members.size() == candidates.size())
            return {members, eps};
        eps += 0.1;
    }
}

}  // namespace

TEST_CASE("procrustes identity") {
    Rng rng(1);
    PointCloud src;
    for (int i = 0; i < 6; ++i) src.push_back(rng.cube(0.5));
    const Se3 t = procrustes(src, src);
    CHECK((t.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(t.translation.norm() < 1e-12);
}

TEST_CASE("procrustes recovers random rigid motions to 1e-9") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        PointCloud src;
        const int n = 4 + static_cast<int>(rng.uniform_index(12));
        for (int i = 0; i < n; ++i) src.push_back(rng.cube(0.5));
        const Se3 truth = random_rigid(rng);
        const PointCloud dst = apply_all(truth, src);
        const Se3 got = procrustes(src, dst);
        CHECK((got.rotation - truth.rotation).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((got.translation - truth.translation).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(got.is_rigid());
    }
}

TEST_CASE("procrustes never returns a reflection") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        PointCloud src;
        for (int i = 0; i < 5; ++i) src.push_back(rng.cube(0.5));
        PointCloud dst;
        for (const Point3& p : src) dst.push_back({-p.x(), p.y(), p.z()});  // mirror
        const Se3 got = procrustes(src, dst);
        CHECK(got.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(procrustes_residual(src, dst, got) > 1e-6);
    }
}

TEST_CASE("procrustes weighted solution favors heavy points") {
    Rng rng(17);
    PointCloud src;
    for (int i = 0; i < 8; ++i) src.push_back(rng.cube(0.5));
    const Se3 truth = random_rigid(rng, 1.0, 0.2);
    PointCloud dst = apply_all(truth, src);
    dst[7] += Point3(0.3, -0.2, 0.1);  // outlier
    std::vector<double> weights(8, 1.0);
    weights[7] = 1e-9;
    const Se3 got = procrustes(src, dst, &weights);
    CHECK((got.rotation - truth.rotation).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((got.translation - truth.translation).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("procrustes rejects degenerate and mismatched input") {
    PointCloud line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    CHECK_THROWS_AS((void)procrustes(line, line), NumericalError);
    PointCloud a{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    PointCloud b{{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS((void)procrustes(a, b), std::invalid_argument);
    CHECK_THROWS_AS((void)procrustes(b, b), std::invalid_argument);
}

TEST_CASE("procrustes is left-invariant under rigid motions") {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        PointCloud src, dst;
        for (int i = 0; i < 7; ++i) {
            src.push_back(rng.cube(0.5));
            dst.push_back(rng.cube(0.5));
        }
        const Se3 base = procrustes(src, dst);
        const Se3 g = random_rigid(rng);
        const Se3 moved = procrustes(src, apply_all(g, dst));
        const Se3 expect = g.compose(base);
        CHECK((moved.rotation - expect.rotation).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((moved.translation - expect.translation).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("procrustes residual matches a brute-force rotation grid on 3 points") {
    Rng rng(6);
    for (int trial = 0; trial < 3; ++trial) {
        PointCloud src, dst;
        for (int i = 0; i < 3; ++i) {
            src.push_back(rng.cube(0.5));
            dst.push_back(rng.cube(0.5));
        }
        const Se3 got = procrustes(src, dst);
        const double residual = procrustes_residual(src, dst, got);

        // Axis-angle grid search; translation optimal in closed form given R
        // (centroid alignment).
        Point3 mu_src = (src[0] + src[1] + src[2]) / 3.0;
        Point3 mu_dst = (dst[0] + dst[1] + dst[2]) / 3.0;
        double best = std::numeric_limits<double>::infinity();
        const int steps = 24;
        for (int ax = 0; ax < steps; ++ax) {
            for (int az = 0; az < steps; ++az) {
                const double theta = M_PI * ax / steps;
                const double phi = 2.0 * M_PI * az / steps;
                const Point3 axis{std::sin(theta) * std::cos(phi),
                                  std::sin(theta) * std::sin(phi), std::cos(theta)};
                for (int aa = 0; aa < 2 * steps; ++aa) {
                    Se3 cand;
                    cand.rotation =
                        Eigen::AngleAxisd(2.0 * M_PI * aa / (2 * steps), axis).toRotationMatrix();
                    cand.translation = mu_dst - cand.rotation * mu_src;
                    best = std::min(best, procrustes_residual(src, dst, cand));
                }
            }
        }
        CHECK(residual <= best + 1e-9);  // grid can only be worse
        CHECK(best - residual < 0.05 * (1.0 + residual));  // and not by much
    }
}

TEST_CASE("rigidity filter admits everything on rigid trajectories") {
    const PointCloud rest = gen_shape(ShapeKind::RandomBlob, 40, 2);
    MotionParams params = MotionParams::defaults_for(MotionKind::Rigid);
    const SynthMotion motion = gen_motion(rest, MotionKind::Rigid, 4, params);
    const std::vector<int> candidates{1, 2, 3, 4, 5, 6, 7, 8};
    const RigidGroup group = rigidity_filter(0, candidates, rest, motion.gt, 0.2);
    CHECK(group.members == candidates);
    CHECK(group.epsilon_used == 0.2);
}

TEST_CASE("rigidity filter escalates until the floor is met") {
    // 3 rigid candidates, 5 with graded large deviations. The fourth member
    // arrives only once epsilon exceeds the smallest large deviation.
    const std::vector<double> deviations{0.0, 0.01, 0.02, 0.55, 0.65, 0.75, 0.85, 0.95};
    DeviationSetup s = make_deviation_setup(deviations);
    const RigidGroup group = rigidity_filter(0, s.candidates, s.rest, s.traj, 0.2);
    const auto [expected, eps] = filter_oracle(deviations, s.candidates, 0.2);
    CHECK(group.members == expected);
    CHECK(group.epsilon_used == doctest::Approx(eps).epsilon(1e-12));
    CHECK(group.members == std::vector<int>{1, 2, 3, 4});  // one B-side node admitted
    CHECK(group.epsilon_used == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("rigidity filter single-frame ratio thresholding") {
    // One candidate stretched to ratio 1.5 (deviation 0.5) among enough
    // rigid ones that the floor never escalates.
    const std::vector<double> deviations{0.0, 0.0, 0.0, 0.0, 0.5};
    DeviationSetup s = make_deviation_setup(deviations);
    std::vector<PointCloud> one_frame{s.traj[1]};  // only the stretched frame
    const int stretched = s.candidates.back();

    const RigidGroup at02 = rigidity_filter(0, s.candidates, s.rest, one_frame, 0.2);
    CHECK(std::find(at02.members.begin(), at02.members.end(), stretched) == at02.members.end());

    const RigidGroup at06 = rigidity_filter(0, s.candidates, s.rest, one_frame, 0.6);
    CHECK(std::find(at06.members.begin(), at06.members.end(), stretched) != at06.members.end());

    // Strict inequality straight from the admission rule: deviation 0.5 is
    // still rejected at epsilon = 0.5.
    CHECK(rigidity_deviation(0, stretched, s.rest, one_frame) ==
          doctest::Approx(0.5).epsilon(1e-12));
    const RigidGroup at05 = rigidity_filter(0, s.candidates, s.rest, one_frame, 0.5);
    CHECK(std::find(at05.members.begin(), at05.members.end(), stretched) == at05.members.end());
}

TEST_CASE("rigidity filter admits duplicate nodes") {
    PointCloud rest{{0, 0, 0}, {0, 0, 0}, {0.1, 0, 0}, {0, 0.1, 0}, {0, 0, 0.1}};
    std::vector<PointCloud> traj{rest};
    const RigidGroup group = rigidity_filter(0, {1, 2, 3, 4}, rest, traj, 0.2);
    CHECK(group.members == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("estimate_transforms reproduces a rigid motion at every node") {
    const PointCloud shape = gen_shape(ShapeKind::RandomBlob, 600, 8);
    MotionParams params = MotionParams::defaults_for(MotionKind::Rigid);
    const int frames = 4;
    const SynthMotion motion = gen_motion(shape, MotionKind::Rigid, frames, params);

    const std::vector<int> node_idx = farthest_point_sample(shape, 32, 0);
    DeformationGraph graph;
    for (int i : node_idx) graph.rest_nodes.push_back(shape[static_cast<std::size_t>(i)]);
    graph.node_traj.resize(frames);
    for (int f = 0; f < frames; ++f)
        for (int i : node_idx)
            graph.node_traj[static_cast<std::size_t>(f)].push_back(
                motion.gt[static_cast<std::size_t>(f)][static_cast<std::size_t>(i)]);

    const TransformDiagnostics diag = estimate_transforms(graph);
    CHECK(diag.degenerate_groups == 0);
    for (int f = 0; f < frames; ++f) {
        const double s = static_cast<double>(f) / (frames - 1);
        const Eigen::Matrix3d expect_rot =
            Eigen::AngleAxisd(params.angle * s, params.axis.normalized()).toRotationMatrix();
        for (std::size_t p = 0; p < graph.rest_nodes.size(); ++p) {
            const Se3& t = graph.transforms[static_cast<std::size_t>(f)][p];
            CHECK((t.rotation - expect_rot).cwiseAbs().maxCoeff() < 1e-6);
            CHECK((t.translation - params.translation * s).cwiseAbs().maxCoeff() < 1e-6);
            CHECK(t.is_rigid());
            // The transform must reproduce the node trajectory itself.
            CHECK((t.apply(graph.rest_nodes[p]) -
                   graph.node_traj[static_cast<std::size_t>(f)][p]).norm() < 1e-6);
        }
    }
}

TEST_CASE("estimate_transforms on an identity sequence yields identities") {
    const PointCloud shape = gen_shape(ShapeKind::Sphere, 300, 4);
    const std::vector<int> node_idx = farthest_point_sample(shape, 16, 0);
    DeformationGraph graph;
    for (int i : node_idx) graph.rest_nodes.push_back(shape[static_cast<std::size_t>(i)]);
    graph.node_traj.assign(3, graph.rest_nodes);
    estimate_transforms(graph);
    for (const auto& frame : graph.transforms) {
        for (const Se3& t : frame) {
            CHECK((t.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
            CHECK(t.translation.norm() < 1e-9);
        }
    }
}

TEST_CASE("two-part articulation yields two clean rotation clusters") {
    const PointCloud shape = gen_shape(ShapeKind::Bar, 3000, 21);
    MotionParams params = MotionParams::defaults_for(MotionKind::Articulate);
    const int frames = 4;
    const SynthMotion motion = gen_motion(shape, MotionKind::Articulate, frames, params);

    const std::vector<int> node_idx = farthest_point_sample(shape, 64, 0);
    DeformationGraph graph;
    for (int i : node_idx) graph.rest_nodes.push_back(shape[static_cast<std::size_t>(i)]);
    graph.node_traj.resize(frames);
    for (int f = 0; f < frames; ++f)
        for (int i : node_idx)
            graph.node_traj[static_cast<std::size_t>(f)].push_back(
                motion.gt[static_cast<std::size_t>(f)][static_cast<std::size_t>(i)]);
    estimate_transforms(graph);

    const Eigen::Matrix3d hinge =
        Eigen::AngleAxisd(params.angle, params.axis.normalized()).toRotationMatrix();
    auto geodesic = [](const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
        const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
        return std::acos(std::clamp(c, -1.0, 1.0));
    };
    // Nodes whose whole candidate group stays on one part recover the part
    // rotation; groups near the hinge legitimately mix parts, so stay one
    // group radius away from it.
    int checked = 0;
    for (std::size_t p = 0; p < graph.rest_nodes.size(); ++p) {
        const double x = graph.rest_nodes[p].x();
        if (std::abs(x) < 0.2) continue;
        const Se3& t = graph.transforms.back()[p];
        const Eigen::Matrix3d expect = x > 0.0 ? hinge : Eigen::Matrix3d::Identity();
        CHECK(geodesic(t.rotation, expect) < 1e-2);
        ++checked;
    }
    CHECK(checked >= 20);
}
