#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "defgraph/synth.hpp"

using namespace defgraph;

TEST_CASE("sphere points sit exactly on the radius-0.5 shell") {
    const PointCloud cloud = gen_shape(ShapeKind::Sphere, 1000, 1);
    REQUIRE(cloud.size() == 1000);
    for (const Point3& p : cloud) CHECK(std::abs(p.norm() - 0.5) < 1e-9);
}

TEST_CASE("bar surface has extents (1, 0.2, 0.2)") {
    const PointCloud cloud = gen_shape(ShapeKind::Bar, 4000, 2);
    Point3 lo = cloud[0], hi = cloud[0];
    for (const Point3& p : cloud) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
        // Every point lies on one of the six faces.
        const bool on_face = std::abs(std::abs(p.x()) - 0.5) < 1e-12 ||
                             std::abs(std::abs(p.y()) - 0.1) < 1e-12 ||
                             std::abs(std::abs(p.z()) - 0.1) < 1e-12;
        CHECK(on_face);
    }
    CHECK((hi - lo).x() == doctest::Approx(1.0).epsilon(0.01));
    CHECK((hi - lo).y() == doctest::Approx(0.2).epsilon(0.01));
    CHECK((hi - lo).z() == doctest::Approx(0.2).epsilon(0.01));
}

TEST_CASE("same seed reproduces shapes bitwise") {
    for (ShapeKind kind : {ShapeKind::Sphere, ShapeKind::Bar, ShapeKind::TwoSpheres,
                           ShapeKind::RandomBlob}) {
        const PointCloud a = gen_shape(kind, 300, 42);
        const PointCloud b = gen_shape(kind, 300, 42);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
    CHECK_THROWS_AS((void)gen_shape(ShapeKind::Sphere, 8, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_shape_kind("torus"), std::invalid_argument);
}

TEST_CASE("zero rigid motion keeps every frame equal to the source") {
    const PointCloud shape = gen_shape(ShapeKind::Sphere, 200, 3);
    MotionParams params;
    params.angle = 0.0;
    params.translation = Point3::Zero();
    const SynthMotion motion = gen_motion(shape, MotionKind::Rigid, 4, params);
    for (const PointCloud& frame : motion.gt) {
        for (std::size_t i = 0; i < shape.size(); ++i) CHECK((frame[i] - shape[i]).norm() == 0.0);
    }
}

TEST_CASE("bend fixes the zero-angle plane") {
    PointCloud shape;
    for (int i = 0; i < 50; ++i) shape.push_back({0.0, -0.1 + 0.004 * i, 0.05});
    for (int i = 0; i < 50; ++i) shape.push_back({-0.5 + 0.02 * i, 0.0, -0.05});
    const MotionParams params = MotionParams::defaults_for(MotionKind::Bend);
    const SynthMotion motion = gen_motion(shape, MotionKind::Bend, 5, params);
    for (const PointCloud& frame : motion.gt) {
        for (int i = 0; i < 50; ++i) CHECK((frame[static_cast<std::size_t>(i)] -
                                            shape[static_cast<std::size_t>(i)]).norm() < 1e-12);
    }
}

TEST_CASE("articulation applies the exact hinge rotation outside the band") {
    const PointCloud shape = gen_shape(ShapeKind::Bar, 2000, 7);
    MotionParams params = MotionParams::defaults_for(MotionKind::Articulate);
    const int frames = 5;
    const SynthMotion motion = gen_motion(shape, MotionKind::Articulate, frames, params);
    const Eigen::Matrix3d hinge =
        Eigen::AngleAxisd(params.angle, params.axis.normalized()).toRotationMatrix();
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape[i].x() > 0.5 * params.blend_band) {
            const Point3 expect = hinge * shape[i];
            CHECK((motion.gt.back()[i] - expect).norm() < 1e-12);
            CHECK(motion.labels[i] == 1);
        } else if (shape[i].x() < -0.5 * params.blend_band) {
            CHECK((motion.gt.back()[i] - shape[i]).norm() < 1e-12);
        }
    }
}

TEST_CASE("motion regeneration is bitwise reproducible including jitter") {
    const PointCloud shape = gen_shape(ShapeKind::RandomBlob, 150, 5);
    MotionParams params = MotionParams::defaults_for(MotionKind::Rigid);
    params.noise_sigma = 0.01;
    params.seed = 77;
    const SynthMotion a = gen_motion(shape, MotionKind::Rigid, 6, params);
    const SynthMotion b = gen_motion(shape, MotionKind::Rigid, 6, params);
    for (std::size_t f = 0; f < a.targets.size(); ++f)
        for (std::size_t i = 0; i < a.targets[f].size(); ++i) {
            CHECK(a.targets[f][i] == b.targets[f][i]);
            CHECK(a.gt[f][i] == b.gt[f][i]);
        }
    // Jitter only touches targets.
    bool jittered = false;
    for (std::size_t i = 0; i < shape.size(); ++i)
        if ((a.targets[1][i] - a.gt[1][i]).norm() > 0.0) jittered = true;
    CHECK(jittered);
}

TEST_CASE("isometric kinds preserve within-part pairwise distances") {
    const PointCloud shape = gen_shape(ShapeKind::Bar, 500, 11);
    MotionParams rigid = MotionParams::defaults_for(MotionKind::Rigid);
    const SynthMotion motion = gen_motion(shape, MotionKind::Rigid, 4, rigid);
    for (std::size_t f = 0; f < motion.gt.size(); ++f) {
        for (std::size_t i = 0; i < 20; ++i) {
            const double before = (shape[i] - shape[i + 100]).norm();
            const double after = (motion.gt[f][i] - motion.gt[f][i + 100]).norm();
            CHECK(std::abs(before - after) < 1e-9);
        }
    }

    MotionParams art = MotionParams::defaults_for(MotionKind::Articulate);
    const SynthMotion hinge_motion = gen_motion(shape, MotionKind::Articulate, 4, art);
    std::vector<std::size_t> part_a, part_b;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape[i].x() < -0.1) part_a.push_back(i);
        if (shape[i].x() > 0.1) part_b.push_back(i);
    }
    for (const auto& part : {part_a, part_b}) {
        REQUIRE(part.size() >= 2);
        for (std::size_t k = 0; k + 1 < std::min<std::size_t>(part.size(), 20); ++k) {
            const double before = (shape[part[k]] - shape[part[k + 1]]).norm();
            const double after =
                (hinge_motion.gt.back()[part[k]] - hinge_motion.gt.back()[part[k + 1]]).norm();
            CHECK(std::abs(before - after) < 1e-9);
        }
    }
}

TEST_CASE("separate motion translates only the moving part") {
    const PointCloud shape = gen_shape(ShapeKind::TwoSpheres, 400, 9);
    MotionParams params = MotionParams::defaults_for(MotionKind::Separate);
    const SynthMotion motion = gen_motion(shape, MotionKind::Separate, 3, params);
    for (std::size_t i = 0; i < shape.size(); ++i) {
        const Point3 expect =
            shape[i].x() >= 0.0 ? Point3(shape[i] + params.separation) : shape[i];
        CHECK((motion.gt.back()[i] - expect).norm() < 1e-12);
        CHECK(motion.labels[i] == (shape[i].x() >= 0.0 ? 1 : 0));
    }
}

TEST_CASE("depth sampling from +z keeps roughly the front hemisphere") {
    const PointCloud cloud = gen_shape(ShapeKind::Sphere, 6000, 13);
    const std::vector<int> keep = depth_sample_indices(cloud, {0, 0, 1}, 64);
    const double fraction = static_cast<double>(keep.size()) / static_cast<double>(cloud.size());
    CHECK(fraction > 0.4);
    CHECK(fraction < 0.6);
    int back = 0, front = 0;
    for (int i : keep) {
        if (cloud[static_cast<std::size_t>(i)].z() < -0.05) ++back;
        if (cloud[static_cast<std::size_t>(i)].z() > 0.05) ++front;
    }
    // The z-buffer keeps the front side and thins the rear down to pixel
    // holes; rear survivors must be a clear minority.
    CHECK(back * 2 < front);
}

TEST_CASE("depth sample output is a subset and planar clouds keep one per pixel") {
    const PointCloud cloud = gen_shape(ShapeKind::RandomBlob, 900, 17);
    const PointCloud kept = depth_sample(cloud, {0.3, -0.5, 0.8}, 32);
    for (const Point3& p : kept)
        CHECK(std::find(cloud.begin(), cloud.end(), p) != cloud.end());

    PointCloud plane;
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) plane.push_back({i * 0.01, j * 0.01, 0.0});
    const PointCloud front = depth_sample(plane, {0, 0, 1}, 32);
    CHECK(front.size() == plane.size());  // no occlusion among coplanar points
    CHECK_THROWS_AS((void)depth_sample(plane, {0, 0, 1}, 8), std::invalid_argument);
}
