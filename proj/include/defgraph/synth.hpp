#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "defgraph/types.hpp"

namespace defgraph {

enum class ShapeKind { Sphere, Bar, TwoSpheres, RandomBlob };
enum class MotionKind { Rigid, Bend, Sine, Articulate, Separate };

ShapeKind parse_shape_kind(const std::string& name);
MotionKind parse_motion_kind(const std::string& name);
std::string to_string(ShapeKind kind);
std::string to_string(MotionKind kind);

/// Deterministic surface samples, centered at the origin and fitting the
/// unit cube. Sphere points lie exactly at radius 0.5; bar is the surface of
/// a box with extents (1, 0.2, 0.2); two_spheres are radius-0.25 spheres
/// touching at the origin; random_blob is a bumpy star-shaped surface.
PointCloud gen_shape(ShapeKind kind, int n, std::uint64_t seed);

struct MotionParams {
    Point3 axis{0.0, 0.0, 1.0};     // rotation / hinge axis
    double angle = 0.0;             // max rotation angle, radians
    Point3 translation{0.0, 0.0, 0.0};
    double sine_amplitude = 0.05;
    double sine_frequency = 1.0;
    double blend_band = 0.05;       // articulation transition width
    Point3 separation{0.3, 0.0, 0.0};
    double noise_sigma = 0.0;       // uniform jitter on targets only
    std::uint64_t seed = 0;

    static MotionParams defaults_for(MotionKind kind);
};

struct SynthMotion {
    PointCloudSeq targets;          // T frames, jittered when noise_sigma > 0
    PointCloudSeq gt;               // T x N exact trajectories, never jittered
    std::vector<int> labels;        // per source point part label
};

/// Analytic motion applied to `shape` over `frames` frames; frame 0 is
/// always the undeformed shape (zero motion).
SynthMotion gen_motion(const PointCloud& shape, MotionKind kind, int frames,
                       const MotionParams& params);

/// Orthographic z-buffer selection: keeps, per pixel of a resolution^2
/// image plane orthogonal to camera_dir, the point nearest the camera
/// (camera_dir points from the scene toward the camera). The result is a
/// subset of the input.
PointCloud depth_sample(const PointCloud& cloud, const Point3& camera_dir, int resolution);
std::vector<int> depth_sample_indices(const PointCloud& cloud, const Point3& camera_dir,
                                      int resolution);

/// Deterministic subset of `count` indices spread by farthest point
/// sampling (convenience for making sparse targets).
PointCloud sparse_sample(const PointCloud& cloud, int count);

}  // namespace defgraph
