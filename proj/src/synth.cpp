#include "defgraph/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <map>

#include "defgraph/rng.hpp"
#include "defgraph/sampling.hpp"

namespace defgraph {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

ShapeKind parse_shape_kind(const std::string& name) {
    if (name == "sphere") return ShapeKind::Sphere;
    if (name == "bar") return ShapeKind::Bar;
    if (name == "two_spheres") return ShapeKind::TwoSpheres;
    if (name == "random_blob") return ShapeKind::RandomBlob;
    throw std::invalid_argument("unknown shape kind: " + name);
}

MotionKind parse_motion_kind(const std::string& name) {
    if (name == "rigid") return MotionKind::Rigid;
    if (name == "bend") return MotionKind::Bend;
    if (name == "sine") return MotionKind::Sine;
    if (name == "articulate") return MotionKind::Articulate;
    if (name == "separate") return MotionKind::Separate;
    throw std::invalid_argument("unknown motion kind: " + name);
}

std::string to_string(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Sphere: return "sphere";
        case ShapeKind::Bar: return "bar";
        case ShapeKind::TwoSpheres: return "two_spheres";
        case ShapeKind::RandomBlob: return "random_blob";
    }
    return "?";
}

std::string to_string(MotionKind kind) {
    switch (kind) {
        case MotionKind::Rigid: return "rigid";
        case MotionKind::Bend: return "bend";
        case MotionKind::Sine: return "sine";
        case MotionKind::Articulate: return "articulate";
        case MotionKind::Separate: return "separate";
    }
    return "?";
}

namespace {

PointCloud gen_sphere(int n, Rng& rng, double radius, const Point3& center) {
    PointCloud out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(center + radius * rng.unit_vector());
    return out;
}

PointCloud gen_bar(int n, Rng& rng) {
    // Box surface with half-extents (0.5, 0.1, 0.1); faces sampled by area.
    const double hx = 0.5, hy = 0.1, hz = 0.1;
    const double area_x = hy * hz, area_y = hx * hz, area_z = hx * hy;  // per face / 4
    const double total = 2.0 * (area_x + area_y + area_z);
    PointCloud out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double pick = rng.uniform(0.0, total);
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
        if (pick < 2.0 * area_x) {
            out.push_back({sign * hx, a * hy, b * hz});
        } else if (pick < 2.0 * (area_x + area_y)) {
            out.push_back({a * hx, sign * hy, b * hz});
        } else {
            out.push_back({a * hx, b * hy, sign * hz});
        }
    }
    return out;
}

PointCloud gen_two_spheres(int n, Rng& rng) {
    PointCloud out = gen_sphere(n / 2, rng, 0.25, {-0.25, 0.0, 0.0});
    PointCloud right = gen_sphere(n - n / 2, rng, 0.25, {0.25, 0.0, 0.0});
    out.insert(out.end(), right.begin(), right.end());
    return out;
}

PointCloud gen_random_blob(int n, Rng& rng) {
    // Star-shaped bumpy surface: radius modulated by a few random plane
    // waves of the direction vector; bumps give the descriptors something
    // to latch onto.
    constexpr int kWaves = 6;
    Point3 wave_dir[kWaves];
    double wave_freq[kWaves], wave_phase[kWaves], wave_amp[kWaves];
    for (int j = 0; j < kWaves; ++j) {
        wave_dir[j] = rng.unit_vector();
        wave_freq[j] = rng.uniform(3.0, 7.0);
        wave_phase[j] = rng.uniform(0.0, 2.0 * kPi);
        wave_amp[j] = rng.uniform(0.5, 1.0);
    }
    PointCloud out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Point3 dir = rng.unit_vector();
        double bump = 0.0;
        for (int j = 0; j < kWaves; ++j)
            bump += wave_amp[j] * std::cos(wave_freq[j] * dir.dot(wave_dir[j]) + wave_phase[j]);
        const double r = 0.32 * (1.0 + 0.35 * bump / kWaves * 3.0);
        out.push_back(r * dir);
    }
    return out;
}

}  // namespace

PointCloud gen_shape(ShapeKind kind, int n, std::uint64_t seed) {
    if (n < 16) throw std::invalid_argument("gen_shape: n must be >= 16");
    Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
    switch (kind) {
        case ShapeKind::Sphere: return gen_sphere(n, rng, 0.5, Point3::Zero());
        case ShapeKind::Bar: return gen_bar(n, rng);
        case ShapeKind::TwoSpheres: return gen_two_spheres(n, rng);
        case ShapeKind::RandomBlob: return gen_random_blob(n, rng);
    }
    throw std::invalid_argument("gen_shape: unknown kind");
}

MotionParams MotionParams::defaults_for(MotionKind kind) {
    MotionParams p;
    switch (kind) {
        case MotionKind::Rigid:
            p.axis = Point3(0.2, 1.0, 0.3).normalized();
            p.angle = kPi / 6.0;
            p.translation = Point3(0.1, 0.05, 0.0);
            break;
        case MotionKind::Bend:
            p.angle = kPi / 3.0;  // 60 degrees
            break;
        case MotionKind::Sine:
            break;
        case MotionKind::Articulate:
            p.axis = Point3(0.0, 1.0, 0.0);
            p.angle = kPi / 4.0;
            break;
        case MotionKind::Separate:
            break;
    }
    return p;
}

namespace {

double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

Point3 motion_apply(MotionKind kind, const MotionParams& params, const Point3& p, double s) {
    switch (kind) {
        case MotionKind::Rigid: {
            const Eigen::AngleAxisd rot(params.angle * s, params.axis.normalized());
            return rot * p + params.translation * s;
        }
        case MotionKind::Bend: {
            // Rotation about the z axis with angle linear in x; the x = 0
            // plane stays fixed.
            const double theta = params.angle * s * (p.x() / 0.5);
            const Eigen::AngleAxisd rot(theta, Point3(0.0, 0.0, 1.0));
            return rot * p;
        }
        case MotionKind::Sine: {
            const double phase = params.sine_frequency * s + p.x();
            return p + Point3(0.0, 0.0, params.sine_amplitude * std::sin(2.0 * kPi * phase));
        }
        case MotionKind::Articulate: {
            // Part A (x < -band/2) fixed; part B rotated about the hinge
            // axis through the origin; smooth blend inside the band.
            const double b = params.blend_band;
            const double w = smoothstep((p.x() + 0.5 * b) / b);
            const Eigen::AngleAxisd rot(params.angle * s * w, params.axis.normalized());
            return rot * p;
        }
        case MotionKind::Separate: {
            return p.x() >= 0.0 ? Point3(p + params.separation * s) : p;
        }
    }
    return p;
}

}  // namespace

SynthMotion gen_motion(const PointCloud& shape, MotionKind kind, int frames,
                       const MotionParams& params) {
    require_cloud(shape, "shape");
    if (frames < 2) throw std::invalid_argument("gen_motion: frames must be >= 2");
    if (kind == MotionKind::Articulate && !(params.blend_band > 0.0))
        throw std::invalid_argument("gen_motion: blend_band must be positive");

    SynthMotion out;
    out.gt.resize(static_cast<std::size_t>(frames));
    out.targets.resize(static_cast<std::size_t>(frames));
    out.labels.resize(shape.size(), 0);
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (kind == MotionKind::Articulate || kind == MotionKind::Separate)
            out.labels[i] = shape[i].x() >= 0.0 ? 1 : 0;
    }

    Rng jitter(params.seed * 0x9e3779b97f4a7c15ULL + 0xda942042e4dd58b5ULL);
    for (int f = 0; f < frames; ++f) {
        const double s = static_cast<double>(f) / static_cast<double>(frames - 1);
        PointCloud& gt_frame = out.gt[static_cast<std::size_t>(f)];
        PointCloud& tgt_frame = out.targets[static_cast<std::size_t>(f)];
        gt_frame.reserve(shape.size());
        tgt_frame.reserve(shape.size());
        for (const Point3& p : shape) {
            const Point3 q = motion_apply(kind, params, p, s);
            gt_frame.push_back(q);
            if (params.noise_sigma > 0.0) {
                tgt_frame.push_back(q + jitter.cube(params.noise_sigma));
            } else {
                tgt_frame.push_back(q);
            }
        }
    }
    return out;
}

std::vector<int> depth_sample_indices(const PointCloud& cloud, const Point3& camera_dir,
                                      int resolution) {
    require_cloud(cloud);
    if (resolution < 16) throw std::invalid_argument("depth_sample: resolution must be >= 16");
    const Point3 w = camera_dir.normalized();
    Point3 up = std::abs(w.z()) > 0.9 ? Point3(1.0, 0.0, 0.0) : Point3(0.0, 0.0, 1.0);
    const Point3 u = up.cross(w).normalized();
    const Point3 v = w.cross(u);

    double ulo = 1e300, uhi = -1e300, vlo = 1e300, vhi = -1e300;
    std::vector<Eigen::Vector3d> proj(cloud.size());  // (u, v, depth)
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        proj[i] = {cloud[i].dot(u), cloud[i].dot(v), cloud[i].dot(w)};
        ulo = std::min(ulo, proj[i].x());
        uhi = std::max(uhi, proj[i].x());
        vlo = std::min(vlo, proj[i].y());
        vhi = std::max(vhi, proj[i].y());
    }
    const double span = std::max({uhi - ulo, vhi - vlo, 1e-12});
    const double pix = span / resolution;

    // Per pixel keep the point with the largest depth toward the camera;
    // ties by lower index for determinism.
    std::map<std::pair<int, int>, int> best;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const int px = std::min(resolution - 1, static_cast<int>((proj[i].x() - ulo) / pix));
        const int py = std::min(resolution - 1, static_cast<int>((proj[i].y() - vlo) / pix));
        auto [it, inserted] = best.try_emplace({px, py}, static_cast<int>(i));
        if (!inserted && proj[i].z() > proj[static_cast<std::size_t>(it->second)].z())
            it->second = static_cast<int>(i);
    }

    std::vector<int> keep;
    keep.reserve(best.size());
    for (const auto& [pixel, idx] : best) keep.push_back(idx);
    std::sort(keep.begin(), keep.end());
    return keep;
}

PointCloud depth_sample(const PointCloud& cloud, const Point3& camera_dir, int resolution) {
    const std::vector<int> keep = depth_sample_indices(cloud, camera_dir, resolution);
    PointCloud out;
    out.reserve(keep.size());
    for (int i : keep) out.push_back(cloud[static_cast<std::size_t>(i)]);
    return out;
}

PointCloud sparse_sample(const PointCloud& cloud, int count) {
    if (count >= static_cast<int>(cloud.size())) return cloud;
    const std::vector<int> idx = farthest_point_sample(cloud, count, 0);
    PointCloud out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(cloud[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace defgraph
