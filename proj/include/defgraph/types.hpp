#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace defgraph {

using Point3 = Eigen::Vector3d;
using PointCloud = std::vector<Point3>;
using PointCloudSeq = std::vector<PointCloud>;

/// Rigid motion: rotation (proper orthonormal) plus translation.
struct Se3 {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Point3 apply(const Point3& p) const { return rotation * p + translation; }

    Se3 compose(const Se3& other) const {
        // (*this) ∘ other: apply other first.
        return Se3{rotation * other.rotation, rotation * other.translation + translation};
    }

    Se3 inverse() const {
        Eigen::Matrix3d rt = rotation.transpose();
        return Se3{rt, -(rt * translation)};
    }

    bool is_rigid(double tol = 1e-9) const {
        Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
        if (err.cwiseAbs().maxCoeff() > tol) return false;
        return std::abs(rotation.determinant() - 1.0) <= tol;
    }

    static Se3 identity() { return Se3{}; }
};

/// Sparse motion representation: rest node positions, per-node influence
/// radii, per-frame node positions and per-frame rigid transforms.
struct DeformationGraph {
    PointCloud rest_nodes;                     // B
    std::vector<double> radii;                 // B
    std::vector<PointCloud> node_traj;         // T x B
    std::vector<std::vector<Se3>> transforms;  // T x B

    std::size_t node_count() const { return rest_nodes.size(); }
    std::size_t frame_count() const { return node_traj.size(); }
};

/// Dense registration output: warped source per frame plus timing.
struct RegistrationResult {
    std::vector<PointCloud> warped;        // T x N_s
    std::vector<double> per_frame_seconds; // T
    DeformationGraph graph;
    // Diagnostics.
    std::size_t degenerate_transform_count = 0;
    std::size_t skipped_frame_count = 0;
};

/// Structured I/O failure; `kind` distinguishes the error classes the
/// file-format readers are required to report.
struct IoError : std::runtime_error {
    enum class Kind { FileAccess, BadMagic, Truncated, VersionMismatch, Malformed, Schema };
    Kind kind;
    IoError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

/// Numerical failure (degenerate geometry, divergence) distinct from
/// argument validation errors.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool finite(const Point3& p) {
    return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

inline void require_cloud(const PointCloud& cloud, const char* what = "point cloud") {
    if (cloud.empty()) throw std::invalid_argument(std::string(what) + " must contain at least one point");
    for (const Point3& p : cloud) {
        if (!finite(p)) throw std::invalid_argument(std::string(what) + " contains non-finite coordinates");
    }
}

inline void require_seq(const PointCloudSeq& seq) {
    if (seq.empty()) throw std::invalid_argument("sequence must contain at least one frame");
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (seq[i].empty())
            throw std::invalid_argument("frame " + std::to_string(i) + " is empty");
    }
}

}  // namespace defgraph
