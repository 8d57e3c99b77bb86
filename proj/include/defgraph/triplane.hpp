#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "defgraph/sampling.hpp"
#include "defgraph/types.hpp"

namespace defgraph {

inline constexpr int kDescriptorChannels = 8;

/// Hand-crafted per-point feature vector. Channel layout:
///   0 density at radius_small, 1 density at radius_large (counts relative
///     to a uniform unit-cube distribution, so clouds of different sampling
///     density stay comparable),
///   2..4 unit surface normal (sign fixed toward the +z hemisphere),
///   5 signed offset of the point from its local centroid along the normal,
///   6 distance to the local centroid,
///   7 occupancy (1 when the neighborhood is non-empty).
using Descriptor = Eigen::Matrix<double, kDescriptorChannels, 1>;

struct DescriptorParams {
    double radius_small = 0.05;
    double radius_large = 0.10;
};

/// Evaluates descriptors against one cloud. Density channels are neighbor
/// counts relative to the cloud's own median count at that radius, so
/// uniformly sampled regions sit at 1 regardless of how densely the cloud
/// was sampled; that keeps descriptors comparable between a dense source
/// and sparse or decimated targets.
class DescriptorField {
public:
    explicit DescriptorField(const PointCloud& cloud, const DescriptorParams& params = {});

    /// Descriptor of cloud point `i` (the point itself is excluded from its
    /// own neighbor counts).
    Descriptor at_point(std::size_t i) const;

    /// Descriptor of an arbitrary query position (not part of the cloud).
    Descriptor at(const Point3& query) const;

    const GridIndex& index() const { return index_; }
    const DescriptorParams& params() const { return params_; }

private:
    Descriptor evaluate(const Point3& p, bool self_in_cloud) const;

    const PointCloud* cloud_;
    GridIndex index_;
    DescriptorParams params_;
    double norm_small_ = 1.0;  // median neighbor count within radius_small
    double norm_large_ = 1.0;
};

std::vector<Descriptor> compute_descriptors(const PointCloud& cloud, double radius_small,
                                            double radius_large);
std::vector<Descriptor> compute_descriptors(const PointCloud& cloud,
                                            const DescriptorParams& params = {});

/// Three orthogonal feature planes with per-cell splat weights. Cell (i, j)
/// of a plane covers a square of side 1/resolution inside [-0.5, 0.5]^2;
/// values are splat-weighted descriptor averages.
class TriplaneGrid {
public:
    TriplaneGrid(int resolution, int channels);

    int resolution() const { return resolution_; }
    int channels() const { return channels_; }

    /// Bilinear sample of all three planes at p (clamped to the unit cube),
    /// concatenated (xy, yz, xz): 3 * channels values.
    Eigen::VectorXd sample(const Point3& p) const;

    /// Allocation-free variant; `out` must hold 3 * channels doubles.
    void sample_into(const Point3& p, double* out) const;

    /// Sum of splat weights over one plane (0 = xy, 1 = yz, 2 = xz).
    double plane_mass(int plane) const;

    double cell_weight(int plane, int ix, int iy) const;
    Eigen::VectorXd cell_value(int plane, int ix, int iy) const;
    bool cell_occupied(int plane, int ix, int iy) const;

private:
    friend TriplaneGrid splat(const PointCloud&, const std::vector<Descriptor>&, int, int);

    int resolution_;
    int channels_;
    // Per plane: values (R*R*C), weights (R*R), occupancy (R*R).
    std::array<std::vector<double>, 3> values_;
    std::array<std::vector<double>, 3> weights_;
    std::array<std::vector<std::uint8_t>, 3> occupied_;

    void sample_plane(int plane, double u, double v, double* out) const;
};

/// Splats per-point descriptors bilinearly onto the three planes, then runs
/// up to `dilation_passes` (max 2) rounds of 3x3 gap filling; dilation never
/// overwrites occupied cells and never alters splat weights.
TriplaneGrid splat(const PointCloud& cloud, const std::vector<Descriptor>& descriptors,
                   int resolution, int dilation_passes = 1);

inline Eigen::VectorXd sample(const TriplaneGrid& grid, const Point3& p) { return grid.sample(p); }

/// Cosine similarity between the descriptor (tiled across the three planes)
/// and grid samples at p + offset, one value per offset. Zero-norm inputs
/// yield similarity 0.
std::vector<double> correlation(const TriplaneGrid& grid, const Point3& p, const Descriptor& d,
                                const std::vector<Point3>& offsets);

/// Center plus +-delta along each axis, delta = 2 cell widths.
std::vector<Point3> default_correlation_offsets(int resolution);

}  // namespace defgraph
