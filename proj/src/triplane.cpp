#include "defgraph/triplane.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace defgraph {

namespace {

Point3 fix_normal_sign(Point3 n) {
    if (n.z() < 0.0) return -n;
    if (n.z() == 0.0) {
        if (n.y() < 0.0) return -n;
        if (n.y() == 0.0 && n.x() < 0.0) return -n;
    }
    return n;
}

void check_radii(const DescriptorParams& params) {
    if (!(params.radius_small > 0.0) || !(params.radius_large > 0.0))
        throw std::invalid_argument("descriptors: radii must be positive");
    if (!(params.radius_small < params.radius_large))
        throw std::invalid_argument("descriptors: radius_small must be < radius_large");
}

}  // namespace

DescriptorField::DescriptorField(const PointCloud& cloud, const DescriptorParams& params)
    : cloud_(&cloud), index_(cloud), params_(params) {
    check_radii(params);
    // Median per-point neighbor counts (self excluded) act as the uniform
    // density reference.
    std::vector<double> small_counts(cloud.size()), large_counts(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        small_counts[i] = static_cast<double>(
            index_.radius_query(cloud[i], params_.radius_small).size()) - 1.0;
        large_counts[i] = static_cast<double>(
            index_.radius_query(cloud[i], params_.radius_large).size()) - 1.0;
    }
    auto median_of = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t m = v.size();
        return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
    };
    norm_small_ = std::max(median_of(small_counts), 1.0);
    norm_large_ = std::max(median_of(large_counts), 1.0);
}

Descriptor DescriptorField::evaluate(const Point3& p, bool self_in_cloud) const {
    const PointCloud& pts = *cloud_;
    const auto small_nbrs = index_.radius_query(p, params_.radius_small);
    const auto large_nbrs = index_.radius_query(p, params_.radius_large);
    const double self = self_in_cloud ? 1.0 : 0.0;

    Descriptor d = Descriptor::Zero();
    d[0] = (static_cast<double>(small_nbrs.size()) - self) / norm_small_;
    d[1] = (static_cast<double>(large_nbrs.size()) - self) / norm_large_;

    Point3 normal(0.0, 0.0, 1.0);
    Point3 centroid = p;
    if (!large_nbrs.empty()) {
        centroid = Point3::Zero();
        for (int j : large_nbrs) centroid += pts[static_cast<std::size_t>(j)];
        centroid /= static_cast<double>(large_nbrs.size());
        if (large_nbrs.size() >= 3) {
            Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
            for (int j : large_nbrs) {
                const Point3 q = pts[static_cast<std::size_t>(j)] - centroid;
                cov += q * q.transpose();
            }
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
            normal = fix_normal_sign(eig.eigenvectors().col(0));
        }
    }
    d[2] = normal.x();
    d[3] = normal.y();
    d[4] = normal.z();
    d[5] = (p - centroid).dot(normal);
    d[6] = (p - centroid).norm();
    d[7] = (self_in_cloud || !large_nbrs.empty()) ? 1.0 : 0.0;
    return d;
}

Descriptor DescriptorField::at_point(std::size_t i) const {
    return evaluate((*cloud_)[i], /*self_in_cloud=*/true);
}

Descriptor DescriptorField::at(const Point3& query) const {
    return evaluate(query, /*self_in_cloud=*/false);
}

std::vector<Descriptor> compute_descriptors(const PointCloud& cloud, double radius_small,
                                            double radius_large) {
    return compute_descriptors(cloud, DescriptorParams{radius_small, radius_large});
}

std::vector<Descriptor> compute_descriptors(const PointCloud& cloud,
                                            const DescriptorParams& params) {
    require_cloud(cloud);
    const DescriptorField field(cloud, params);
    std::vector<Descriptor> out(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) out[i] = field.at_point(i);
    return out;
}

TriplaneGrid::TriplaneGrid(int resolution, int channels)
    : resolution_(resolution), channels_(channels) {
    if (resolution < 2) throw std::invalid_argument("TriplaneGrid: resolution must be >= 2");
    const std::size_t cells = static_cast<std::size_t>(resolution) * resolution;
    for (int pl = 0; pl < 3; ++pl) {
        values_[pl].assign(cells * static_cast<std::size_t>(channels), 0.0);
        weights_[pl].assign(cells, 0.0);
        occupied_[pl].assign(cells, 0);
    }
}

namespace {

// Plane axis pairs: xy -> (0,1), yz -> (1,2), xz -> (0,2).
constexpr int kPlaneAxes[3][2] = {{0, 1}, {1, 2}, {0, 2}};

struct Bilinear {
    int i0, i1;
    double f;
};

Bilinear bilinear_coords(double x, int resolution) {
    // Continuous cell coordinate; cell i is centered at (i + 0.5)/R - 0.5.
    double u = (x + 0.5) * resolution - 0.5;
    int i0 = static_cast<int>(std::floor(u));
    double f = u - i0;
    if (i0 < 0) {
        i0 = 0;
        f = 0.0;
    } else if (i0 > resolution - 2) {
        i0 = resolution - 2;
        f = 1.0;
    }
    return {i0, i0 + 1, f};
}

}  // namespace

TriplaneGrid splat(const PointCloud& cloud, const std::vector<Descriptor>& descriptors,
                   int resolution, int dilation_passes) {
    require_cloud(cloud);
    if (descriptors.size() != cloud.size())
        throw std::invalid_argument("splat: descriptor count must match cloud size");
    if (resolution < 2) throw std::invalid_argument("splat: resolution must be >= 2");
    dilation_passes = std::clamp(dilation_passes, 0, 2);

    TriplaneGrid grid(resolution, kDescriptorChannels);
    const int R = resolution;
    const int C = kDescriptorChannels;

    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Point3& p = cloud[i];
        const Descriptor& d = descriptors[i];
        for (int pl = 0; pl < 3; ++pl) {
            const Bilinear bu = bilinear_coords(p[kPlaneAxes[pl][0]], R);
            const Bilinear bv = bilinear_coords(p[kPlaneAxes[pl][1]], R);
            const double w[4] = {(1.0 - bu.f) * (1.0 - bv.f), bu.f * (1.0 - bv.f),
                                 (1.0 - bu.f) * bv.f, bu.f * bv.f};
            const int cells[4] = {bv.i0 * R + bu.i0, bv.i0 * R + bu.i1, bv.i1 * R + bu.i0,
                                  bv.i1 * R + bu.i1};
            for (int k = 0; k < 4; ++k) {
                if (w[k] == 0.0) continue;
                grid.weights_[pl][static_cast<std::size_t>(cells[k])] += w[k];
                double* cell = &grid.values_[pl][static_cast<std::size_t>(cells[k]) * C];
                for (int c = 0; c < C; ++c) cell[c] += w[k] * d[c];
            }
        }
    }

    // Weighted sums -> weighted averages.
    for (int pl = 0; pl < 3; ++pl) {
        for (std::size_t cell = 0; cell < grid.weights_[pl].size(); ++cell) {
            const double w = grid.weights_[pl][cell];
            if (w > 0.0) {
                grid.occupied_[pl][cell] = 1;
                double* v = &grid.values_[pl][cell * C];
                for (int c = 0; c < C; ++c) v[c] /= w;
            }
        }
    }

    // Gap filling: empty cells adjacent to occupied ones receive the mean of
    // their occupied 3x3 neighbors. Occupied cells are never touched.
    for (int pass = 0; pass < dilation_passes; ++pass) {
        for (int pl = 0; pl < 3; ++pl) {
            std::vector<std::pair<std::size_t, std::vector<double>>> fills;
            for (int y = 0; y < R; ++y) {
                for (int x = 0; x < R; ++x) {
                    const std::size_t cell = static_cast<std::size_t>(y) * R + x;
                    if (grid.occupied_[pl][cell]) continue;
                    std::vector<double> acc(static_cast<std::size_t>(C), 0.0);
                    int count = 0;
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int nx = x + dx, ny = y + dy;
                            if (nx < 0 || nx >= R || ny < 0 || ny >= R) continue;
                            const std::size_t ncell = static_cast<std::size_t>(ny) * R + nx;
                            if (!grid.occupied_[pl][ncell]) continue;
                            const double* v = &grid.values_[pl][ncell * C];
                            for (int c = 0; c < C; ++c) acc[static_cast<std::size_t>(c)] += v[c];
                            ++count;
                        }
                    }
                    if (count > 0) {
                        for (double& a : acc) a /= count;
                        fills.emplace_back(cell, std::move(acc));
                    }
                }
            }
            for (auto& [cell, value] : fills) {
                grid.occupied_[pl][cell] = 1;
                std::copy(value.begin(), value.end(), &grid.values_[pl][cell * C]);
            }
        }
    }
    return grid;
}

void TriplaneGrid::sample_plane(int plane, double u, double v, double* out) const {
    const Bilinear bu = bilinear_coords(u, resolution_);
    const Bilinear bv = bilinear_coords(v, resolution_);
    const int R = resolution_;
    const int C = channels_;
    const double w[4] = {(1.0 - bu.f) * (1.0 - bv.f), bu.f * (1.0 - bv.f), (1.0 - bu.f) * bv.f,
                         bu.f * bv.f};
    const int cells[4] = {bv.i0 * R + bu.i0, bv.i0 * R + bu.i1, bv.i1 * R + bu.i0,
                          bv.i1 * R + bu.i1};
    for (int c = 0; c < C; ++c) out[c] = 0.0;
    for (int k = 0; k < 4; ++k) {
        if (w[k] == 0.0) continue;
        const double* cell = &values_[static_cast<std::size_t>(plane)][static_cast<std::size_t>(cells[k]) * C];
        for (int c = 0; c < C; ++c) out[c] += w[k] * cell[c];
    }
}

Eigen::VectorXd TriplaneGrid::sample(const Point3& p) const {
    Eigen::VectorXd out(3 * channels_);
    sample_into(p, out.data());
    return out;
}

void TriplaneGrid::sample_into(const Point3& p, double* out) const {
    if (!finite(p)) throw std::invalid_argument("sample: point must be finite");
    const Point3 q = p.cwiseMax(-0.5).cwiseMin(0.5);
    for (int pl = 0; pl < 3; ++pl)
        sample_plane(pl, q[kPlaneAxes[pl][0]], q[kPlaneAxes[pl][1]], out + pl * channels_);
}

double TriplaneGrid::plane_mass(int plane) const {
    double m = 0.0;
    for (double w : weights_[static_cast<std::size_t>(plane)]) m += w;
    return m;
}

double TriplaneGrid::cell_weight(int plane, int ix, int iy) const {
    return weights_[static_cast<std::size_t>(plane)][static_cast<std::size_t>(iy) * resolution_ + ix];
}

Eigen::VectorXd TriplaneGrid::cell_value(int plane, int ix, int iy) const {
    Eigen::VectorXd out(channels_);
    const double* v = &values_[static_cast<std::size_t>(plane)]
                             [(static_cast<std::size_t>(iy) * resolution_ + ix) * channels_];
    for (int c = 0; c < channels_; ++c) out[c] = v[c];
    return out;
}

bool TriplaneGrid::cell_occupied(int plane, int ix, int iy) const {
    return occupied_[static_cast<std::size_t>(plane)]
                    [static_cast<std::size_t>(iy) * resolution_ + ix] != 0;
}

std::vector<double> correlation(const TriplaneGrid& grid, const Point3& p, const Descriptor& d,
                                const std::vector<Point3>& offsets) {
    if (offsets.empty()) throw std::invalid_argument("correlation: offsets must be non-empty");
    Eigen::VectorXd tiled(3 * kDescriptorChannels);
    tiled << d, d, d;
    const double tnorm = tiled.norm();
    std::vector<double> out;
    out.reserve(offsets.size());
    for (const Point3& o : offsets) {
        const Eigen::VectorXd s = grid.sample(p + o);
        const double snorm = s.norm();
        if (tnorm < 1e-12 || snorm < 1e-12) {
            out.push_back(0.0);
        } else {
            out.push_back(tiled.dot(s) / (tnorm * snorm));
        }
    }
    return out;
}

std::vector<Point3> default_correlation_offsets(int resolution) {
    const double delta = 2.0 / resolution;
    return {Point3::Zero(),          Point3(delta, 0, 0),  Point3(-delta, 0, 0),
            Point3(0, delta, 0),     Point3(0, -delta, 0), Point3(0, 0, delta),
            Point3(0, 0, -delta)};
}

}  // namespace defgraph
