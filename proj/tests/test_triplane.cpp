#include <doctest.h>

#include <chrono>
#include <cmath>

#include "defgraph/rng.hpp"
#include "defgraph/synth.hpp"
#include "defgraph/triplane.hpp"

using namespace defgraph;

namespace {

// Cell i of a plane is centered at (i + 0.5)/R - 0.5.
double cell_center(int i, int resolution) {
    return (i + 0.5) / resolution - 0.5;
}

Descriptor make_descriptor(double base) {
    Descriptor d;
    for (int c = 0; c < kDescriptorChannels; ++c) d[c] = base + 0.1 * c;
    return d;
}

}  // namespace

TEST_CASE("isolated point descriptor is the degenerate convention") {
    const PointCloud cloud{{0.1, 0.2, 0.3}};
    const auto desc = compute_descriptors(cloud, 0.03, 0.06);
    REQUIRE(desc.size() == 1);
    CHECK(desc[0][0] == 0.0);
    CHECK(desc[0][1] == 0.0);
    CHECK(desc[0][2] == 0.0);
    CHECK(desc[0][3] == 0.0);
    CHECK(desc[0][4] == 1.0);  // normal (0, 0, 1)
    CHECK(desc[0][7] == 1.0);
}

TEST_CASE("planar grid points get +z normals") {
    PointCloud cloud;
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j)
            cloud.push_back({-0.45 + 0.045 * i, -0.45 + 0.045 * j, 0.0});
    const auto desc = compute_descriptors(cloud, 0.05, 0.1);
    const std::size_t interior = 10 * 20 + 10;
    CHECK(desc[interior][2] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(desc[interior][3] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(desc[interior][4] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("interior density exceeds corner density on a uniform grid") {
    PointCloud cloud;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
            cloud.push_back({-0.45 + 0.06 * i, -0.45 + 0.06 * j, 0.0});
    const double radius = 0.13;
    const auto desc = compute_descriptors(cloud, radius, 2.0 * radius);

    // Direct neighbor-count oracle for the density channel.
    auto count_within = [&](std::size_t idx, double r) {
        int count = 0;
        for (std::size_t j = 0; j < cloud.size(); ++j)
            if (j != idx && (cloud[j] - cloud[idx]).norm() <= r) ++count;
        return count;
    };
    const std::size_t interior = 8 * 16 + 8, corner = 0;
    CHECK(count_within(interior, radius) > count_within(corner, radius));
    CHECK(desc[interior][0] > desc[corner][0]);

    const double expected =
        static_cast<double>(count_within(interior, radius)) /
        (static_cast<double>(cloud.size()) * (4.0 / 3.0) * M_PI * radius * radius * radius);
    CHECK(desc[interior][0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("splat puts a centered point exactly into one cell per plane") {
    const int R = 16;
    const double c = cell_center(10, R);
    const PointCloud cloud{{c, c, c}};
    const std::vector<Descriptor> desc{make_descriptor(1.0)};
    const TriplaneGrid grid = splat(cloud, desc, R, 0);
    for (int plane = 0; plane < 3; ++plane) {
        CHECK(grid.cell_weight(plane, 10, 10) == doctest::Approx(1.0).epsilon(1e-12));
        const Eigen::VectorXd v = grid.cell_value(plane, 10, 10);
        for (int ch = 0; ch < kDescriptorChannels; ++ch) CHECK(v[ch] == desc[0][ch]);
    }
}

TEST_CASE("splat splits a midway point between two cells") {
    const int R = 16;
    const double mid = 0.5 * (cell_center(7, R) + cell_center(8, R));
    const double c = cell_center(5, R);
    const PointCloud cloud{{mid, c, c}};
    const std::vector<Descriptor> desc{make_descriptor(0.5)};
    const TriplaneGrid grid = splat(cloud, desc, R, 0);
    // xy plane: x splits between cells 7 and 8, y lands on 5.
    CHECK(grid.cell_weight(0, 7, 5) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(grid.cell_weight(0, 8, 5) == doctest::Approx(0.5).epsilon(1e-12));
    for (int ch = 0; ch < kDescriptorChannels; ++ch) {
        CHECK(grid.cell_value(0, 7, 5)[ch] == doctest::Approx(desc[0][ch]).epsilon(1e-12));
        CHECK(grid.cell_value(0, 8, 5)[ch] == doctest::Approx(desc[0][ch]).epsilon(1e-12));
    }
}

TEST_CASE("total splat mass per plane equals the point count") {
    const PointCloud cloud = gen_shape(ShapeKind::RandomBlob, 500, 3);
    const auto desc = compute_descriptors(cloud, 0.03, 0.06);
    const TriplaneGrid grid = splat(cloud, desc, 32);
    for (int plane = 0; plane < 3; ++plane)
        CHECK(grid.plane_mass(plane) == doctest::Approx(500.0).epsilon(1e-9));
}

TEST_CASE("sample returns the descriptor exactly at an isolated splat") {
    const int R = 16;
    const double c = cell_center(3, R);
    const PointCloud cloud{{c, c, c}};
    const std::vector<Descriptor> desc{make_descriptor(2.0)};
    const TriplaneGrid grid = splat(cloud, desc, R);  // dilation on: must not disturb
    const Eigen::VectorXd s = grid.sample({c, c, c});
    REQUIRE(s.size() == 3 * kDescriptorChannels);
    for (int plane = 0; plane < 3; ++plane)
        for (int ch = 0; ch < kDescriptorChannels; ++ch)
            CHECK(s[plane * kDescriptorChannels + ch] == desc[0][ch]);
}

TEST_CASE("sample of an empty grid region is zero and midpoints interpolate") {
    const int R = 16;
    const PointCloud cloud{{cell_center(2, R), cell_center(2, R), cell_center(2, R)}};
    const std::vector<Descriptor> desc{make_descriptor(1.0)};
    const TriplaneGrid grid = splat(cloud, desc, R, 0);
    const Eigen::VectorXd far = grid.sample({0.45, 0.45, 0.45});
    CHECK(far.norm() == 0.0);

    // Two splats one cell apart along x; midway sample averages them.
    const PointCloud pair{{cell_center(5, R), cell_center(9, R), cell_center(9, R)},
                          {cell_center(6, R), cell_center(9, R), cell_center(9, R)}};
    const std::vector<Descriptor> pair_desc{make_descriptor(1.0), make_descriptor(3.0)};
    const TriplaneGrid pair_grid = splat(pair, pair_desc, R, 0);
    const double mid = 0.5 * (cell_center(5, R) + cell_center(6, R));
    const Eigen::VectorXd s = pair_grid.sample({mid, cell_center(9, R), cell_center(9, R)});
    for (int ch = 0; ch < kDescriptorChannels; ++ch)
        CHECK(s[ch] == doctest::Approx(0.5 * (pair_desc[0][ch] + pair_desc[1][ch])).epsilon(1e-12));
}

TEST_CASE("dilation fills neighbors of occupied cells without touching them") {
    const int R = 16;
    const double c = cell_center(8, R);
    const PointCloud cloud{{c, c, c}};
    const std::vector<Descriptor> desc{make_descriptor(1.0)};
    const TriplaneGrid grid = splat(cloud, desc, R, 1);
    CHECK(grid.cell_occupied(0, 8, 8));
    CHECK(grid.cell_occupied(0, 7, 8));
    CHECK(grid.cell_occupied(0, 8, 7));
    CHECK_FALSE(grid.cell_occupied(0, 6, 8));  // one pass fills ring 1 only
    for (int ch = 0; ch < kDescriptorChannels; ++ch) {
        CHECK(grid.cell_value(0, 7, 8)[ch] == desc[0][ch]);
    }
    CHECK(grid.cell_weight(0, 7, 8) == 0.0);  // mass untouched
}

TEST_CASE("sample is continuous under small perturbations") {
    const PointCloud cloud = gen_shape(ShapeKind::RandomBlob, 400, 9);
    const auto desc = compute_descriptors(cloud, 0.03, 0.06);
    const TriplaneGrid grid = splat(cloud, desc, 64);
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const Point3 p = rng.cube(0.45);
        const Eigen::VectorXd base = grid.sample(p);
        const Point3 dir{1.0, -1.0, 0.5};
        const double coarse = (grid.sample(p + 1e-3 * dir) - base).norm();
        const double fine = (grid.sample(p + 1e-6 * dir) - base).norm();
        // Differences shrink linearly with eps (slope changes across cell
        // boundaries allow some slack).
        CHECK(fine <= std::max(10.0 * coarse * 1e-3, 1e-9));
    }
}

TEST_CASE("correlation matches a point's own descriptor on a dense splat") {
    const PointCloud cloud = gen_shape(ShapeKind::Sphere, 4000, 5);
    const auto desc = compute_descriptors(cloud, 0.05, 0.1);
    const TriplaneGrid grid = splat(cloud, desc, 128);
    const std::vector<Point3> center{Point3::Zero()};
    int hits = 0;
    for (std::size_t i = 0; i < cloud.size(); i += 400) {
        const auto sims = correlation(grid, cloud[i], desc[i], center);
        if (sims[0] >= 0.99) ++hits;
    }
    CHECK(hits >= 9);  // of 10 probes
}

TEST_CASE("correlation handles empty grids and orthogonal descriptors") {
    const TriplaneGrid empty(16, kDescriptorChannels);
    Descriptor d = make_descriptor(1.0);
    const auto sims = correlation(empty, {0, 0, 0}, d, default_correlation_offsets(16));
    REQUIRE(sims.size() == 7);
    for (double s : sims) CHECK(s == 0.0);

    // Grid content only in channel 0; query descriptor only in channel 1.
    Descriptor only0 = Descriptor::Zero();
    only0[0] = 1.0;
    const PointCloud cloud{{0, 0, 0}};
    const TriplaneGrid grid = splat(cloud, {only0}, 16, 0);
    Descriptor only1 = Descriptor::Zero();
    only1[1] = 1.0;
    const auto s = correlation(grid, {0, 0, 0}, only1, {Point3::Zero()});
    CHECK(std::abs(s[0]) < 1e-9);

    const auto z = correlation(grid, {0, 0, 0}, Descriptor::Zero(), {Point3::Zero()});
    CHECK(z[0] == 0.0);
}

TEST_CASE("splat cost grows about linearly and sample cost stays flat") {
    const int sizes[3] = {1000, 10000, 100000};
    double splat_times[3];
    double sample_times[3];
    for (int s = 0; s < 3; ++s) {
        const PointCloud cloud = gen_shape(ShapeKind::Sphere, sizes[s], 7);
        std::vector<Descriptor> desc(cloud.size(), make_descriptor(1.0));
        double best_splat = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 3; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            const TriplaneGrid grid = splat(cloud, desc, 128);
            best_splat = std::min(best_splat,
                                  std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - t0).count());
        }
        splat_times[s] = best_splat;

        const TriplaneGrid grid = splat(cloud, desc, 128);
        Rng rng(3);
        double best_sample = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 3; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            double sink = 0.0;
            for (int i = 0; i < 2000; ++i) sink += grid.sample(rng.cube(0.5)).sum();
            best_sample = std::min(best_sample,
                                   std::chrono::duration<double>(
                                       std::chrono::steady_clock::now() - t0).count());
            CHECK(std::isfinite(sink));
        }
        sample_times[s] = best_sample;
    }
    const double splat_slope = std::log(splat_times[2] / splat_times[0]) / std::log(100.0);
    CHECK(splat_slope < 1.2);
    // Sampling cost must not scale with N.
    CHECK(sample_times[2] < sample_times[0] * 3.0 + 1e-3);
}
