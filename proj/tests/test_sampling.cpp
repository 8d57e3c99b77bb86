#include <doctest.h>

#include <algorithm>
#include <limits>

#include "defgraph/rng.hpp"
#include "defgraph/sampling.hpp"

using namespace defgraph;

namespace {

PointCloud random_cloud(int n, std::uint64_t seed, double half = 0.5) {
    Rng rng(seed);
    PointCloud cloud;
    cloud.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) cloud.push_back(rng.cube(half));
    return cloud;
}

// Quadratic reference FPS: each round scans every unselected candidate and
// recomputes its distance to the full selected set.
std::vector<int> fps_oracle(const PointCloud& cloud, int count, int seed_index) {
    std::vector<int> selected{seed_index};
    std::vector<char> chosen(cloud.size(), 0);
    chosen[static_cast<std::size_t>(seed_index)] = 1;
    while (static_cast<int>(selected.size()) < count) {
        int arg = -1;
        double best = -1.0;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            if (chosen[i]) continue;
            double min_d2 = std::numeric_limits<double>::infinity();
            for (int s : selected)
                min_d2 = std::min(min_d2, (cloud[i] - cloud[static_cast<std::size_t>(s)]).squaredNorm());
            if (min_d2 > best) {
                best = min_d2;
                arg = static_cast<int>(i);
            }
        }
        selected.push_back(arg);
        chosen[static_cast<std::size_t>(arg)] = 1;
    }
    return selected;
}

std::vector<int> knn_oracle(const Point3& query, const PointCloud& cloud, int k) {
    std::vector<std::pair<double, int>> all;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        all.emplace_back((cloud[i] - query).squaredNorm(), static_cast<int>(i));
    std::sort(all.begin(), all.end());
    std::vector<int> out;
    for (int i = 0; i < k; ++i) out.push_back(all[static_cast<std::size_t>(i)].second);
    return out;
}

double min_pairwise_distance(const PointCloud& cloud, const std::vector<int>& idx) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b)
            best = std::min(best, (cloud[static_cast<std::size_t>(idx[a])] -
                                   cloud[static_cast<std::size_t>(idx[b])]).norm());
    return best;
}

}  // namespace

TEST_CASE("fps selects all points when count equals size") {
    const PointCloud cloud = random_cloud(5, 11);
    std::vector<int> idx = farthest_point_sample(cloud, 5);
    std::sort(idx.begin(), idx.end());
    CHECK(idx == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("fps picks the far endpoint on a line") {
    PointCloud cloud;
    for (int i = 0; i < 10; ++i) cloud.push_back({static_cast<double>(i), 0.0, 0.0});
    const std::vector<int> idx = farthest_point_sample(cloud, 2, 0);
    CHECK(idx == std::vector<int>{0, 9});
}

TEST_CASE("fps matches the quadratic oracle") {
    const PointCloud cloud = random_cloud(8, 3);
    CHECK(farthest_point_sample(cloud, 4, 0) == fps_oracle(cloud, 4, 0));

    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed + 100);
        const int n = 2 + static_cast<int>(rng.uniform_index(120));
        const int count = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
        const int seed_index = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
        const PointCloud cloud = random_cloud(n, seed * 7 + 1);
        CHECK(farthest_point_sample(cloud, count, seed_index) ==
              fps_oracle(cloud, count, seed_index));
    }
}

TEST_CASE("fps minimum pairwise distance is non-increasing in count") {
    const PointCloud cloud = random_cloud(60, 21);
    double prev = std::numeric_limits<double>::infinity();
    for (int count = 2; count <= 20; ++count) {
        const double d = min_pairwise_distance(cloud, farthest_point_sample(cloud, count));
        CHECK(d <= prev + 1e-15);
        prev = d;
    }
}

TEST_CASE("fps rejects invalid arguments") {
    const PointCloud cloud = random_cloud(4, 1);
    CHECK_THROWS_AS((void)farthest_point_sample(cloud, 5), std::invalid_argument);
    CHECK_THROWS_AS((void)farthest_point_sample(cloud, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)farthest_point_sample(cloud, 2, 9), std::invalid_argument);
}

TEST_CASE("knn trivial cases") {
    PointCloud cloud{{1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    CHECK(knn({2, 0, 0}, cloud, 1) == std::vector<int>{1});
    CHECK(knn({0, 0, 0}, cloud, 2) == std::vector<int>{0, 1});
}

TEST_CASE("knn matches the linear scan oracle") {
    const PointCloud cloud = random_cloud(64, 5);
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const Point3 query = rng.cube(0.7);
        const int k = 1 + static_cast<int>(rng.uniform_index(64));
        CHECK(knn(query, cloud, k) == knn_oracle(query, cloud, k));
    }
}

TEST_CASE("grid index knn is exact for any cloud shape") {
    Rng rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_index(200));
        PointCloud cloud = random_cloud(n, 1000 + static_cast<std::uint64_t>(trial));
        if (trial % 4 == 0) {
            for (Point3& p : cloud) p.z() = 0.0;  // squashed cloud
        }
        const GridIndex index(cloud);
        const int k = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
        const Point3 query = rng.cube(1.0);
        CHECK(index.knn(query, k) == knn_oracle(query, cloud, k));
    }
}

TEST_CASE("grid index radius query is exact") {
    const PointCloud cloud = random_cloud(150, 17);
    const GridIndex index(cloud);
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const Point3 query = rng.cube(0.6);
        const double radius = rng.uniform(0.01, 0.5);
        std::vector<int> expected;
        for (std::size_t i = 0; i < cloud.size(); ++i)
            if ((cloud[i] - query).norm() <= radius) expected.push_back(static_cast<int>(i));
        CHECK(index.radius_query(query, radius) == expected);
    }
}

TEST_CASE("knn ties break toward lower index and survive permutation") {
    // Four points at equal distance from the origin.
    PointCloud cloud{{1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}, {2, 0, 0}};
    CHECK(knn({0, 0, 0}, cloud, 2) == std::vector<int>{0, 1});

    const PointCloud shuffled{cloud[3], cloud[0], cloud[4], cloud[2], cloud[1]};
    const std::vector<int> a = knn({0, 0, 0}, cloud, 5);
    const std::vector<int> b = knn({0, 0, 0}, shuffled, 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = (cloud[static_cast<std::size_t>(a[i])] - Point3{0, 0, 0}).norm();
        const double db = (shuffled[static_cast<std::size_t>(b[i])] - Point3{0, 0, 0}).norm();
        CHECK(da == db);
    }
    CHECK_THROWS_AS((void)knn({0, 0, 0}, cloud, 6), std::invalid_argument);
}
