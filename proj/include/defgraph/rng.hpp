#pragma once

#include <cstdint>
#include <random>

#include "defgraph/types.hpp"

namespace defgraph {

/// Deterministic uniform helpers. std::mt19937_64 output is fully specified
/// by the standard; the distribution transforms below are fixed here so the
/// same seed yields bitwise-identical streams on every platform.
struct Rng {
    std::mt19937_64 engine;

    explicit Rng(std::uint64_t seed) : engine(seed) {}

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        return n == 0 ? 0 : engine() % n;
    }

    /// Uniform direction on the unit sphere.
    Point3 unit_vector() {
        const double z = uniform(-1.0, 1.0);
        const double phi = uniform(0.0, 2.0 * 3.14159265358979323846);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

    /// Uniform in the axis-aligned cube [-half, half]^3.
    Point3 cube(double half) {
        return {uniform(-half, half), uniform(-half, half), uniform(-half, half)};
    }
};

}  // namespace defgraph
