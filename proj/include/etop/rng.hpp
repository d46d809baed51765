#pragma once

#include <cstdint>
#include <random>

#include "etop/elliptic.hpp"

namespace etop {

/// Seeded generator with a fixed uniform mapping, so identical seeds give
/// identical draws on every platform.
struct Rng {
    std::mt19937_64 g;
    explicit Rng(std::uint64_t seed) : g(seed) {}

    double uniform(double lo, double hi) {
        const double u = double(g() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

    cplx box(double lo = -1.0, double hi = 1.0) {
        const double re = uniform(lo, hi);
        const double im = uniform(lo, hi);
        return {re, im};
    }

    /// Point u + v*tau with u,v uniform in (0.05, 0.95): inside the
    /// fundamental parallelogram, margin 0.05 from its boundary lattice.
    cplx in_cell(const Modulus& tau) {
        const double u = uniform(0.05, 0.95);
        const double v = uniform(0.05, 0.95);
        return u + v * tau.tau;
    }
};

} // namespace etop
