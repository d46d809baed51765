#pragma once

#include <cstdint>
#include <string>

namespace etop {

/// Outcome of one identity-verification run.
struct IdentityReport {
    std::string id;
    int n = 0;
    int m = 1;
    int sample_count = 0;
    double max_rel_residual = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::uint64_t seed = 0;
};

inline IdentityReport make_report(std::string id, int n, int m, int samples, double resid,
                                  double tol, std::uint64_t seed) {
    IdentityReport r;
    r.id = std::move(id);
    r.n = n;
    r.m = m;
    r.sample_count = samples;
    r.max_rel_residual = resid;
    r.tolerance = tol;
    r.passed = resid < tol;
    r.seed = seed;
    return r;
}

} // namespace etop
