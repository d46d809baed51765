#pragma once

// Catalogue of scalar elliptic-kernel identities, verified over seeded
// random samples in the fundamental cell. Shares the report format of the
// R-matrix verifier.

#include "etop/report.hpp"
#include "etop/rng.hpp"

namespace etop {

inline const std::vector<std::string>& kernel_catalogue() {
    static const std::vector<std::string> ids = {
        "fay",         "fay-coincident",   "f-exchange", "f-exchange-odd", "wp-difference",
        "heat-phi",    "quasi-periodicity", "phi-local", "e1-local", "f-local",
        "theta-heat",  "oddness"};
    return ids;
}

namespace kdetail {

inline double rel(cplx a, cplx b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

/// Laurent coefficient a_{-1} of f around 0 by the trapezoid rule on a
/// circle of radius r. Spectrally accurate: the pole-subtracted kernel
/// functions are analytic in 0 < |z| <= r, with the next singularity a
/// full lattice step away.
template <typename F>
cplx contour_coeff(F&& f, double r, int points = 64) {
    cplx acc = 0.0;
    for (int k = 0; k < points; ++k) {
        const cplx z = r * std::exp(2.0 * pi * iu * double(k) / double(points));
        acc += f(z) * z;
    }
    return acc / double(points);
}

} // namespace kdetail

inline IdentityReport verify_kernel_identity(const std::string& id, const Modulus& tau,
                                             int sample_count, double tol, std::uint64_t seed) {
    using kdetail::rel;
    bool known = false;
    for (const auto& k : kernel_catalogue()) known = known || (k == id);
    if (!known) throw UnknownIdentity("unknown kernel identity id '" + id + "'");
    if (sample_count < 1)
        throw std::invalid_argument("verify_kernel_identity: sample_count must be >= 1");

    Rng rng(seed);
    const cplx tv = tau.tau;
    double worst = 0.0;
    int got = 0;
    int guard = 0;
    while (got < sample_count) {
        if (++guard > 40 * sample_count)
            throw PoleProximity("kernel verifier could not draw pole-safe samples");
        const cplx z = rng.in_cell(tau), w = rng.in_cell(tau), q = rng.in_cell(tau),
                   u = rng.in_cell(tau);
        double res = 0.0;
        try {
            if (id == "fay") {
                const cplx lhs = kronecker(z, q, tau) * kronecker(w, u, tau);
                const cplx rhs = kronecker(z - w, q, tau) * kronecker(w, q + u, tau) +
                                 kronecker(w - z, u, tau) * kronecker(z, q + u, tau);
                res = rel(lhs, rhs);
            } else if (id == "fay-coincident") {
                const cplx lhs = kronecker(z, q, tau) * kronecker(w, q, tau);
                const cplx rhs = kronecker(z + w, q, tau) *
                                 (e1(z, tau) + e1(w, tau) + e1(q, tau) - e1(z + w + q, tau));
                res = rel(lhs, rhs);
            } else if (id == "f-exchange") {
                const cplx lhs = kronecker(z, q, tau) * kronecker_du(z, u, tau) -
                                 kronecker(z, u, tau) * kronecker_du(z, q, tau);
                const cplx rhs = kronecker(z, q + u, tau) * (e2(q, tau) - e2(u, tau));
                res = rel(lhs, rhs);
            } else if (id == "f-exchange-odd") {
                const cplx lhs = kronecker(z, q, tau) * kronecker_du(z, -q, tau) -
                                 kronecker(z, -q, tau) * kronecker_du(z, q, tau);
                res = rel(lhs, wp_prime(q, tau));
            } else if (id == "wp-difference") {
                const cplx lhs = kronecker(u, z, tau) * kronecker(u, -z, tau);
                res = rel(lhs, wp(u, tau) - wp(z, tau));
            } else if (id == "heat-phi") {
                const cplx lhs = kronecker_dtau_termwise(z, u, tau);
                const cplx rhs = kronecker_dzdu(z, u, tau) / (2.0 * pi * iu);
                res = std::abs(lhs - rhs) / std::abs(kronecker(z, u, tau));
            } else if (id == "quasi-periodicity") {
                res = rel(kronecker(z + 1.0, u, tau), kronecker(z, u, tau));
                res = std::max(res, rel(kronecker(z + tv, u, tau),
                                        std::exp(-2.0 * pi * iu * u) * kronecker(z, u, tau)));
                for (int n : {2, 3})
                    for (int a1 = 0; a1 < n; ++a1)
                        for (int a2 = 0; a2 < n; ++a2) {
                            if (a1 == 0 && a2 == 0) continue;
                            const ModeIndex al{a1, a2};
                            const cplx p0 = phi_alpha(0.0, z, al, n, tau);
                            res = std::max(
                                res, rel(phi_alpha(0.0, z + 1.0, al, n, tau),
                                         std::exp(2.0 * pi * iu * double(a2) / double(n)) * p0));
                            res = std::max(
                                res, rel(phi_alpha(0.0, z + tv, al, n, tau),
                                         std::exp(-2.0 * pi * iu * double(a1) / double(n)) * p0));
                        }
            } else if (id == "phi-local") {
                // phi(z,u) = 1/z + E1(u) + (z/2)(E1^2(u) - wp(u)) + O(z^2)
                const double r = 0.1;
                auto sub = [&](cplx zz) { return kronecker(zz, u, tau) - 1.0 / zz; };
                const cplx c0 = kdetail::contour_coeff([&](cplx zz) { return sub(zz) / zz; }, r);
                res = rel(c0, e1(u, tau));
                const cplx c1 =
                    kdetail::contour_coeff([&](cplx zz) { return sub(zz) / (zz * zz); }, r);
                res = std::max(res, rel(c1, 0.5 * (e1(u, tau) * e1(u, tau) - wp(u, tau))));
            } else if (id == "e1-local") {
                // E1(z) = 1/z + (z/3) theta'''(0)/theta'(0) + O(z^3)
                const double r = 0.1;
                const cplx c1 = kdetail::contour_coeff(
                    [&](cplx zz) { return (e1(zz, tau) - 1.0 / zz) / (zz * zz); }, r);
                res = rel(c1, theta_c(tau) / 3.0);
            } else if (id == "f-local") {
                // f(0,u) = -E2(u)
                const double r = 0.1;
                const cplx c0 = kdetail::contour_coeff(
                    [&](cplx zz) { return kronecker_du(zz, u, tau) / zz; }, r);
                res = rel(c0, -e2(u, tau));
            } else if (id == "theta-heat") {
                res = rel(4.0 * pi * iu * theta(z, tau, 0, 1), theta(z, tau, 2));
                res = std::max(res, rel(4.0 * pi * iu * theta(z, tau, 1, 1), theta(z, tau, 3)));
            } else if (id == "oddness") {
                res = rel(theta(z, tau), -theta(-z, tau));
                res = std::max(res, rel(e1(z, tau), -e1(-z, tau)));
                res = std::max(res, rel(e2(z, tau), e2(-z, tau)));
            }
        } catch (const PoleProximity&) {
            continue;
        }
        worst = std::max(worst, res);
        ++got;
    }
    return make_report(id, 0, 0, sample_count, worst, tol, seed);
}

} // namespace etop
