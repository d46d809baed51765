#pragma once

// Baxter-Belavin quantum R-matrix, its classical-limit coefficients, the
// matrix extension R (x) P~, and a catalogue-driven numerical verifier for
// the quadratic identities these operators satisfy.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "etop/report.hpp"
#include "etop/rng.hpp"
#include "etop/sin_algebra.hpp"

namespace etop {

struct RMatrixSpec {
    int n;
    int m; // noncommutative dimension; 1 = plain
    Modulus tau;
    RMatrixSpec(int n_, int m_, Modulus tau_) : n(n_), m(m_), tau(tau_) {
        if (n < 1 || m < 1) throw std::invalid_argument("RMatrixSpec: N and M must be >= 1");
    }
};

namespace rdetail {

/// Cached basis and section data for one (N, tau) pair.
struct Ctx {
    int n;
    Modulus tau;
    BasisSet basis;
    std::vector<cplx> omega;  // omega_alpha for canonical alpha
    std::vector<double> wt;   // a2/N
    explicit Ctx(int n_, Modulus tau_) : n(n_), tau(tau_), basis(build_basis(n_)) {
        omega.resize(size_t(n * n));
        wt.resize(size_t(n * n));
        for (int a1 = 0; a1 < n; ++a1)
            for (int a2 = 0; a2 < n; ++a2) {
                auto om = lattice_fraction({a1, a2}, n, tau);
                omega[size_t(a1 * n + a2)] = om.omega;
                wt[size_t(a1 * n + a2)] = om.dtau;
            }
    }
};

/// Assemble sum_alpha c_alpha T_alpha (x) T_{-alpha} over canonical modes,
/// with literal-negation duals. skip0 drops the alpha = 0 term.
inline TensorOperator pair_sum(const Ctx& c, const std::function<cplx(int)>& coeff, bool skip0) {
    Mat acc = Mat::Zero(c.n * c.n, c.n * c.n);
    for (int a = skip0 ? 1 : 0; a < c.n * c.n; ++a)
        acc += coeff(a) * kron(c.basis.t[size_t(a)], c.basis.t_dual[size_t(a)]);
    return {{c.n, c.n}, acc};
}

inline void guard_z(const Ctx& c, cplx z) {
    if (lattice_distance(z, c.tau) < pole_guard)
        throw PoleProximity("R-matrix argument 'z' within pole guard of the lattice");
}

inline void guard_shift(const Ctx& c, cplx hbar, int a) {
    if (lattice_distance(hbar + c.omega[size_t(a)], c.tau) < pole_guard)
        throw PoleProximity("R-matrix shift 'hbar + omega_alpha' within pole guard at mode " +
                            std::to_string(a / c.n) + "," + std::to_string(a % c.n));
}

// Quantum R-matrix sum_alpha exp(2 pi i z a2/N) phi(z, hbar + omega_alpha)
// T_alpha (x) T_{-alpha}, on the two auxiliary spaces.
inline TensorOperator R_plain(const Ctx& c, cplx hbar, cplx z) {
    guard_z(c, z);
    return pair_sum(c, [&](int a) {
        guard_shift(c, hbar, a);
        return twisted_phi(z, hbar + c.omega[size_t(a)], c.wt[size_t(a)], c.tau);
    }, false);
}

// Classical r-matrix E1(z) 1(x)1 + sum_{alpha != 0} phi_alpha(z, omega_alpha).
inline TensorOperator r_classical(const Ctx& c, cplx z) {
    guard_z(c, z);
    TensorOperator t = pair_sum(c, [&](int a) {
        return twisted_phi(z, c.omega[size_t(a)], c.wt[size_t(a)], c.tau);
    }, true);
    t.data += e1(z, c.tau) * Mat::Identity(t.data.rows(), t.data.cols());
    return t;
}

// m-coefficient (1/2)(E1^2(z) - wp(z)) 1(x)1 + sum_{alpha != 0} f_alpha.
inline TensorOperator m_coeff(const Ctx& c, cplx z) {
    guard_z(c, z);
    TensorOperator t = pair_sum(c, [&](int a) {
        return twisted_f(z, c.omega[size_t(a)], c.wt[size_t(a)], c.tau);
    }, true);
    const cplx s = 0.5 * (e1(z, c.tau) * e1(z, c.tau) - wp(z, c.tau));
    t.data += s * Mat::Identity(t.data.rows(), t.data.cols());
    return t;
}

// m(0): the scalar part tends to theta'''(0)/(3 theta'(0)) and
// f_alpha(0, omega_alpha) = -E2(omega_alpha).
inline TensorOperator m_coeff0(const Ctx& c) {
    TensorOperator t = pair_sum(c, [&](int a) {
        return -e2(c.omega[size_t(a)], c.tau);
    }, true);
    t.data += (theta_c(c.tau) / 3.0) * Mat::Identity(t.data.rows(), t.data.cols());
    return t;
}

// R^{hbar,(0)}: constant term of R at z = 0.
inline TensorOperator R0_coeff(const Ctx& c, cplx hbar) {
    return pair_sum(c, [&](int a) {
        guard_shift(c, hbar, a);
        return e1(hbar + c.omega[size_t(a)], c.tau) + 2.0 * pi * iu * c.wt[size_t(a)];
    }, false);
}

// r^{(0)}: constant term of the classical r-matrix at z = 0.
inline TensorOperator r0_coeff(const Ctx& c) {
    return pair_sum(c, [&](int a) {
        return e1(c.omega[size_t(a)], c.tau) + 2.0 * pi * iu * c.wt[size_t(a)];
    }, true);
}

// Analytic hbar-derivative of R: term-wise f(z, hbar + omega_alpha).
inline TensorOperator dR_dhbar(const Ctx& c, cplx hbar, cplx z) {
    guard_z(c, z);
    return pair_sum(c, [&](int a) {
        guard_shift(c, hbar, a);
        return twisted_f(z, hbar + c.omega[size_t(a)], c.wt[size_t(a)], c.tau);
    }, false);
}

// Analytic z-derivative of R.
inline TensorOperator dR_dz(const Ctx& c, cplx hbar, cplx z) {
    guard_z(c, z);
    return pair_sum(c, [&](int a) {
        guard_shift(c, hbar, a);
        const cplx u = hbar + c.omega[size_t(a)];
        const double t = c.wt[size_t(a)];
        return std::exp(2.0 * pi * iu * z * t) *
               (2.0 * pi * iu * t * kronecker(z, u, c.tau) + kronecker_dz(z, u, c.tau));
    }, false);
}

// Analytic tau-derivative of R at fixed z, hbar: the term-wise theta route,
// plus the motion of omega_alpha with tau.
inline TensorOperator dR_dtau(const Ctx& c, cplx hbar, cplx z) {
    guard_z(c, z);
    return pair_sum(c, [&](int a) {
        guard_shift(c, hbar, a);
        const cplx u = hbar + c.omega[size_t(a)];
        const double t = c.wt[size_t(a)];
        return std::exp(2.0 * pi * iu * z * t) *
               (kronecker_dtau_termwise(z, u, c.tau) + t * kronecker_du(z, u, c.tau));
    }, false);
}

// Mixed dz dhbar derivative of R.
inline TensorOperator d2R_dzdhbar(const Ctx& c, cplx hbar, cplx z) {
    guard_z(c, z);
    return pair_sum(c, [&](int a) {
        guard_shift(c, hbar, a);
        const cplx u = hbar + c.omega[size_t(a)];
        const double t = c.wt[size_t(a)];
        return std::exp(2.0 * pi * iu * z * t) *
               (2.0 * pi * iu * t * kronecker_du(z, u, c.tau) + kronecker_dzdu(z, u, c.tau));
    }, false);
}

// Analytic z-derivative of the m-coefficient.
inline TensorOperator dm_dz(const Ctx& c, cplx z) {
    guard_z(c, z);
    TensorOperator t = pair_sum(c, [&](int a) {
        const cplx u = c.omega[size_t(a)];
        const double w = c.wt[size_t(a)];
        return std::exp(2.0 * pi * iu * z * w) *
               (2.0 * pi * iu * w * kronecker_du(z, u, c.tau) + kronecker_dzdu(z, u, c.tau));
    }, true);
    const cplx s = -e1(z, c.tau) * e2(z, c.tau) - 0.5 * wp_prime(z, c.tau);
    t.data += s * Mat::Identity(t.data.rows(), t.data.cols());
    return t;
}

/// Embedding context: logical spaces carry an auxiliary slot and, for M > 1,
/// a matching noncommutative slot, so R_{ab,~a~b} acts on slots {a,b,3+a,3+b}
/// of the triple product.
struct Emb {
    const Ctx* c;
    int m;
    Mat ptilde; // permutation on C^M (x) C^M

    Emb(const Ctx& ctx, int m_) : c(&ctx), m(m_) {
        ptilde = (m > 1) ? permutation(m).data : Mat::Identity(1, 1);
    }

    std::vector<int> dims(int spaces) const {
        std::vector<int> d(size_t(spaces), c->n);
        if (m > 1)
            for (int i = 0; i < spaces; ++i) d.push_back(m);
        return d;
    }

    /// Lift a two-space auxiliary operator to the matrix extension by
    /// attaching P~ in the noncommutative slots.
    TensorOperator lift(const TensorOperator& aux) const {
        if (m == 1) return aux;
        return {{c->n, c->n, m, m}, kron(aux.data, ptilde)};
    }

    /// Embed a (possibly lifted) two-space operator at logical spaces (a,b)
    /// of a `spaces`-fold product.
    TensorOperator at(const TensorOperator& op, int a, int b, int spaces) const {
        const auto d = dims(spaces);
        if (m == 1 || op.dims.size() == 2) { // auxiliary-only operator
            return embed(op, {a, b}, d);
        }
        return embed(op, {a, b, spaces + a, spaces + b}, d);
    }

    /// Embed an operator on the noncommutative slots alone.
    TensorOperator nc_at(const Mat& op, int a, int b, int spaces) const {
        return embed(TensorOperator({m, m}, op), {spaces + a, spaces + b}, dims(spaces));
    }

    TensorOperator identity(int spaces) const { return TensorOperator::identity(dims(spaces)); }

    /// Swap logical spaces a and b (aux slot and, when present, nc slot).
    TensorOperator swap(const TensorOperator& op, int a, int b, int spaces) const {
        TensorOperator t = swap_spaces(op, a, b);
        if (m > 1) t = swap_spaces(t, spaces + a, spaces + b);
        return t;
    }
};

inline double rel_resid(const TensorOperator& lhs, const TensorOperator& rhs) {
    const double scale = std::max({max_abs(lhs.data), max_abs(rhs.data), 1.0});
    return max_abs(lhs.data - rhs.data) / scale;
}

/// Two-level Richardson extrapolation of an even series
/// E(h) = A + c2 h^2 + c4 h^4 + O(h^6); returns A + O(h^6).
template <typename F>
Mat richardson2(F&& f, double h) {
    const Mat v1 = f(h), v2 = f(h / 2), v3 = f(h / 4);
    const Mat r1 = (4.0 * v2 - v1) / 3.0;
    const Mat r2 = (4.0 * v3 - v2) / 3.0;
    return (16.0 * r2 - r1) / 15.0;
}

/// Margin-checked spectral-parameter draws; the identity loop retries a
/// sample a few times if a draw lands pole-adjacent.
struct Sampler {
    Rng rng;
    const Ctx& c;
    double margin;
    Sampler(std::uint64_t seed, const Ctx& ctx)
        : rng(seed), c(ctx), margin(0.02 * std::min(1.0, ctx.tau.tau.imag())) {}

    cplx z_point() { return rng.in_cell(c.tau); }

    cplx hbar_point() { return rng.in_cell(c.tau) / double(c.n); }

    bool diff_ok(cplx d) const { return lattice_distance(d, c.tau) > margin; }

    std::array<cplx, 3> z_triple() {
        for (int tries = 0; tries < 40; ++tries) {
            cplx z1 = z_point(), z2 = z_point(), z3 = z_point();
            if (diff_ok(z1 - z2) && diff_ok(z2 - z3) && diff_ok(z1 - z3))
                return {z1, z2, z3};
        }
        throw PoleProximity("sampler: could not draw a pole-safe z triple");
    }

    std::array<cplx, 2> hbar_pair() {
        for (int tries = 0; tries < 40; ++tries) {
            cplx h = hbar_point(), e = hbar_point();
            if (lattice_distance(double(c.n) * (h - e), c.tau) > margin) return {h, e};
        }
        throw PoleProximity("sampler: could not draw a pole-safe hbar/eta pair");
    }
};

} // namespace rdetail

// ---------------------------------------------------------------------------
// Public builders (spec surface). Each call assembles its own basis context;
// hot loops inside the verifier reuse one context.
// ---------------------------------------------------------------------------

/// Quantum R-matrix. For M = 1 an operator on C^N (x) C^N; for M > 1 the
/// matrix extension R (x) P~ on the ordered slots (aux1, aux2, nc1, nc2).
inline TensorOperator R(cplx hbar, cplx z, const RMatrixSpec& spec) {
    rdetail::Ctx c(spec.n, spec.tau);
    rdetail::Emb e(c, spec.m);
    return e.lift(rdetail::R_plain(c, hbar, z));
}

inline TensorOperator classical_r(cplx z, const RMatrixSpec& spec) {
    rdetail::Ctx c(spec.n, spec.tau);
    rdetail::Emb e(c, spec.m);
    return e.lift(rdetail::r_classical(c, z));
}

inline TensorOperator m_coeff(cplx z, const RMatrixSpec& spec) {
    rdetail::Ctx c(spec.n, spec.tau);
    rdetail::Emb e(c, spec.m);
    return e.lift(rdetail::m_coeff(c, z));
}

inline TensorOperator m_coeff_at_zero(const RMatrixSpec& spec) {
    rdetail::Ctx c(spec.n, spec.tau);
    rdetail::Emb e(c, spec.m);
    return e.lift(rdetail::m_coeff0(c));
}

inline TensorOperator R0(cplx hbar, const RMatrixSpec& spec) {
    rdetail::Ctx c(spec.n, spec.tau);
    rdetail::Emb e(c, spec.m);
    return e.lift(rdetail::R0_coeff(c, hbar));
}

inline TensorOperator r0(const RMatrixSpec& spec) {
    rdetail::Ctx c(spec.n, spec.tau);
    rdetail::Emb e(c, spec.m);
    return e.lift(rdetail::r0_coeff(c));
}

inline TensorOperator dR_dhbar(cplx hbar, cplx z, const RMatrixSpec& spec) {
    rdetail::Ctx c(spec.n, spec.tau);
    rdetail::Emb e(c, spec.m);
    return e.lift(rdetail::dR_dhbar(c, hbar, z));
}

// ---------------------------------------------------------------------------
// Identity catalogue
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& identity_catalogue() {
    static const std::vector<std::string> ids = {
        "qybe", "unitarity", "aybe", "skew", "cybe",
        "degen-931", "degen-932", "degen-933", "degen-26", "degen-32",
        "m-ident-934", "m-ident-935", "heat-r",
        "expansion-hbar", "expansion-z",
        "ext-qybe", "ext-unit", "ext-aybe", "ext-expansion", "failure-term"};
    return ids;
}

/// Identities built on the 1/hbar (x) identity classical limit exist for the
/// plain R-matrix only; their M > 1 analogues carry the P~ failure term and
/// are covered by ext-expansion / failure-term.
inline bool identity_defined_for(const std::string& id, int m) {
    static const std::vector<std::string> plain_only = {
        "cybe", "degen-931", "degen-932", "degen-933", "degen-26", "degen-32",
        "m-ident-934", "m-ident-935", "expansion-hbar"};
    if (m == 1) return true;
    for (const auto& p : plain_only)
        if (p == id) return false;
    return true;
}

inline IdentityReport verify_identity(const std::string& id, const RMatrixSpec& spec,
                                      int sample_count, double tol, std::uint64_t seed) {
    using namespace rdetail;
    bool known = false;
    for (const auto& k : identity_catalogue()) known = known || (k == id);
    if (!known) throw UnknownIdentity("unknown identity id '" + id + "'");
    if (!identity_defined_for(id, spec.m))
        throw UnknownIdentity("identity '" + id + "' is defined for M = 1 only");
    if (sample_count < 1) throw std::invalid_argument("verify_identity: sample_count must be >= 1");

    Ctx c(spec.n, spec.tau);
    Emb e(c, spec.m);
    Sampler s(seed, c);
    const int n = spec.n;

    auto lifted_R = [&](cplx h, cplx z) { return e.lift(R_plain(c, h, z)); };
    auto lifted_r = [&](cplx z) { return e.lift(r_classical(c, z)); };

    double worst = 0.0;
    for (int k = 0; k < sample_count; ++k) {
        double res = 0.0;
        int tries = 0;
        for (;;) {
            try {
                if (id == "qybe" || id == "ext-qybe") {
                    auto [z1, z2, z3] = s.z_triple();
                    const cplx h = s.hbar_point();
                    auto r12 = e.at(lifted_R(h, z1 - z2), 0, 1, 3);
                    auto r13 = e.at(lifted_R(h, z1 - z3), 0, 2, 3);
                    auto r23 = e.at(lifted_R(h, z2 - z3), 1, 2, 3);
                    res = rel_resid(r12 * r13 * r23, r23 * r13 * r12);
                } else if (id == "unitarity" || id == "ext-unit") {
                    const cplx z = s.z_point(), h = s.hbar_point();
                    auto a = e.lift(R_plain(c, h, z));
                    auto b = e.swap(e.lift(R_plain(c, h, -z)), 0, 1, 2);
                    const cplx scal =
                        double(n * n) * (wp(double(n) * h, c.tau) - wp(z, c.tau));
                    res = rel_resid(a * b, scal * e.identity(2));
                } else if (id == "aybe" || id == "ext-aybe") {
                    auto [z1, z2, z3] = s.z_triple();
                    auto [h, et] = s.hbar_pair();
                    auto lhs = e.at(lifted_R(h, z1 - z2), 0, 1, 3) *
                               e.at(lifted_R(et, z2 - z3), 1, 2, 3);
                    auto rhs = e.at(lifted_R(et, z1 - z3), 0, 2, 3) *
                                   e.at(lifted_R(h - et, z1 - z2), 0, 1, 3) +
                               e.at(lifted_R(et - h, z2 - z3), 1, 2, 3) *
                                   e.at(lifted_R(h, z1 - z3), 0, 2, 3);
                    res = rel_resid(lhs, rhs);
                } else if (id == "skew") {
                    const cplx z = s.z_point(), h = s.hbar_point();
                    auto a = e.lift(R_plain(c, h, z));
                    auto b = e.swap(e.lift(R_plain(c, -h, -z)), 0, 1, 2);
                    res = rel_resid(a, -b);
                    if (spec.m == 1) {
                        auto rr = r_classical(c, z);
                        res = std::max(res, rel_resid(rr, -swap_spaces(r_classical(c, -z), 0, 1)));
                        auto mm = rdetail::m_coeff(c, z);
                        res = std::max(res,
                                       rel_resid(mm, swap_spaces(rdetail::m_coeff(c, -z), 0, 1)));
                    }
                } else if (id == "cybe") {
                    auto [z1, z2, z3] = s.z_triple();
                    auto r12 = e.at(r_classical(c, z1 - z2), 0, 1, 3);
                    auto r13 = e.at(r_classical(c, z1 - z3), 0, 2, 3);
                    auto r23 = e.at(r_classical(c, z2 - z3), 1, 2, 3);
                    auto t1 = comm(r12, r13), t2 = comm(r12, r23), t3 = comm(r13, r23);
                    const double scale = std::max(
                        {max_abs(t1.data), max_abs(t2.data), max_abs(t3.data), 1.0});
                    res = max_abs((t1 + t2 + t3).data) / scale;
                } else if (id == "degen-931") {
                    auto [z1, z2, z3] = s.z_triple();
                    const cplx h = s.hbar_point();
                    auto lhs = e.at(R_plain(c, h, z1 - z2), 0, 1, 3) *
                               e.at(R_plain(c, h, z2 - z3), 1, 2, 3);
                    auto rhs = e.at(R_plain(c, h, z1 - z3), 0, 2, 3) *
                                   e.at(r_classical(c, z1 - z2), 0, 1, 3) +
                               e.at(r_classical(c, z2 - z3), 1, 2, 3) *
                                   e.at(R_plain(c, h, z1 - z3), 0, 2, 3) -
                               e.at(rdetail::dR_dhbar(c, h, z1 - z3), 0, 2, 3);
                    res = rel_resid(lhs, rhs);
                } else if (id == "degen-932") {
                    auto [z1, z2, z3] = s.z_triple();
                    const cplx h = s.hbar_point();
                    auto lhs = e.at(R_plain(c, h, z2 - z3), 1, 2, 3) *
                               e.at(R_plain(c, h, z1 - z2), 0, 1, 3);
                    auto rhs = e.at(R_plain(c, h, z1 - z3), 0, 2, 3) *
                                   e.at(r_classical(c, z2 - z3), 1, 2, 3) +
                               e.at(r_classical(c, z1 - z2), 0, 1, 3) *
                                   e.at(R_plain(c, h, z1 - z3), 0, 2, 3) -
                               e.at(rdetail::dR_dhbar(c, h, z1 - z3), 0, 2, 3);
                    res = rel_resid(lhs, rhs);
                } else if (id == "degen-933") {
                    auto [z1, z2, z3] = s.z_triple();
                    const cplx h = s.hbar_point();
                    auto r12 = e.at(R_plain(c, h, z1 - z2), 0, 1, 3);
                    auto r23 = e.at(R_plain(c, h, z2 - z3), 1, 2, 3);
                    auto r13 = e.at(R_plain(c, h, z1 - z3), 0, 2, 3);
                    auto lhs = comm(r12, r23);
                    auto rhs = comm(r13, e.at(r_classical(c, z1 - z2), 0, 1, 3)) -
                               comm(r13, e.at(r_classical(c, z2 - z3), 1, 2, 3));
                    res = rel_resid(lhs, rhs);
                } else if (id == "degen-26") {
                    const cplx z = s.z_point(), h = s.hbar_point();
                    auto R13 = e.at(R_plain(c, h, z), 0, 2, 3);
                    auto R12 = e.at(R_plain(c, h, z), 0, 1, 3);
                    auto lhs = comm(R13, e.at(r_classical(c, z), 0, 1, 3));
                    auto p23 = e.at(permutation(n), 1, 2, 3);
                    auto rhs = comm(R12, e.at(R0_coeff(c, h), 1, 2, 3)) +
                               comm(R13, e.at(r0_coeff(c), 1, 2, 3)) -
                               comm(e.at(rdetail::dR_dz(c, h, z), 0, 1, 3), double(n) * p23);
                    res = rel_resid(lhs, rhs);
                } else if (id == "degen-32") {
                    const cplx z = s.z_point();
                    auto m13 = e.at(rdetail::m_coeff(c, z), 0, 2, 3);
                    auto m12 = e.at(rdetail::m_coeff(c, z), 0, 1, 3);
                    auto r12 = e.at(r_classical(c, z), 0, 1, 3);
                    auto p23 = e.at(permutation(n), 1, 2, 3);
                    auto lhs = comm(m13, r12);
                    auto rhs = comm(r12, e.at(m_coeff0(c), 1, 2, 3)) -
                               comm(e.at(dm_dz(c, z), 0, 1, 3), double(n) * p23) +
                               comm(m12, e.at(r0_coeff(c), 1, 2, 3)) +
                               comm(m13, e.at(r0_coeff(c), 1, 2, 3));
                    res = rel_resid(lhs, rhs);
                } else if (id == "m-ident-934") {
                    auto [z1, z2, z3] = s.z_triple();
                    auto r12 = e.at(r_classical(c, z1 - z2), 0, 1, 3);
                    auto r23 = e.at(r_classical(c, z2 - z3), 1, 2, 3);
                    auto m12 = e.at(rdetail::m_coeff(c, z1 - z2), 0, 1, 3);
                    auto m13 = e.at(rdetail::m_coeff(c, z1 - z3), 0, 2, 3);
                    auto m23 = e.at(rdetail::m_coeff(c, z2 - z3), 1, 2, 3);
                    res = rel_resid(comm(r12, m13 + m23), comm(r23, m12 + m13));
                } else if (id == "m-ident-935") {
                    auto [z1, z2, z3] = s.z_triple();
                    auto r12 = e.at(r_classical(c, z1 - z2), 0, 1, 3);
                    auto r13 = e.at(r_classical(c, z1 - z3), 0, 2, 3);
                    auto m12 = e.at(rdetail::m_coeff(c, z1 - z2), 0, 1, 3);
                    auto m13 = e.at(rdetail::m_coeff(c, z1 - z3), 0, 2, 3);
                    auto m23 = e.at(rdetail::m_coeff(c, z2 - z3), 1, 2, 3);
                    auto t1 = comm(r12, m13 + m23), t2 = comm(r13, m12 + m23);
                    const double scale = std::max({max_abs(t1.data), max_abs(t2.data), 1.0});
                    res = max_abs((t1 + t2).data) / scale;
                } else if (id == "heat-r") {
                    const cplx z = s.z_point(), h = s.hbar_point();
                    auto lhs = 2.0 * pi * iu * e.lift(rdetail::dR_dtau(c, h, z));
                    auto rhs = e.lift(d2R_dzdhbar(c, h, z));
                    res = rel_resid(lhs, rhs);
                } else if (id == "expansion-hbar") {
                    const cplx z = s.z_point();
                    const double h = 1e-2;
                    auto even = [&](double hh) {
                        auto t = R_plain(c, hh, z) + R_plain(c, -hh, z);
                        return Mat(0.5 * t.data);
                    };
                    auto odd_m = [&](double hh) {
                        auto t = R_plain(c, hh, z) - R_plain(c, -hh, z);
                        Mat b = 0.5 * t.data -
                                (1.0 / hh) * Mat::Identity(t.data.rows(), t.data.cols());
                        return Mat(b / hh);
                    };
                    Mat r_extr = richardson2(even, h);
                    res = rel_resid({{n, n}, r_extr}, r_classical(c, z));
                    Mat m_extr = richardson2(odd_m, h);
                    res = std::max(res, rel_resid({{n, n}, m_extr}, rdetail::m_coeff(c, z)));
                } else if (id == "expansion-z") {
                    const cplx h = s.hbar_point();
                    const double z0 = 1e-2;
                    const Mat p = permutation(n).data;
                    auto even = [&](double zz) {
                        Mat g1 = R_plain(c, h, zz).data - (double(n) / zz) * p;
                        Mat g2 = R_plain(c, h, -zz).data + (double(n) / zz) * p;
                        return Mat(0.5 * (g1 + g2));
                    };
                    Mat r0_extr = richardson2(even, z0);
                    res = rel_resid({{n, n}, r0_extr}, R0_coeff(c, h));
                    auto even_r = [&](double zz) {
                        Mat g1 = r_classical(c, zz).data - (double(n) / zz) * p;
                        Mat g2 = r_classical(c, -zz).data + (double(n) / zz) * p;
                        return Mat(0.5 * (g1 + g2));
                    };
                    Mat rr0 = richardson2(even_r, z0);
                    res = std::max(res, rel_resid({{n, n}, rr0}, r0_coeff(c)));
                    // skew structure of the constant terms
                    res = std::max(res, rel_resid(r0_coeff(c),
                                                  -swap_spaces(r0_coeff(c), 0, 1)));
                    res = std::max(res, rel_resid(R0_coeff(c, h),
                                                  -swap_spaces(R0_coeff(c, -h), 0, 1)));
                } else if (id == "ext-expansion") {
                    const cplx z = s.z_point();
                    const double h = 1e-2;
                    auto even_h = [&](double hh) {
                        auto tp = e.lift(R_plain(c, hh, z));
                        auto tm = e.lift(R_plain(c, -hh, z));
                        return Mat(0.5 * (hh * tp.data - hh * tm.data));
                    };
                    Mat lead = richardson2(even_h, h);
                    const Mat want = (spec.m > 1)
                                         ? kron(Mat::Identity(n * n, n * n), e.ptilde)
                                         : Mat::Identity(n * n, n * n);
                    res = max_abs(lead - want) / std::max(max_abs(want), 1.0);
                    if (spec.m > 1) {
                        // negative control: the leading coefficient must stay
                        // far from the full identity
                        const double dist =
                            max_abs(lead - Mat::Identity(lead.rows(), lead.cols()));
                        if (dist < 0.1) res = std::max(res, 1.0);
                    }
                } else if (id == "failure-term") {
                    auto [z1, z2, z3] = s.z_triple();
                    const cplx h = s.hbar_point();
                    auto R12 = e.at(lifted_R(h, z1 - z2), 0, 1, 3);
                    auto R23 = e.at(lifted_R(h, z2 - z3), 1, 2, 3);
                    auto R13 = e.at(lifted_R(h, z1 - z3), 0, 2, 3);
                    auto rt12 = e.at(lifted_r(z1 - z2), 0, 1, 3);
                    auto rt23 = e.at(lifted_r(z2 - z3), 1, 2, 3);
                    auto dR13 = e.at(e.lift(rdetail::dR_dhbar(c, h, z1 - z3)), 0, 2, 3);
                    TensorOperator p12t = (spec.m > 1) ? e.nc_at(e.ptilde, 0, 1, 3)
                                                       : e.identity(3);
                    TensorOperator p23t = (spec.m > 1) ? e.nc_at(e.ptilde, 1, 2, 3)
                                                       : e.identity(3);
                    res = rel_resid(R12 * R23, R13 * rt12 + rt23 * R13 - dR13 * p12t);
                    res = std::max(res,
                                   rel_resid(R23 * R12, R13 * rt23 + rt12 * R13 - dR13 * p23t));
                    // contraction with a constrained state: S_0 proportional
                    // to the identity kills tr_{2,3}( dR13 [S_{2~1}, S_{3~1}] )
                    const int mm = spec.m;
                    std::vector<Mat> smodes(size_t(n * n));
                    for (auto& blk : smodes) {
                        blk = Mat::Zero(mm, mm);
                        for (int i = 0; i < mm; ++i)
                            for (int j = 0; j < mm; ++j)
                                blk(i, j) = cplx(s.rng.uniform(-1, 1), s.rng.uniform(-1, 1));
                    }
                    smodes[0] = 0.3 * Mat::Identity(mm, mm);
                    const auto d4 = std::vector<int>{n, n, n, mm};
                    Mat acc = Mat::Zero(n * mm, n * mm);
                    for (int a = 0; a < n * n; ++a)
                        acc += kron(c.basis.t[size_t(a)], smodes[size_t(a)]);
                    TensorOperator s2({n, mm}, acc);
                    auto s2e = embed(s2, {1, 3}, d4);
                    auto s3e = embed(s2, {2, 3}, d4);
                    auto dr = embed(TensorOperator({n, n}, rdetail::dR_dhbar(c, h, z1 - z3).data),
                                    {0, 2}, d4);
                    auto contr = partial_trace(dr * comm(s2e, s3e), {1, 2});
                    const double scale =
                        std::max(max_abs(dr.data) * max_abs(acc) * max_abs(acc), 1.0);
                    res = std::max(res, max_abs(contr.data) / scale);
                }
                break;
            } catch (const PoleProximity&) {
                if (++tries >= 10) throw;
            }
        }
        worst = std::max(worst, res);
    }
    return make_report(id, spec.n, spec.m, sample_count, worst, tol, seed);
}

} // namespace etop
