#pragma once

// Finite-dimensional algebra layer: the clock/shift basis T_alpha of
// Mat(N), its structure constants, the permutation operator, mode
// decompositions, and the order-two involution h.
//
// A subtlety runs through everything here: T_a built from an integer pair
// obeys T_{a + N e1} = (-1)^{a2} T_a and T_{a + N e2} = (-1)^{a1} T_a, so the
// product rule T_a T_b = kappa_{a,b} T_{a+b} holds with index sums taken over
// the integers, not after reduction mod N. Canonical representatives in
// {0,...,N-1}^2 label the stored basis; wherever a formula pairs T_alpha
// with T_{-alpha}, the dual element is built from the literal negated
// integers so that tr(T_alpha dual(alpha)) = N exactly.

#include <vector>

#include "etop/tensor.hpp"

namespace etop {

struct BasisSet {
    int n = 0;
    Mat q, lambda;
    std::vector<Mat> qpow, lpow; // 0..n-1 powers
    std::vector<Mat> t;          // canonical T_alpha, index a1*n + a2
    std::vector<Mat> t_dual;     // T at the literal negated index (-a1,-a2)

    const Mat& T(ModeIndex a) const {
        ModeIndex c = canonical(a, n);
        return t[size_t(c.a1 * n + c.a2)];
    }
    const Mat& dual(ModeIndex a) const {
        ModeIndex c = canonical(a, n);
        return t_dual[size_t(c.a1 * n + c.a2)];
    }
};

/// T built from an arbitrary integer index pair: the phase uses the integer
/// product, the matrix powers reduce mod N.
inline Mat t_int(const BasisSet& b, ModeIndex a) {
    auto m = [&](int x) { int r = x % b.n; return r < 0 ? r + b.n : r; };
    const cplx phase = std::exp(pi * iu * double(a.a1) * double(a.a2) / double(b.n));
    return phase * b.qpow[size_t(m(a.a1))] * b.lpow[size_t(m(a.a2))];
}

inline BasisSet build_basis(int n) {
    if (n < 1) throw std::invalid_argument("build_basis: N must be >= 1");
    BasisSet b;
    b.n = n;
    b.q = Mat::Zero(n, n);
    b.lambda = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        b.q(k, k) = std::exp(2.0 * pi * iu * double(k + 1) / double(n));
        b.lambda(k, (k + 1) % n) = 1.0;
    }
    b.qpow.assign(size_t(n), Mat::Identity(n, n));
    b.lpow.assign(size_t(n), Mat::Identity(n, n));
    for (int k = 1; k < n; ++k) {
        b.qpow[size_t(k)] = b.qpow[size_t(k - 1)] * b.q;
        b.lpow[size_t(k)] = b.lpow[size_t(k - 1)] * b.lambda;
    }
    b.t.reserve(size_t(n * n));
    b.t_dual.reserve(size_t(n * n));
    for (int a1 = 0; a1 < n; ++a1)
        for (int a2 = 0; a2 < n; ++a2) {
            b.t.push_back(t_int(b, {a1, a2}));
            b.t_dual.push_back(t_int(b, {-a1, -a2}));
        }
    return b;
}

/// kappa_{alpha,beta} = exp(pi i (b1 a2 - b2 a1)/N), evaluated on the given
/// integer components.
inline cplx kappa(ModeIndex alpha, ModeIndex beta, int n) {
    return std::exp(pi * iu * double(beta.a1 * alpha.a2 - beta.a2 * alpha.a1) / double(n));
}

/// C_{alpha,beta} = kappa_{alpha,beta} - kappa_{beta,alpha}.
inline cplx structure_c(ModeIndex alpha, ModeIndex beta, int n) {
    return kappa(alpha, beta, n) - kappa(beta, alpha, n);
}

/// Permutation operator P12 = (1/N) sum_alpha T_alpha (x) T_{-alpha} on
/// C^N (x) C^N; equals sum_ij E_ij (x) E_ji.
inline TensorOperator permutation(int n) {
    BasisSet b = build_basis(n);
    Mat p = Mat::Zero(n * n, n * n);
    for (size_t a = 0; a < b.t.size(); ++a) p += kron(b.t[a], b.t_dual[a]);
    return {{n, n}, p / double(n)};
}

/// Mode coefficients of S in the T basis: S_alpha = tr(S T_{-alpha})/N with
/// the literal-dual pairing, so compose(decompose(S)) = S identically.
inline std::vector<cplx> decompose(const Mat& s, const BasisSet& b) {
    std::vector<cplx> c(size_t(b.n * b.n));
    for (size_t a = 0; a < c.size(); ++a) c[a] = (s * b.t_dual[a]).trace() / double(b.n);
    return c;
}

inline Mat compose(const std::vector<cplx>& coeffs, const BasisSet& b) {
    Mat s = Mat::Zero(b.n, b.n);
    for (size_t a = 0; a < coeffs.size(); ++a) s += coeffs[a] * b.t[a];
    return s;
}

/// Mode coefficients in the auxiliary factor of Mat(N) (x) Mat(M): the
/// result is a list of M x M blocks indexed by alpha.
inline std::vector<Mat> decompose_aux(const Mat& x, const BasisSet& b, int m) {
    const int n = b.n;
    std::vector<Mat> out(size_t(n * n), Mat::Zero(m, m));
    for (int a = 0; a < n * n; ++a) {
        const Mat& td = b.t_dual[size_t(a)];
        Mat blk = Mat::Zero(m, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (td(j, i) != 0.0)
                    blk += td(j, i) * x.block(i * m, j * m, m, m);
        out[size_t(a)] = blk / double(n);
    }
    return out;
}

inline Mat compose_aux(const std::vector<Mat>& coeffs, const BasisSet& b, int m) {
    Mat x = Mat::Zero(b.n * m, b.n * m);
    for (size_t a = 0; a < coeffs.size(); ++a) x += kron(b.t[a], coeffs[a]);
    return x;
}

/// Sign relating the literal-negation dual to the canonically indexed
/// element: t_dual[a] = dual_sign(b, a) * T(canonical(-a)). The sign is +1
/// for N = 2 and whenever a component of alpha vanishes; it alternates for
/// interior modes at N >= 3.
inline double dual_sign(const BasisSet& b, int a) {
    const ModeIndex nc = canonical({-(a / b.n), -(a % b.n)}, b.n);
    const Mat& x = b.t_dual[size_t(a)];
    const Mat& y = b.t[size_t(nc.a1 * b.n + nc.a2)];
    for (int i = 0; i < b.n; ++i)
        for (int j = 0; j < b.n; ++j)
            if (std::abs(y(i, j)) > 0.5) return ((x(i, j) / y(i, j)).real() > 0.0) ? 1.0 : -1.0;
    return 1.0;
}

/// Involution matrix h = J Lambda^{-1} with J the anti-diagonal; conjugation
/// by h sends T_alpha to T at the literal negated index.
inline Mat involution_h(int n) {
    BasisSet b = build_basis(n);
    Mat j = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) j(i, n - 1 - i) = 1.0;
    return j * b.lpow[size_t((n - 1) % n)];
}

inline Mat apply_involution(const Mat& x, const Mat& h) {
    return h * x * h.inverse();
}

} // namespace etop
