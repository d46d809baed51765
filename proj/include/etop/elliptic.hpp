#pragma once

// Elliptic kernel: odd theta function with analytic z- and tau-derivatives,
// Eisenstein/Weierstrass functions, the Kronecker function phi(z,u) and its
// derivatives, and the twisted sections phi_alpha / f_alpha indexed by
// Z_N x Z_N lattice fractions.
//
// All evaluations reduce arguments into the fundamental cell of Z + tau*Z
// and reapply the exact quasi-periodicity factor, so the series always runs
// in its fast-convergence region. Derivatives are analytic throughout;
// finite differences appear only in test oracles.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "etop/errors.hpp"

namespace etop {

using cplx = std::complex<double>;

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline const cplx iu{0.0, 1.0};

/// Distance below which theta-quotient arguments are rejected as
/// pole-adjacent, measured after lattice reduction.
inline constexpr double pole_guard = 1e-6;

/// Elliptic modulus tau with Im(tau) > 0 enforced at construction.
struct Modulus {
    cplx tau;
    explicit Modulus(cplx t) : tau(t) {
        if (!(t.imag() > 0.0))
            throw std::invalid_argument("Modulus: Im(tau) must be strictly positive");
    }
};

/// Mode index in Z_N x Z_N. Stored components may be any integers; helpers
/// below canonicalize into {0,...,N-1}^2. Sums and negations that occur in
/// structure-constant identities are tracked over the integers, because the
/// basis matrices T_a pick up a sign under a -> a + N*e_i.
struct ModeIndex {
    int a1 = 0;
    int a2 = 0;
    friend bool operator==(const ModeIndex&, const ModeIndex&) = default;
};

inline ModeIndex canonical(ModeIndex a, int n) {
    auto m = [n](int x) { int r = x % n; return r < 0 ? r + n : r; };
    return {m(a.a1), m(a.a2)};
}
inline ModeIndex neg(ModeIndex a) { return {-a.a1, -a.a2}; }
inline ModeIndex add(ModeIndex a, ModeIndex b) { return {a.a1 + b.a1, a.a2 + b.a2}; }
inline bool is_zero_mode(ModeIndex a, int n) {
    ModeIndex c = canonical(a, n);
    return c.a1 == 0 && c.a2 == 0;
}

/// Lattice fraction omega_alpha = (a1 + a2*tau)/N together with its exact
/// tau-derivative a2/N.
struct LatticeFraction {
    ModeIndex alpha;
    int n;
    cplx omega;
    double dtau;
};

inline LatticeFraction lattice_fraction(ModeIndex alpha, int n, const Modulus& tau) {
    ModeIndex c = canonical(alpha, n);
    return {c, n, (cplx(c.a1) + cplx(c.a2) * tau.tau) / double(n), double(c.a2) / double(n)};
}

namespace detail {

struct Reduced {
    cplx z;    // representative with lattice coordinates in [-1/2, 1/2)
    long m;    // z = zr + m + n*tau
    long n;
};

inline Reduced reduce_lattice(cplx z, cplx tau) {
    double v = z.imag() / tau.imag();
    long n = std::lround(std::floor(v + 0.5));
    cplx w = z - double(n) * tau;
    long m = std::lround(std::floor(w.real() + 0.5));
    return {w - double(m), m, n};
}

inline int binom(int n, int k) {
    static const int table[6][6] = {
        {1, 0, 0, 0, 0, 0}, {1, 1, 0, 0, 0, 0}, {1, 2, 1, 0, 0, 0},
        {1, 3, 3, 1, 0, 0}, {1, 4, 6, 4, 1, 0}, {1, 5, 10, 10, 5, 1}};
    return table[n][k];
}

// Truncated series for the odd theta function at an already-reduced
// argument. Terms are summed in +/- pairs over half-integers r = k + 1/2:
//   term(s) = exp(pi*i*tau*s^2 + 2*pi*i*(z+1/2)*s) * (2*pi*i*s)^dz * (pi*i*s^2)^dt.
// The loop stops once a pair falls below 1e-18 of the largest pair seen,
// with a floor of 20 pairs.
inline cplx theta_series_raw(cplx z, cplx tau, int dz, int dt) {
    cplx sum = 0.0;
    double max_mag = 0.0;
    const double sign = (dz % 2 == 0) ? 1.0 : -1.0;
    for (int k = 0; k < 4000; ++k) {
        const double r = k + 0.5;
        const cplx q = std::exp(pi * iu * tau * (r * r));
        const cplx w = std::exp(2.0 * pi * iu * (z + 0.5) * r);
        cplx fac = 1.0;
        for (int j = 0; j < dz; ++j) fac *= 2.0 * pi * iu * r;
        for (int j = 0; j < dt; ++j) fac *= pi * iu * (r * r);
        const cplx pair = q * fac * (w + sign / w);
        sum += pair;
        const double mag = std::abs(q) * std::abs(fac) * (std::abs(w) + 1.0 / std::abs(w));
        max_mag = std::max(max_mag, mag);
        if (k >= 20 && mag < 1e-18 * max_mag) return sum;
    }
    throw std::runtime_error("theta_series: truncation limit reached (Im tau too small?)");
}

// Near the zero at z = 0 the raw series loses relative accuracy (the sum is
// small while its terms are O(1)), so Taylor-expand around the origin
// instead. Parity makes every other coefficient vanish exactly.
inline cplx theta_series(cplx z, cplx tau, int dz, int dt) {
    if (std::abs(z) > 0.25) return theta_series_raw(z, tau, dz, dt);
    cplx sum = 0.0;
    double max_mag = 0.0;
    cplx zpow = 1.0;
    double fact = 1.0;
    for (int j = 0; j < 48; ++j) {
        if ((dz + j) % 2 == 1) { // even-order z-derivatives of theta vanish at 0
            const cplx coeff = theta_series_raw(0.0, tau, dz + j, dt);
            const cplx term = coeff * zpow / fact;
            sum += term;
            const double mag = std::abs(term);
            max_mag = std::max(max_mag, mag);
            if (j > 2 && mag < 1e-18 * std::max(max_mag, 1e-300)) return sum;
        }
        zpow *= z;
        fact *= double(j + 1);
    }
    return sum;
}

} // namespace detail

/// Distance from z to the nearest point of Z + tau*Z.
inline double lattice_distance(cplx z, const Modulus& tau) {
    auto red = detail::reduce_lattice(z, tau.tau);
    double d = std::abs(red.z);
    for (int p = -1; p <= 1; ++p)
        for (int q = -1; q <= 1; ++q)
            d = std::min(d, std::abs(red.z - double(p) - double(q) * tau.tau));
    return d;
}

/// Odd theta function and its derivatives: dz_order z-derivatives (<= 4) and
/// dtau_order tau-derivatives (0 or 1), evaluated with exact lattice
/// reduction. theta is entire, so no pole guard applies here.
inline cplx theta(cplx z, const Modulus& tau, int dz_order = 0, int dtau_order = 0) {
    if (dz_order < 0 || dz_order > 4)
        throw std::invalid_argument("theta: dz_order must be in [0,4]");
    if (dtau_order < 0 || dtau_order > 1)
        throw std::invalid_argument("theta: dtau_order must be 0 or 1");

    const auto red = detail::reduce_lattice(z, tau.tau);
    if (red.m == 0 && red.n == 0)
        return detail::theta_series(z, tau.tau, dz_order, dtau_order);

    // theta(zr + m + n*tau) = s * exp(-pi*i*tau*n^2 - 2*pi*i*n*zr) * theta(zr),
    // s = (-1)^(m+n). Derivatives follow by the product and chain rules; the
    // tau-derivative picks up the motion of the representative zr = z - m - n*tau.
    const double nn = double(red.n);
    const double s = ((red.m + red.n) % 2 == 0) ? 1.0 : -1.0;
    const cplx a = -2.0 * pi * iu * nn;
    const cplx c0 = s * std::exp(-pi * iu * tau.tau * (nn * nn) + a * red.z);

    cplx th[6];
    for (int l = 0; l <= dz_order + 1; ++l)
        th[l] = detail::theta_series(red.z, tau.tau, l, 0);

    cplx b = 0.0;
    {
        cplx apow = 1.0;
        for (int l = dz_order; l >= 0; --l) {
            b += double(detail::binom(dz_order, l)) * apow * th[l];
            apow *= a;
        }
    }
    if (dtau_order == 0) return c0 * b;

    cplx corr = pi * iu * (nn * nn) * b;
    cplx apow = 1.0;
    for (int l = dz_order; l >= 0; --l) {
        const cplx th_tau_l = detail::theta_series(red.z, tau.tau, l, 1);
        corr += double(detail::binom(dz_order, l)) * apow * (th_tau_l - nn * th[l + 1]);
        apow *= a;
    }
    return c0 * corr;
}

namespace detail {

inline void guard(cplx z, const Modulus& tau, const char* what) {
    if (lattice_distance(z, tau) < pole_guard)
        throw PoleProximity(std::string("argument '") + what + "' within pole guard of the lattice");
}

} // namespace detail

/// First Eisenstein function E1(z) = theta'(z)/theta(z).
inline cplx e1(cplx z, const Modulus& tau) {
    detail::guard(z, tau, "z");
    return theta(z, tau, 1) / theta(z, tau);
}

/// Second Eisenstein function E2(z) = -d/dz E1(z) = (theta'/theta)^2 - theta''/theta.
inline cplx e2(cplx z, const Modulus& tau) {
    detail::guard(z, tau, "z");
    const cplx t0 = theta(z, tau), t1 = theta(z, tau, 1), t2 = theta(z, tau, 2);
    const cplx l = t1 / t0;
    return l * l - t2 / t0;
}

/// theta'''(0)/theta'(0), the constant relating E2 and the Weierstrass
/// p-function.
inline cplx theta_c(const Modulus& tau) {
    return theta(0.0, tau, 3) / theta(0.0, tau, 1);
}

/// Weierstrass p-function, wp(z) = E2(z) + theta'''(0)/(3 theta'(0)).
inline cplx wp(cplx z, const Modulus& tau) {
    return e2(z, tau) + theta_c(tau) / 3.0;
}

/// wp'(z) = E2'(z) = -theta'''/theta + 3 theta'' theta'/theta^2 - 2 (theta'/theta)^3.
inline cplx wp_prime(cplx z, const Modulus& tau) {
    detail::guard(z, tau, "z");
    const cplx t0 = theta(z, tau), t1 = theta(z, tau, 1), t2 = theta(z, tau, 2),
               t3 = theta(z, tau, 3);
    const cplx l = t1 / t0;
    return -t3 / t0 + 3.0 * t2 * t1 / (t0 * t0) - 2.0 * l * l * l;
}

/// Kronecker function phi(z,u) = theta'(0) theta(z+u) / (theta(z) theta(u)).
/// Symmetric in its arguments.
inline cplx kronecker(cplx z, cplx u, const Modulus& tau) {
    detail::guard(z, tau, "z");
    detail::guard(u, tau, "u");
    detail::guard(z + u, tau, "z+u");
    return theta(0.0, tau, 1) * theta(z + u, tau) / (theta(z, tau) * theta(u, tau));
}

/// f(z,u) = d/du phi(z,u) = phi(z,u) (E1(z+u) - E1(u)).
inline cplx kronecker_du(cplx z, cplx u, const Modulus& tau) {
    return kronecker(z, u, tau) * (e1(z + u, tau) - e1(u, tau));
}

/// d/dz phi(z,u) = phi(z,u) (E1(z+u) - E1(z)).
inline cplx kronecker_dz(cplx z, cplx u, const Modulus& tau) {
    return kronecker(z, u, tau) * (e1(z + u, tau) - e1(z, tau));
}

/// Mixed derivative d^2/(dz du) phi, in closed form.
inline cplx kronecker_dzdu(cplx z, cplx u, const Modulus& tau) {
    const cplx p = kronecker(z, u, tau);
    const cplx ezu = e1(z + u, tau);
    return p * ((ezu - e1(z, tau)) * (ezu - e1(u, tau)) - e2(z + u, tau));
}

/// d/dtau phi(z,u) via the heat equation, dtau phi = (1/2 pi i) dz du phi.
inline cplx kronecker_dtau(cplx z, cplx u, const Modulus& tau) {
    return kronecker_dzdu(z, u, tau) / (2.0 * pi * iu);
}

/// d/dtau phi(z,u) by term-wise tau-differentiation of all four theta
/// factors. Independent route from kronecker_dtau; the two must agree to
/// the heat-equation residual.
inline cplx kronecker_dtau_termwise(cplx z, cplx u, const Modulus& tau) {
    const cplx p = kronecker(z, u, tau);
    const cplx r = theta(0.0, tau, 1, 1) / theta(0.0, tau, 1)
                 + theta(z + u, tau, 0, 1) / theta(z + u, tau)
                 - theta(z, tau, 0, 1) / theta(z, tau)
                 - theta(u, tau, 0, 1) / theta(u, tau);
    return p * r;
}

/// Twisted Kronecker section exp(2 pi i z t) phi(z,u) with an explicit
/// exponential weight t. The weight is the tau-derivative of the lattice
/// fraction carried by the section; passing it explicitly keeps identities
/// with literal (non-canonical) index representatives expressible.
inline cplx twisted_phi(cplx z, cplx u, double t, const Modulus& tau) {
    return std::exp(2.0 * pi * iu * z * t) * kronecker(z, u, tau);
}

inline cplx twisted_f(cplx z, cplx u, double t, const Modulus& tau) {
    return std::exp(2.0 * pi * iu * z * t) * kronecker_du(z, u, tau);
}

/// phi_alpha^hbar(z) = exp(2 pi i z a2/N) phi(z, hbar + omega_alpha), with
/// alpha canonicalized into {0,...,N-1}^2. With hbar = 0 and alpha != 0 this
/// is the section phi_alpha(z, omega_alpha).
inline cplx phi_alpha(cplx hbar, cplx z, ModeIndex alpha, int n, const Modulus& tau) {
    const auto om = lattice_fraction(alpha, n, tau);
    if (om.alpha.a1 == 0 && om.alpha.a2 == 0 && lattice_distance(hbar, tau) < pole_guard)
        throw ZeroArgument("phi_alpha: alpha = 0 requires hbar away from the lattice");
    return twisted_phi(z, hbar + om.omega, om.dtau, tau);
}

/// f_alpha(z, omega_alpha) = exp(2 pi i z a2/N) f(z, omega_alpha).
inline cplx f_alpha(cplx z, ModeIndex alpha, int n, const Modulus& tau) {
    const auto om = lattice_fraction(alpha, n, tau);
    if (om.alpha.a1 == 0 && om.alpha.a2 == 0)
        throw ZeroArgument("f_alpha: alpha = 0 is a zero lattice fraction");
    return twisted_f(z, om.omega, om.dtau, tau);
}

} // namespace etop
