#pragma once

// Model layer: states, inertia tensors, equation right-hand sides, Lax
// pairs, trace-form constructions and constraint machinery for the five
// model families (scalar top, relativistic top, matrix tops, gyrostat /
// PVI, special Gaudin).

#include <array>
#include <optional>
#include <variant>
#include <vector>

#include "etop/rmatrix.hpp"

namespace etop {

// ---------------------------------------------------------------------------
// Inertia components
// ---------------------------------------------------------------------------

/// J_alpha = -E2(omega_alpha), alpha != 0.
inline cplx inertia(ModeIndex alpha, int n, const Modulus& tau) {
    if (is_zero_mode(alpha, n)) throw ZeroArgument("inertia: alpha must be nonzero");
    return -e2(lattice_fraction(alpha, n, tau).omega, tau);
}

/// J^eta_alpha = E1(eta + omega_alpha) - E1(omega_alpha), alpha != 0.
inline cplx inertia_eta(ModeIndex alpha, cplx eta, int n, const Modulus& tau) {
    if (is_zero_mode(alpha, n)) throw ZeroArgument("inertia_eta: alpha must be nonzero");
    const cplx om = lattice_fraction(alpha, n, tau).omega;
    return e1(eta + om, tau) - e1(om, tau);
}

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

struct TopState {
    int n;
    Modulus tau;
    std::vector<cplx> coords; // n*n mode values, index a1*n + a2
    bool traceless = true;
    bool z2_reduced = false;
};

struct RelTopState {
    int n;
    Modulus tau;
    cplx eta;
    std::vector<cplx> coords;
    bool z2_reduced = false;
};

struct MatrixTopState {
    int n;
    int m;
    Modulus tau;
    std::optional<cplx> eta; // engaged -> relativistic
    std::vector<Mat> coords; // n*n blocks of size m x m
    bool z2_reduced = false;
};

/// N = 2 gyrostat in Pauli components, optionally matrix-extended. The
/// half-periods are fixed: omega_1 = tau/2, omega_2 = (1+tau)/2,
/// omega_3 = 1/2, i.e. Pauli label a corresponds to the modes (0,1), (1,1)
/// and (1,0).
struct GyrostatState {
    int m = 1;
    Modulus tau;
    std::array<cplx, 4> nu{};
    std::vector<Mat> s; // 3 blocks, s[a-1] is the coefficient of sigma_a
};

struct GaudinState {
    int n;
    Modulus tau;
    cplx s0 = 0.0;
    std::vector<Mat> a; // n*n blocks of size n x n; block 0 is ignored (A^0 = s0 * Id)
    bool z2_reduced = true;
};

struct PviScalarState {
    Modulus tau;
    cplx u;
    cplx udot;
    std::array<cplx, 4> nu{};
};

using ModelState =
    std::variant<TopState, RelTopState, MatrixTopState, GyrostatState, GaudinState, PviScalarState>;

namespace tdetail {

inline const std::array<ModeIndex, 3>& pauli_modes() {
    static const std::array<ModeIndex, 3> m = {ModeIndex{0, 1}, ModeIndex{1, 1}, ModeIndex{1, 0}};
    return m;
}

/// Degenerate relativistic parameters are rejected up front: eta + omega_alpha
/// must stay off the lattice for every mode.
inline void check_eta(cplx eta, int n, const Modulus& tau) {
    for (int a1 = 0; a1 < n; ++a1)
        for (int a2 = 0; a2 < n; ++a2) {
            const cplx om = lattice_fraction({a1, a2}, n, tau).omega;
            if (lattice_distance(eta + om, tau) < pole_guard)
                throw PoleProximity("eta + omega_alpha lands on the lattice at mode " +
                                    std::to_string(a1) + "," + std::to_string(a2));
        }
}

struct Coeffs {
    int n;
    Modulus tau;
    BasisSet basis;
    std::vector<cplx> omega;
    std::vector<double> wt;
    std::vector<cplx> j; // inertia components, j[0] = 0

    Coeffs(int n_, const Modulus& tau_, std::optional<cplx> eta) : n(n_), tau(tau_), basis(build_basis(n_)) {
        omega.resize(size_t(n * n));
        wt.resize(size_t(n * n));
        j.assign(size_t(n * n), 0.0);
        if (eta) check_eta(*eta, n, tau);
        for (int a = 0; a < n * n; ++a) {
            const auto om = lattice_fraction({a / n, a % n}, n, tau);
            omega[size_t(a)] = om.omega;
            wt[size_t(a)] = om.dtau;
            if (a != 0)
                j[size_t(a)] = eta ? (e1(*eta + om.omega, tau) - e1(om.omega, tau))
                                   : -e2(om.omega, tau);
        }
    }
};

inline int neg_index(int a, int n) {
    const int a1 = a / n, a2 = a % n;
    return ((n - a1) % n) * n + (n - a2) % n;
}

/// One-slot coefficient cache: autonomous flows call the right-hand sides
/// many times at a fixed (n, tau, eta), and rebuilding the basis and the
/// inertia components from theta series dominates otherwise.
inline const Coeffs& coeffs_for(int n, const Modulus& tau, std::optional<cplx> eta) {
    thread_local std::optional<Coeffs> cache;
    thread_local int c_n = -1;
    thread_local cplx c_tau;
    thread_local std::optional<cplx> c_eta;
    if (!cache || c_n != n || c_tau != tau.tau || c_eta != eta) {
        cache.emplace(n, tau, eta);
        c_n = n;
        c_tau = tau.tau;
        c_eta = eta;
    }
    return *cache;
}

} // namespace tdetail

// ---------------------------------------------------------------------------
// Right-hand sides (velocities share the state layout; their mode 0 is zero
// identically for every model)
// ---------------------------------------------------------------------------

namespace tdetail {

/// Commutator route shared by the scalar and matrix tops: compose the state
/// and J(S) in the auxiliary basis, commute, read the modes back.
inline std::vector<Mat> rhs_blocks(const Coeffs& c, const std::vector<Mat>& blocks, int m) {
    Mat s = Mat::Zero(c.n * m, c.n * m), js = s;
    for (int a = 0; a < c.n * c.n; ++a) {
        s += kron(c.basis.t[size_t(a)], blocks[size_t(a)]);
        if (a != 0) js += c.j[size_t(a)] * kron(c.basis.t[size_t(a)], blocks[size_t(a)]);
    }
    Mat v = s * js - js * s;
    auto out = decompose_aux(v, c.basis, m);
    out[0] = Mat::Zero(m, m); // S_0 is conserved for every model in this family
    return out;
}

} // namespace tdetail

inline TopState rhs_nonrel(const TopState& state) {
    const tdetail::Coeffs& c = tdetail::coeffs_for(state.n, state.tau, std::nullopt);
    std::vector<Mat> blocks(state.coords.size());
    for (size_t a = 0; a < blocks.size(); ++a)
        blocks[a] = state.coords[a] * Mat::Identity(1, 1);
    auto vb = tdetail::rhs_blocks(c, blocks, 1);
    TopState v = state;
    for (size_t a = 0; a < vb.size(); ++a) v.coords[a] = vb[a](0, 0);
    v.coords[0] = 0.0;
    return v;
}

inline RelTopState rhs_rel(const RelTopState& state) {
    const tdetail::Coeffs& c = tdetail::coeffs_for(state.n, state.tau, state.eta);
    std::vector<Mat> blocks(state.coords.size());
    for (size_t a = 0; a < blocks.size(); ++a)
        blocks[a] = state.coords[a] * Mat::Identity(1, 1);
    auto vb = tdetail::rhs_blocks(c, blocks, 1);
    RelTopState v = state;
    for (size_t a = 0; a < vb.size(); ++a) v.coords[a] = vb[a](0, 0);
    v.coords[0] = 0.0; // dS_0/dt = 0 exactly
    return v;
}

/// Zero-mode residual of the matrix top: sum_beta [S_beta, S_{-beta}] wp'(omega_beta).
/// Vanishes on the Z2-reduced surface.
inline Mat matrix_zero_mode(const MatrixTopState& state) {
    Mat acc = Mat::Zero(state.m, state.m);
    for (int a = 1; a < state.n * state.n; ++a) {
        const int na = tdetail::neg_index(a, state.n);
        const cplx wpp =
            wp_prime(lattice_fraction({a / state.n, a % state.n}, state.n, state.tau).omega,
                     state.tau);
        acc += comm(state.coords[size_t(a)], state.coords[size_t(na)]) * wpp;
    }
    return acc;
}

inline MatrixTopState rhs_matrix(const MatrixTopState& state, double constraint_tol = 1e-9) {
    if (state.z2_reduced) {
        const double defect = max_abs(matrix_zero_mode(state));
        const double scale = [&] {
            double s = 1.0;
            for (const Mat& b : state.coords) s = std::max(s, max_abs(b));
            return s;
        }();
        if (defect > constraint_tol * scale * scale)
            throw ConstraintViolation("matrix top zero-mode residual " + std::to_string(defect) +
                                      " on a state flagged z2_reduced");
    }
    const tdetail::Coeffs& c = tdetail::coeffs_for(state.n, state.tau, state.eta);
    MatrixTopState v = state;
    v.coords = tdetail::rhs_blocks(c, state.coords, state.m);
    return v;
}

/// nu-tilde: the half-sum combinations of the four constants.
inline std::array<cplx, 4> nu_tilde(const std::array<cplx, 4>& nu) {
    return {0.5 * (nu[0] + nu[1] + nu[2] + nu[3]), 0.5 * (nu[0] + nu[1] - nu[2] - nu[3]),
            0.5 * (nu[0] - nu[1] + nu[2] - nu[3]), 0.5 * (nu[0] - nu[1] - nu[2] + nu[3])};
}

/// c_a(tau) = -exp(-2 pi i omega_a dtau(omega_a)) (theta'(0)/theta(omega_a))^2
/// for the three half-period modes.
inline std::array<cplx, 3> gyro_c(const Modulus& tau) {
    std::array<cplx, 3> out;
    const cplx t0 = theta(0.0, tau, 1);
    for (int a = 0; a < 3; ++a) {
        const auto om = lattice_fraction(tdetail::pauli_modes()[size_t(a)], 2, tau);
        const cplx q = t0 / theta(om.omega, tau);
        out[size_t(a)] = -std::exp(-2.0 * pi * iu * om.omega * om.dtau) * q * q;
    }
    return out;
}

/// The same constants from the section product phi_a(z, omega_a)
/// phi_a(z - omega_a, omega_a); z-independent, used as a cross-check.
inline std::array<cplx, 3> gyro_c_phi_form(const Modulus& tau, cplx z) {
    std::array<cplx, 3> out;
    for (int a = 0; a < 3; ++a) {
        const auto om = lattice_fraction(tdetail::pauli_modes()[size_t(a)], 2, tau);
        out[size_t(a)] = twisted_phi(z, om.omega, om.dtau, tau) *
                         twisted_phi(z - om.omega, om.omega, om.dtau, tau);
    }
    return out;
}

/// nu'_a = c_a(tau) nu~_a for a = 1..3.
inline std::array<cplx, 3> nu_prime(const std::array<cplx, 4>& nu, const Modulus& tau) {
    const auto nt = nu_tilde(nu);
    const auto ca = gyro_c(tau);
    return {ca[0] * nt[1], ca[1] * nt[2], ca[2] * nt[3]};
}

/// Gyrostat equations: dS_a = (1/2)(S_b S_c + S_c S_b)(E2(omega_b) - E2(omega_c))
///                            + S_b nu'_c - S_c nu'_b, (a,b,c) cyclic.
inline GyrostatState rhs_gyrostat(const GyrostatState& state) {
    const auto np = nu_prime(state.nu, state.tau);
    std::array<cplx, 3> e2w;
    for (int a = 0; a < 3; ++a)
        e2w[size_t(a)] =
            e2(lattice_fraction(tdetail::pauli_modes()[size_t(a)], 2, state.tau).omega, state.tau);
    GyrostatState v = state;
    for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3, cc = (a + 2) % 3;
        const Mat& sb = state.s[size_t(b)];
        const Mat& sc = state.s[size_t(cc)];
        v.s[size_t(a)] = 0.5 * (sb * sc + sc * sb) * (e2w[size_t(b)] - e2w[size_t(cc)]) +
                         sb * np[size_t(cc)] - sc * np[size_t(b)];
    }
    return v;
}

inline GaudinState rhs_gaudin(const GaudinState& state) {
    const int n = state.n;
    GaudinState v = state;
    std::vector<cplx> j(size_t(n * n), 0.0);
    for (int a = 1; a < n * n; ++a)
        j[size_t(a)] = -e2(lattice_fraction({a / n, a % n}, n, state.tau).omega, state.tau);
    for (int a = 0; a < n * n; ++a) v.a[size_t(a)] = Mat::Zero(n, n);
    for (int b = 1; b < n * n; ++b)
        for (int g = 1; g < n * n; ++g) {
            const int a = ((b / n + g / n) % n) * n + (b % n + g % n) % n;
            if (a == 0) continue;
            v.a[size_t(a)] += comm(state.a[size_t(b)], state.a[size_t(g)]) * j[size_t(g)];
        }
    v.s0 = 0.0;
    return v;
}

/// Gaudin zero-mode residual sum_beta [A^beta, A^{-beta}] wp'(omega_beta).
inline Mat gaudin_zero_mode(const GaudinState& state) {
    const int n = state.n;
    Mat acc = Mat::Zero(n, n);
    for (int a = 1; a < n * n; ++a) {
        const int na = tdetail::neg_index(a, n);
        acc += comm(state.a[size_t(a)], state.a[size_t(na)]) *
               wp_prime(lattice_fraction({a / n, a % n}, n, state.tau).omega, state.tau);
    }
    return acc;
}

inline PviScalarState rhs_pvi_scalar(const PviScalarState& state) {
    const std::array<cplx, 4> half_periods = {0.0, state.tau.tau / 2.0,
                                              (1.0 + state.tau.tau) / 2.0, 0.5};
    PviScalarState v = state;
    v.u = state.udot;
    cplx acc = 0.0;
    for (int a = 0; a < 4; ++a) {
        const cplx arg = state.u + half_periods[size_t(a)];
        if (lattice_distance(arg, state.tau) < 1e-4)
            throw StepRejected("pvi_scalar: u + omega_a within the pole window");
        acc += state.nu[size_t(a)] * state.nu[size_t(a)] * wp_prime(arg, state.tau);
    }
    v.udot = acc;
    return v;
}

// ---------------------------------------------------------------------------
// eta-independent description of the relativistic top
// ---------------------------------------------------------------------------

/// Divides out the section weights: S_alpha -> S_alpha / phi_alpha(eta, omega_alpha)
/// for alpha != 0, S_0 unchanged. The image evolves under the
/// non-relativistic equations.
inline TopState eta_substitution(const RelTopState& state) {
    tdetail::check_eta(state.eta, state.n, state.tau);
    TopState out{state.n, state.tau, state.coords, false, state.z2_reduced};
    for (int a = 1; a < state.n * state.n; ++a) {
        const auto om = lattice_fraction({a / state.n, a % state.n}, state.n, state.tau);
        out.coords[size_t(a)] /= twisted_phi(state.eta, om.omega, om.dtau, state.tau);
    }
    out.traceless = std::abs(out.coords[0]) < 1e-14;
    return out;
}

// ---------------------------------------------------------------------------
// Lax pairs
// ---------------------------------------------------------------------------

struct LaxPair {
    TensorOperator l;
    TensorOperator m;
};

namespace tdetail {

inline void guard_point(cplx z, const Modulus& tau) {
    if (lattice_distance(z, tau) < pole_guard)
        throw PoleProximity("Lax spectral parameter within pole guard of the lattice");
}

} // namespace tdetail

inline LaxPair lax_nonrel(const TopState& state, cplx z) {
    tdetail::guard_point(z, state.tau);
    tdetail::Coeffs c(state.n, state.tau, std::nullopt);
    Mat l = Mat::Zero(state.n, state.n), m = l;
    for (int a = 1; a < state.n * state.n; ++a) {
        const cplx phi = twisted_phi(z, c.omega[size_t(a)], c.wt[size_t(a)], state.tau);
        const cplx f = twisted_f(z, c.omega[size_t(a)], c.wt[size_t(a)], state.tau);
        l += state.coords[size_t(a)] * phi * c.basis.t[size_t(a)];
        m += state.coords[size_t(a)] * f * c.basis.t[size_t(a)];
    }
    return {TensorOperator({state.n}, l), TensorOperator({state.n}, m)};
}

inline LaxPair lax_rel(const RelTopState& state, cplx z) {
    tdetail::guard_point(z, state.tau);
    tdetail::Coeffs c(state.n, state.tau, state.eta);
    Mat l = Mat::Zero(state.n, state.n), m = l;
    for (int a = 0; a < state.n * state.n; ++a) {
        const cplx phi_eta =
            twisted_phi(z, state.eta + c.omega[size_t(a)], c.wt[size_t(a)], state.tau);
        l += state.coords[size_t(a)] * phi_eta * c.basis.t[size_t(a)];
        if (a != 0) {
            const cplx phi = twisted_phi(z, c.omega[size_t(a)], c.wt[size_t(a)], state.tau);
            m -= state.coords[size_t(a)] * phi * c.basis.t[size_t(a)];
        }
    }
    return {TensorOperator({state.n}, l), TensorOperator({state.n}, m)};
}

inline LaxPair lax_matrix(const MatrixTopState& state, cplx z) {
    tdetail::guard_point(z, state.tau);
    tdetail::Coeffs c(state.n, state.tau, state.eta);
    const int nm = state.n * state.m;
    Mat l = Mat::Zero(nm, nm), m = l;
    for (int a = 0; a < state.n * state.n; ++a) {
        if (state.eta) {
            const cplx phi_eta =
                twisted_phi(z, *state.eta + c.omega[size_t(a)], c.wt[size_t(a)], state.tau);
            l += phi_eta * kron(c.basis.t[size_t(a)], state.coords[size_t(a)]);
        }
        if (a == 0) continue;
        const cplx phi = twisted_phi(z, c.omega[size_t(a)], c.wt[size_t(a)], state.tau);
        const cplx f = twisted_f(z, c.omega[size_t(a)], c.wt[size_t(a)], state.tau);
        if (state.eta) {
            m -= phi * kron(c.basis.t[size_t(a)], state.coords[size_t(a)]);
        } else {
            l += phi * kron(c.basis.t[size_t(a)], state.coords[size_t(a)]);
            m += f * kron(c.basis.t[size_t(a)], state.coords[size_t(a)]);
        }
    }
    return {TensorOperator({state.n, state.m}, l), TensorOperator({state.n, state.m}, m)};
}

namespace tdetail {

inline Mat pauli_sigma(int a) {
    Mat s(2, 2);
    switch (a) {
        case 1: s << 0, 1, 1, 0; break;
        case 2: s << 0, cplx(0, -1), cplx(0, 1), 0; break;
        default: s << 1, 0, 0, -1; break;
    }
    return s;
}

} // namespace tdetail

/// Zhukovsky-Volterra Lax operator (matrix extension): the external-field
/// part enters through nu~_a phi_a(z - omega_a, omega_a).
inline LaxPair lax_gyrostat(const GyrostatState& state, cplx z) {
    tdetail::guard_point(z, state.tau);
    const auto nt = nu_tilde(state.nu);
    const int m = state.m;
    Mat l = Mat::Zero(2 * m, 2 * m), mm = l;
    std::array<cplx, 3> phi, fieldphi;
    for (int a = 0; a < 3; ++a) {
        const auto om = lattice_fraction(tdetail::pauli_modes()[size_t(a)], 2, state.tau);
        if (lattice_distance(z - om.omega, state.tau) < pole_guard)
            throw PoleProximity("gyrostat Lax parameter hits a half-period pole");
        phi[size_t(a)] = twisted_phi(z, om.omega, om.dtau, state.tau);
        fieldphi[size_t(a)] = twisted_phi(z - om.omega, om.omega, om.dtau, state.tau);
    }
    const cplx half_i = 1.0 / (2.0 * iu);
    for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3, cc = (a + 2) % 3;
        Mat la = state.s[size_t(a)] * phi[size_t(a)] +
                 nt[size_t(a) + 1] * fieldphi[size_t(a)] * Mat::Identity(m, m);
        l += half_i * kron(tdetail::pauli_sigma(a + 1), la);
        mm -= half_i * phi[size_t(b)] * phi[size_t(cc)] *
              kron(tdetail::pauli_sigma(a + 1), state.s[size_t(a)]);
    }
    return {TensorOperator({2, m}, l), TensorOperator({2, m}, mm)};
}

/// PVI Lax pair: same L, with M shifted by E1(z) L.
inline LaxPair lax_pvi(const GyrostatState& state, cplx z) {
    LaxPair zv = lax_gyrostat(state, z);
    return {zv.l, {zv.m.dims, zv.m.data + e1(z, state.tau) * zv.l.data}};
}

inline LaxPair lax_gaudin(const GaudinState& state, cplx z) {
    tdetail::guard_point(z, state.tau);
    const int n = state.n;
    Mat l = state.s0 * Mat::Identity(n, n), m = Mat::Zero(n, n);
    for (int a = 1; a < n * n; ++a) {
        const auto om = lattice_fraction({a / n, a % n}, n, state.tau);
        l += twisted_phi(z, om.omega, om.dtau, state.tau) * state.a[size_t(a)];
        m += twisted_f(z, om.omega, om.dtau, state.tau) * state.a[size_t(a)];
    }
    return {TensorOperator({n}, l), TensorOperator({n}, m)};
}

// ---------------------------------------------------------------------------
// Trace-form constructions from R-matrix data
// ---------------------------------------------------------------------------

/// J(S) = tr_2(m_12(0) S_2) for traceless S.
inline Mat j_trace_form(const Mat& s, const RMatrixSpec& spec) {
    rdetail::Ctx c(spec.n, spec.tau);
    TensorOperator m0 = rdetail::m_coeff0(c);
    TensorOperator s2 = embed(TensorOperator({spec.n}, s), {1}, {spec.n, spec.n});
    return partial_trace(m0 * s2, {1}).data;
}

/// L(z,S) = tr_2(r_12(z) S_2).
inline Mat l_trace_form(const Mat& s, cplx z, const RMatrixSpec& spec) {
    rdetail::Ctx c(spec.n, spec.tau);
    TensorOperator s2 = embed(TensorOperator({spec.n}, s), {1}, {spec.n, spec.n});
    return partial_trace(rdetail::r_classical(c, z) * s2, {1}).data;
}

/// M(z,S) = tr_2(m_12(z) S_2).
inline Mat m_trace_form(const Mat& s, cplx z, const RMatrixSpec& spec) {
    rdetail::Ctx c(spec.n, spec.tau);
    TensorOperator s2 = embed(TensorOperator({spec.n}, s), {1}, {spec.n, spec.n});
    return partial_trace(rdetail::m_coeff(c, z) * s2, {1}).data;
}

/// J^eta(S) = tr_2((R0(eta) - r0) S_2).
inline Mat j_eta_trace_form(const Mat& s, cplx eta, const RMatrixSpec& spec) {
    rdetail::Ctx c(spec.n, spec.tau);
    TensorOperator d = rdetail::R0_coeff(c, eta) - rdetail::r0_coeff(c);
    TensorOperator s2 = embed(TensorOperator({spec.n}, s), {1}, {spec.n, spec.n});
    return partial_trace(d * s2, {1}).data;
}

/// L^eta(z,S) = tr_2(R^eta_12(z) S_2).
inline Mat l_eta_trace_form(const Mat& s, cplx eta, cplx z, const RMatrixSpec& spec) {
    rdetail::Ctx c(spec.n, spec.tau);
    TensorOperator s2 = embed(TensorOperator({spec.n}, s), {1}, {spec.n, spec.n});
    return partial_trace(rdetail::R_plain(c, eta, z) * s2, {1}).data;
}

/// M^eta(z,S) = -tr_2(r_12(z) Sbar_2) with Sbar the traceless part.
inline Mat m_eta_trace_form(const Mat& s, cplx z, const RMatrixSpec& spec) {
    rdetail::Ctx c(spec.n, spec.tau);
    Mat sbar = s - (s.trace() / double(spec.n)) * Mat::Identity(spec.n, spec.n);
    TensorOperator s2 = embed(TensorOperator({spec.n}, sbar), {1}, {spec.n, spec.n});
    return {-partial_trace(rdetail::r_classical(c, z) * s2, {1}).data};
}

/// Matrix extension: tr_{2,~2}(R^eta_{12,~1~2}(z) S_{2~2}) and friends live
/// on the slots (aux1, aux2, nc1, nc2); the result is an operator on
/// aux1 (x) nc1.
inline Mat ext_trace_form(const TensorOperator& two_space_ext, const std::vector<Mat>& blocks,
                          int n, int m, const BasisSet& basis) {
    const std::vector<int> dims = {n, n, m, m};
    Mat acc = Mat::Zero(n * m, n * m);
    for (int a = 0; a < n * n; ++a)
        acc += kron(basis.t[size_t(a)], blocks[size_t(a)]);
    TensorOperator s22 = embed(TensorOperator({n, m}, acc), {1, 3}, dims);
    return partial_trace(two_space_ext * s22, {1, 3}).data;
}

inline Mat l_matrix_trace_form(const MatrixTopState& state, cplx z) {
    rdetail::Ctx c(state.n, state.tau);
    rdetail::Emb e(c, state.m);
    TensorOperator rext = state.eta ? e.lift(rdetail::R_plain(c, *state.eta, z))
                                    : e.lift(rdetail::r_classical(c, z));
    if (state.m == 1) rext = TensorOperator({state.n, state.n, 1, 1}, rext.data);
    return ext_trace_form(rext, state.coords, state.n, state.m, c.basis);
}

// ---------------------------------------------------------------------------
// Z2 reduction
// ---------------------------------------------------------------------------

namespace tdetail {

inline std::vector<cplx> rel_weights(int n, cplx eta, const Modulus& tau) {
    std::vector<cplx> w(size_t(n * n), 1.0);
    for (int a = 1; a < n * n; ++a) {
        const auto om = lattice_fraction({a / n, a % n}, n, tau);
        w[size_t(a)] = twisted_phi(eta, om.omega, om.dtau, tau);
    }
    return w;
}

/// The reduction surface is the fixed-point set of conjugation by h, which
/// sends T_alpha to the literally negated element. In canonical coordinates
/// that reads S_alpha = s_alpha S_{-alpha} with the dual sign s_alpha (all
/// +1 at N = 2, alternating for interior modes at N >= 3).
inline std::vector<double> z2_signs(int n) {
    BasisSet b = build_basis(n);
    std::vector<double> s(size_t(n * n));
    for (int a = 0; a < n * n; ++a) s[size_t(a)] = dual_sign(b, a);
    return s;
}

} // namespace tdetail

inline double z2_check(const TopState& state) {
    const auto sg = tdetail::z2_signs(state.n);
    double d = 0.0;
    for (int a = 1; a < state.n * state.n; ++a)
        d = std::max(d, std::abs(state.coords[size_t(a)] -
                                 sg[size_t(a)] *
                                     state.coords[size_t(tdetail::neg_index(a, state.n))]));
    return d;
}

inline double z2_check(const RelTopState& state) {
    const auto w = tdetail::rel_weights(state.n, state.eta, state.tau);
    const auto sg = tdetail::z2_signs(state.n);
    double d = 0.0;
    for (int a = 1; a < state.n * state.n; ++a) {
        const int na = tdetail::neg_index(a, state.n);
        d = std::max(d, std::abs(state.coords[size_t(a)] / w[size_t(a)] -
                                 sg[size_t(a)] * state.coords[size_t(na)] / w[size_t(na)]));
    }
    return d;
}

inline double z2_check(const MatrixTopState& state) {
    const auto sg = tdetail::z2_signs(state.n);
    double d = 0.0;
    if (state.eta) {
        const auto w = tdetail::rel_weights(state.n, *state.eta, state.tau);
        for (int a = 1; a < state.n * state.n; ++a) {
            const int na = tdetail::neg_index(a, state.n);
            d = std::max(d, max_abs(state.coords[size_t(a)] / w[size_t(a)] -
                                    sg[size_t(a)] * state.coords[size_t(na)] / w[size_t(na)]));
        }
    } else {
        for (int a = 1; a < state.n * state.n; ++a)
            d = std::max(d, max_abs(state.coords[size_t(a)] -
                                    sg[size_t(a)] *
                                        state.coords[size_t(tdetail::neg_index(a, state.n))]));
    }
    return d;
}

inline double z2_check(const GaudinState& state) {
    double d = 0.0;
    for (int a = 1; a < state.n * state.n; ++a)
        d = std::max(d,
                     max_abs(state.a[size_t(a)] - state.a[size_t(tdetail::neg_index(a, state.n))]));
    return d;
}

/// Defect of the scalar-zero-mode constraint S_0 = s 1_M.
inline double s0_defect(const MatrixTopState& state) {
    if (!state.eta) return max_abs(state.coords[0]);
    const Mat& s0 = state.coords[0];
    return max_abs(s0 - (s0.trace() / double(state.m)) * Mat::Identity(state.m, state.m));
}

inline TopState z2_project(const TopState& state) {
    const auto sg = tdetail::z2_signs(state.n);
    TopState out = state;
    for (int a = 1; a < state.n * state.n; ++a) {
        const int na = tdetail::neg_index(a, state.n);
        out.coords[size_t(a)] =
            0.5 * (state.coords[size_t(a)] + sg[size_t(a)] * state.coords[size_t(na)]);
    }
    out.z2_reduced = true;
    return out;
}

inline RelTopState z2_project(const RelTopState& state) {
    const auto w = tdetail::rel_weights(state.n, state.eta, state.tau);
    const auto sg = tdetail::z2_signs(state.n);
    RelTopState out = state;
    for (int a = 1; a < state.n * state.n; ++a) {
        const int na = tdetail::neg_index(a, state.n);
        const cplx mean = 0.5 * (state.coords[size_t(a)] / w[size_t(a)] +
                                 sg[size_t(a)] * state.coords[size_t(na)] / w[size_t(na)]);
        out.coords[size_t(a)] = mean * w[size_t(a)];
    }
    out.z2_reduced = true;
    return out;
}

inline MatrixTopState z2_project(const MatrixTopState& state) {
    const auto sg = tdetail::z2_signs(state.n);
    MatrixTopState out = state;
    if (state.eta) {
        const auto w = tdetail::rel_weights(state.n, *state.eta, state.tau);
        for (int a = 1; a < state.n * state.n; ++a) {
            const int na = tdetail::neg_index(a, state.n);
            Mat mean = 0.5 * (state.coords[size_t(a)] / w[size_t(a)] +
                              sg[size_t(a)] * state.coords[size_t(na)] / w[size_t(na)]);
            out.coords[size_t(a)] = mean * w[size_t(a)];
        }
        out.coords[0] =
            (state.coords[0].trace() / double(state.m)) * Mat::Identity(state.m, state.m);
    } else {
        for (int a = 1; a < state.n * state.n; ++a) {
            const int na = tdetail::neg_index(a, state.n);
            out.coords[size_t(a)] =
                0.5 * (state.coords[size_t(a)] + sg[size_t(a)] * state.coords[size_t(na)]);
        }
        out.coords[0] = Mat::Zero(state.m, state.m);
    }
    out.z2_reduced = true;
    return out;
}

inline GaudinState z2_project(const GaudinState& state) {
    GaudinState out = state;
    for (int a = 1; a < state.n * state.n; ++a) {
        const int na = tdetail::neg_index(a, state.n);
        out.a[size_t(a)] = 0.5 * (state.a[size_t(a)] + state.a[size_t(na)]);
    }
    out.z2_reduced = true;
    return out;
}

/// Lax-level involution defect |h L(-z) h^{-1} + L(z)| / scale; zero on the
/// Z2-reduced surface.
inline double involution_defect(const TopState& state, cplx z) {
    const Mat h = involution_h(state.n);
    const Mat lm = lax_nonrel(state, -z).l.data;
    const Mat lp = lax_nonrel(state, z).l.data;
    const Mat d = h * lm * h.inverse() + lp;
    return max_abs(d) / std::max(max_abs(lp), 1.0);
}

/// Equivariant splitting L^{+-}(z) = (1/2)(L(z) -+ h L(-z) h^{-1}); the
/// minus part survives on the reduced surface.
inline Mat lax_split(const TopState& state, cplx z, int sign) {
    const Mat h = involution_h(state.n);
    const Mat lm = lax_nonrel(state, -z).l.data;
    const Mat lp = lax_nonrel(state, z).l.data;
    return 0.5 * (lp + double(sign) * h * lm * h.inverse());
}

// ---------------------------------------------------------------------------
// Seeded random states (verification and CLI defaults)
// ---------------------------------------------------------------------------

inline TopState random_top_state(int n, const Modulus& tau, Rng& rng, bool project = false,
                                 double amp = 1.0) {
    TopState s{n, tau, std::vector<cplx>(size_t(n * n)), true, false};
    for (int a = 1; a < n * n; ++a) s.coords[size_t(a)] = amp * rng.box();
    s.coords[0] = 0.0;
    return project ? z2_project(s) : s;
}

inline RelTopState random_rel_state(int n, cplx eta, const Modulus& tau, Rng& rng,
                                    bool project = false, double amp = 1.0) {
    RelTopState s{n, tau, eta, std::vector<cplx>(size_t(n * n)), false};
    for (int a = 0; a < n * n; ++a) s.coords[size_t(a)] = amp * rng.box();
    return project ? z2_project(s) : s;
}

inline MatrixTopState random_matrix_state(int n, int m, std::optional<cplx> eta,
                                          const Modulus& tau, Rng& rng, bool project = true,
                                          double amp = 1.0) {
    MatrixTopState s{n, m, tau, eta, std::vector<Mat>(size_t(n * n)), false};
    for (int a = 0; a < n * n; ++a) {
        s.coords[size_t(a)] = Mat::Zero(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) s.coords[size_t(a)](i, j) = amp * rng.box();
    }
    if (eta)
        s.coords[0] = amp * rng.box() * Mat::Identity(m, m);
    else
        s.coords[0] = Mat::Zero(m, m);
    return project ? z2_project(s) : s;
}

inline GyrostatState random_gyrostat_state(int m, const std::array<cplx, 4>& nu,
                                           const Modulus& tau, Rng& rng, double amp = 1.0) {
    GyrostatState s{m, tau, nu, std::vector<Mat>(3)};
    for (int a = 0; a < 3; ++a) {
        s.s[size_t(a)] = Mat::Zero(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) s.s[size_t(a)](i, j) = amp * rng.box();
    }
    return s;
}

inline GaudinState random_gaudin_state(int n, const Modulus& tau, Rng& rng, bool project = true,
                                       double amp = 1.0) {
    GaudinState s{n, tau, 0.0, std::vector<Mat>(size_t(n * n)), true};
    for (int a = 0; a < n * n; ++a) {
        s.a[size_t(a)] = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) s.a[size_t(a)](i, j) = amp * rng.box();
    }
    s.a[0] = Mat::Zero(n, n);
    return project ? z2_project(s) : s;
}

} // namespace etop
