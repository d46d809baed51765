#include <catch2/catch.hpp>

#include "etop/tops.hpp"
#include "oracles.hpp"

using namespace etop;

namespace {
double relm(const Mat& a, const Mat& b) {
    return max_abs(a - b) / std::max({max_abs(a), max_abs(b), 1.0});
}
} // namespace

TEST_CASE("inertia components") {
    Modulus ti(cplx(0, 1));
    SECTION("even in the mode index") {
        for (int a1 = 0; a1 < 3; ++a1)
            for (int a2 = 0; a2 < 3; ++a2) {
                if (a1 == 0 && a2 == 0) continue;
                CHECK(std::abs(inertia({a1, a2}, 3, ti) -
                               inertia({(3 - a1) % 3, (3 - a2) % 3}, 3, ti)) < 1e-12);
            }
    }
    SECTION("relativistic component is the f/phi ratio") {
        cplx eta(0.2, 0);
        for (ModeIndex a : {ModeIndex{0, 1}, ModeIndex{1, 0}, ModeIndex{1, 1}}) {
            const cplx om = lattice_fraction(a, 2, ti).omega;
            const cplx want = kronecker_du(eta, om, ti) / kronecker(eta, om, ti);
            CHECK(std::abs(inertia_eta(a, eta, 2, ti) - want) < 1e-11);
        }
    }
    SECTION("small-eta law J^eta = eta J + O(eta^2)") {
        const cplx eta(1e-4, 0);
        for (ModeIndex a : {ModeIndex{0, 1}, ModeIndex{1, 1}}) {
            const cplx lin = inertia_eta(a, eta, 2, ti) / eta;
            CHECK(std::abs(lin - inertia(a, 2, ti)) < 1e-3);
        }
    }
    SECTION("zero mode rejected") {
        CHECK_THROWS_AS(inertia({0, 0}, 3, ti), ZeroArgument);
        CHECK_THROWS_AS(inertia_eta({3, 3}, cplx(0.2, 0), 3, ti), ZeroArgument);
    }
}

TEST_CASE("right-hand sides") {
    Modulus ti(cplx(0, 1));

    SECTION("nonrel rhs equals the recomposed commutator, N=3") {
        Rng rng(21);
        TopState s = random_top_state(3, ti, rng);
        TopState v = rhs_nonrel(s);
        BasisSet b = build_basis(3);
        Mat sm = Mat::Zero(3, 3), jm = sm;
        for (int a = 1; a < 9; ++a) {
            sm += s.coords[size_t(a)] * b.t[size_t(a)];
            jm += s.coords[size_t(a)] * inertia({a / 3, a % 3}, 3, ti) * b.t[size_t(a)];
        }
        Mat cm = sm * jm - jm * sm;
        for (int a = 1; a < 9; ++a) {
            const cplx want = (cm * b.t_dual[size_t(a)]).trace() / 3.0;
            CHECK(std::abs(v.coords[size_t(a)] - want) < 1e-12);
        }
        CHECK(v.coords[0] == cplx(0.0));
    }
    SECTION("relativistic rhs conserves S_0 exactly") {
        Rng rng(22);
        RelTopState s = random_rel_state(3, cplx(0.17, 0.05), ti, rng);
        CHECK(rhs_rel(s).coords[0] == cplx(0.0));
    }
    SECTION("matrix rhs with M=1 equals scalar rhs") {
        Rng rng(23);
        TopState s = random_top_state(3, ti, rng);
        MatrixTopState ms{3, 1, ti, std::nullopt, std::vector<Mat>(9), false};
        for (int a = 0; a < 9; ++a)
            ms.coords[size_t(a)] = s.coords[size_t(a)] * Mat::Identity(1, 1);
        TopState v = rhs_nonrel(s);
        MatrixTopState mv = rhs_matrix(ms);
        for (int a = 0; a < 9; ++a)
            CHECK(std::abs(mv.coords[size_t(a)](0, 0) - v.coords[size_t(a)]) < 1e-13);
    }
    SECTION("gaudin rhs restricted to A = T S reproduces the top rhs") {
        Rng rng(24);
        TopState s = random_top_state(2, ti, rng);
        BasisSet b = build_basis(2);
        GaudinState g{2, ti, 0.0, std::vector<Mat>(4), true};
        for (int a = 0; a < 4; ++a) g.a[size_t(a)] = s.coords[size_t(a)] * b.t[size_t(a)];
        g.a[0] = Mat::Zero(2, 2);
        GaudinState gv = rhs_gaudin(g);
        TopState v = rhs_nonrel(s);
        for (int a = 1; a < 4; ++a)
            CHECK(max_abs(gv.a[size_t(a)] - v.coords[size_t(a)] * b.t[size_t(a)]) < 1e-12);
    }
    SECTION("gyrostat rhs conserves the Casimir direction") {
        Rng rng(25);
        GyrostatState s = random_gyrostat_state(1, {cplx(0.3, 0), cplx(0.1, 0), cplx(-0.2, 0),
                                                    cplx(0.4, 0)}, ti, rng);
        GyrostatState v = rhs_gyrostat(s);
        cplx dot = 0.0;
        for (int a = 0; a < 3; ++a) dot += 2.0 * s.s[size_t(a)](0, 0) * v.s[size_t(a)](0, 0);
        CHECK(std::abs(dot) < 1e-12);
    }
    SECTION("matrix zero-mode residual vanishes on the reduced surface") {
        Rng rng(26);
        MatrixTopState s = random_matrix_state(3, 2, std::nullopt, ti, rng, true);
        CHECK(max_abs(matrix_zero_mode(s)) < 1e-12);
        MatrixTopState bad = random_matrix_state(3, 2, std::nullopt, ti, rng, false);
        bad.z2_reduced = true;
        CHECK_THROWS_AS(rhs_matrix(bad), ConstraintViolation);
    }
}

TEST_CASE("eta substitution") {
    Modulus ti(cplx(0, 1));
    Rng rng(31);
    RelTopState s = random_rel_state(2, cplx(0.2, 0.07), ti, rng);

    SECTION("intertwines the two right-hand sides") {
        TopState sub = eta_substitution(s);
        TopState lhs = rhs_nonrel(sub);
        RelTopState vr = rhs_rel(s);
        RelTopState vr_state = s;
        vr_state.coords = vr.coords;
        TopState rhs_mapped = eta_substitution(vr_state);
        for (int a = 1; a < 4; ++a)
            CHECK(std::abs(lhs.coords[size_t(a)] - rhs_mapped.coords[size_t(a)]) < 1e-12);
    }
    SECTION("S_0 unchanged") {
        CHECK(eta_substitution(s).coords[0] == s.coords[0]);
    }
    SECTION("round trip restores the coordinates") {
        TopState sub = eta_substitution(s);
        for (int a = 1; a < 4; ++a) {
            const auto om = lattice_fraction({a / 2, a % 2}, 2, ti);
            const cplx back = sub.coords[size_t(a)] * twisted_phi(s.eta, om.omega, om.dtau, ti);
            CHECK(std::abs(back - s.coords[size_t(a)]) < 1e-13);
        }
    }
}

TEST_CASE("lax pairs") {
    Modulus ti(cplx(0, 1));

    SECTION("residue of L at z = 0 recovers the state, N=3") {
        Rng rng(41);
        TopState s = random_top_state(3, ti, rng);
        BasisSet b = build_basis(3);
        Mat sm = Mat::Zero(3, 3);
        for (int a = 1; a < 9; ++a) sm += s.coords[size_t(a)] * b.t[size_t(a)];
        const double z0 = 1e-3;
        Mat res1 = z0 * lax_nonrel(s, z0).l.data;
        Mat res2 = -z0 * lax_nonrel(s, -z0).l.data;
        CHECK(relm(0.5 * (res1 + res2), sm) < 1e-5);
    }
    SECTION("N=2 top Lax equals the Pauli-form gyrostat with zero field") {
        Rng rng(42);
        TopState s = random_top_state(2, ti, rng);
        GyrostatState g{1, ti, {}, std::vector<Mat>(3)};
        // sigma_1 = T_{01}, sigma_2 = T_{11}, sigma_3 = -T_{10}
        g.s[0] = 2.0 * iu * s.coords[1] * Mat::Identity(1, 1);
        g.s[1] = 2.0 * iu * s.coords[3] * Mat::Identity(1, 1);
        g.s[2] = -2.0 * iu * s.coords[2] * Mat::Identity(1, 1);
        cplx z(0.31, 0.11);
        LaxPair top = lax_nonrel(s, z);
        LaxPair zv = lax_gyrostat(g, z);
        CHECK(relm(top.l.data, zv.l.data) < 1e-12);
        // M^{ZV} = M^{top} - E1(z) L
        Mat want = top.m.data - e1(z, ti) * top.l.data;
        CHECK(relm(zv.m.data, want) < 1e-12);
        // and the PVI M restores the top M
        LaxPair pvi = lax_pvi(g, z);
        CHECK(relm(pvi.m.data, top.m.data) < 1e-12);
    }
    SECTION("gaudin residues at the big-torus poles") {
        Rng rng(43);
        GaudinState g = random_gaudin_state(2, ti, rng);
        g.s0 = cplx(0.13, 0.04);
        for (int p = 0; p < 4; ++p) {
            ModeIndex al{p / 2, p % 2};
            const cplx pole = 2.0 * lattice_fraction(al, 2, ti).omega;
            Mat quad = Mat::Zero(2, 2);
            const double r = 1e-2;
            const int q = 32;
            for (int k = 0; k < q; ++k) {
                const cplx w = r * std::exp(2.0 * pi * iu * double(k) / double(q));
                quad += lax_gaudin(g, pole + w).l.data * w;
            }
            quad /= double(q);
            Mat want = Mat::Zero(2, 2);
            for (int b = 1; b < 4; ++b) {
                const cplx kap = kappa({b / 2, b % 2}, al, 2);
                want += kap * kap * g.a[size_t(b)];
            }
            CHECK(relm(quad, want) < 1e-8);
        }
    }
    SECTION("gaudin L is doubly periodic on the big torus") {
        Rng rng(44);
        GaudinState g = random_gaudin_state(2, ti, rng);
        cplx z(0.37, 0.21);
        CHECK(relm(lax_gaudin(g, z).l.data, lax_gaudin(g, z + 2.0).l.data) < 1e-12);
        CHECK(relm(lax_gaudin(g, z).l.data, lax_gaudin(g, z + 2.0 * ti.tau).l.data) < 1e-12);
    }
    SECTION("pole guard on the spectral parameter") {
        Rng rng(45);
        TopState s = random_top_state(2, ti, rng);
        CHECK_THROWS_AS(lax_nonrel(s, cplx(1e-9, 0)), PoleProximity);
        GyrostatState g = random_gyrostat_state(1, {}, ti, rng);
        CHECK_THROWS_AS(lax_gyrostat(g, 0.5 + 1e-9 * iu), PoleProximity);
    }
}

TEST_CASE("trace forms against elliptic forms") {
    Modulus ti(cplx(0, 1));
    RMatrixSpec spec(2, 1, ti);
    Rng rng(51);
    TopState s = random_top_state(2, ti, rng);
    BasisSet b = build_basis(2);
    Mat sm = Mat::Zero(2, 2);
    for (int a = 1; a < 4; ++a) sm += s.coords[size_t(a)] * b.t[size_t(a)];

    SECTION("inertia trace form J(S) = tr_2(m_12(0) S_2), factor N") {
        Mat jt = j_trace_form(sm, spec);
        Mat want = Mat::Zero(2, 2);
        for (int a = 1; a < 4; ++a)
            want += 2.0 * s.coords[size_t(a)] * inertia({a / 2, a % 2}, 2, ti) * b.t[size_t(a)];
        CHECK(relm(jt, want) < 1e-10);
    }
    SECTION("Lax trace form equals N L for traceless S at two z") {
        for (cplx z : {cplx(0.31, 0.17), cplx(0.12, 0.43)}) {
            Mat lt = l_trace_form(sm, z, spec);
            Mat want = 2.0 * lax_nonrel(s, z).l.data;
            CHECK(relm(lt, want) < 1e-11);
        }
    }
    SECTION("two-point consistency: the fitted factor is N") {
        cplx z1(0.31, 0.17), z2(0.12, 0.43);
        Mat lt1 = l_trace_form(sm, z1, spec);
        Mat el1 = lax_nonrel(s, z1).l.data;
        const cplx cfit = lt1(0, 1) / el1(0, 1);
        CHECK(std::abs(cfit - 2.0) < 1e-10);
        Mat lt2 = l_trace_form(sm, z2, spec);
        Mat el2 = lax_nonrel(s, z2).l.data;
        CHECK(relm(lt2, cfit * el2) < 1e-10);
    }
    SECTION("relativistic trace forms") {
        cplx eta(0.2, 0.05);
        RelTopState rs = random_rel_state(2, eta, ti, rng);
        Mat rsm = Mat::Zero(2, 2);
        for (int a = 0; a < 4; ++a) rsm += rs.coords[size_t(a)] * b.t[size_t(a)];
        cplx z(0.29, 0.31);
        LaxPair lp = lax_rel(rs, z);
        CHECK(relm(l_eta_trace_form(rsm, eta, z, spec), 2.0 * lp.l.data) < 1e-11);
        CHECK(relm(m_eta_trace_form(rsm, z, spec), 2.0 * lp.m.data) < 1e-11);
        Mat jt = j_eta_trace_form(rsm, eta, spec);
        Mat want = e1(eta, ti) * rsm.trace() * Mat::Identity(2, 2);
        for (int a = 1; a < 4; ++a)
            want += 2.0 * rs.coords[size_t(a)] * inertia_eta({a / 2, a % 2}, eta, 2, ti) *
                    b.t[size_t(a)];
        CHECK(relm(jt, want) < 1e-10);
    }
    SECTION("matrix trace form at M=1 equals the scalar one") {
        MatrixTopState ms{2, 1, ti, std::nullopt, std::vector<Mat>(4), false};
        for (int a = 0; a < 4; ++a)
            ms.coords[size_t(a)] = s.coords[size_t(a)] * Mat::Identity(1, 1);
        cplx z(0.31, 0.17);
        CHECK(relm(l_matrix_trace_form(ms, z), l_trace_form(sm, z, spec)) < 1e-12);
    }
    SECTION("matrix trace form equals N times the tensored Lax, M=2") {
        Rng rng2(52);
        MatrixTopState ms = random_matrix_state(2, 2, cplx(0.21, 0.06), ti, rng2);
        cplx z(0.31, 0.17);
        Mat lt = l_matrix_trace_form(ms, z);
        CHECK(relm(lt, 2.0 * lax_matrix(ms, z).l.data) < 1e-11);
    }
}

TEST_CASE("Z2 reduction") {
    Modulus ti(cplx(0, 1));

    SECTION("projection is idempotent and kills the defect") {
        Rng rng(61);
        TopState s = random_top_state(3, ti, rng);
        CHECK(z2_check(s) > 0.1);
        TopState p = z2_project(s);
        CHECK(z2_check(p) < 1e-15);
        RelTopState rs = random_rel_state(3, cplx(0.11, 0.03), ti, rng);
        CHECK(z2_check(z2_project(rs)) < 1e-13);
        GaudinState g = random_gaudin_state(3, ti, rng, false);
        CHECK(z2_check(z2_project(g)) < 1e-15);
    }
    SECTION("N=2 states satisfy the constraints identically") {
        Rng rng(62);
        TopState s = random_top_state(2, ti, rng);
        CHECK(z2_check(s) == 0.0);
        RelTopState rs = random_rel_state(2, cplx(0.2, 0), ti, rng);
        CHECK(z2_check(rs) < 1e-14);
    }
    SECTION("Lax-level involution identity on the reduced surface, N=3") {
        Rng rng(63);
        TopState p = random_top_state(3, ti, rng, true);
        cplx z(0.27, 0.34);
        CHECK(involution_defect(p, z) < 1e-12);
        CHECK(max_abs(lax_split(p, z, +1)) < 1e-12);
        CHECK(relm(lax_split(p, z, -1), lax_nonrel(p, z).l.data) < 1e-12);
        TopState s = random_top_state(3, ti, rng, false);
        CHECK(involution_defect(s, z) > 1e-3);
    }
    SECTION("constraint is preserved by the flow") {
        Rng rng(64);
        TopState p = random_top_state(3, ti, rng, true);
        TopState v = rhs_nonrel(p);
        CHECK(z2_check(v) < 1e-13);
        RelTopState rp = z2_project(random_rel_state(3, cplx(0.11, 0.02), ti, rng));
        RelTopState rv = rhs_rel(rp);
        CHECK(z2_check(rv) < 1e-12);
        GaudinState g = random_gaudin_state(2, ti, rng);
        GaudinState gv = rhs_gaudin(g);
        CHECK(z2_check(gv) < 1e-12);
        CHECK(max_abs(gaudin_zero_mode(g)) < 1e-13);
    }
}

TEST_CASE("gyrostat constants") {
    SECTION("pure nu_0 gives equal half-sums") {
        std::array<cplx, 4> nu = {cplx(0.7, 0), 0.0, 0.0, 0.0};
        auto nt = nu_tilde(nu);
        for (int a = 0; a < 4; ++a) CHECK(std::abs(nt[size_t(a)] - cplx(0.35, 0)) < 1e-15);
    }
    SECTION("section-product form is z-independent") {
        Modulus t(cplx(0, 1));
        auto c1 = gyro_c_phi_form(t, cplx(0.31, 0.21));
        auto c2 = gyro_c_phi_form(t, cplx(0.17, 0.45));
        for (int a = 0; a < 3; ++a)
            CHECK(std::abs(c1[size_t(a)] - c2[size_t(a)]) / std::abs(c1[size_t(a)]) < 1e-10);
    }
    SECTION("theta closed form matches the section product") {
        Modulus t(cplx(0.2, 1.1));
        auto cf = gyro_c(t);
        auto cp = gyro_c_phi_form(t, cplx(0.23, 0.37));
        for (int a = 0; a < 3; ++a)
            CHECK(std::abs(cf[size_t(a)] - cp[size_t(a)]) / std::abs(cf[size_t(a)]) < 1e-10);
    }
}
