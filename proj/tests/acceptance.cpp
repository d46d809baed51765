// Acceptance suite: runs every acceptance criterion at its pinned tolerance
// and prints one pass/fail line per criterion. Exits nonzero when any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <string>

#include "etop/flows.hpp"
#include "etop/kernel_suite.hpp"

using namespace etop;

namespace {

int failures = 0;

void line(int crit, bool ok, const std::string& what) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", crit, what.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<cplx> draw_z(const Modulus& tau, std::uint64_t seed, int count) {
    Rng rng(seed);
    std::vector<cplx> out;
    for (int i = 0; i < count; ++i) out.push_back(rng.in_cell(tau));
    return out;
}

// --- criterion 1: elliptic-kernel identity suite --------------------------
void criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::string> ids = {"fay",        "fay-coincident",  "f-exchange",
                                          "wp-difference",  "f-exchange-odd", "heat-phi",
                                          "quasi-periodicity", "phi-local",
                                          "e1-local", "f-local"};
    double worst = 0.0;
    std::string worst_id = "-";
    bool ok = true;
    for (cplx tv : {cplx(0, 1), cplx(0.2, 1.1)}) {
        Modulus tau(tv);
        for (const auto& id : ids) {
            auto rep = verify_kernel_identity(id, tau, 100, 1e-10, 42);
            if (rep.max_rel_residual > worst) {
                worst = rep.max_rel_residual;
                worst_id = id;
            }
            ok = ok && rep.passed;
        }
    }
    const double dt = seconds_since(t0);
    ok = ok && dt < 10.0;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "kernel identities, 100 samples, two moduli: worst %.2e (%s) < 1e-10, %.1fs < 10s",
                  worst, worst_id.c_str(), dt);
    line(1, ok, buf);
}

// --- criterion 2: R-matrix suite -------------------------------------------
void criterion2() {
    const auto t0 = std::chrono::steady_clock::now();
    Modulus tau(cplx(0, 1));
    double worst = 0.0;
    std::string worst_id = "-";
    bool ok = true;
    for (int n : {1, 2, 3})
        for (int m : {1, 2}) {
            RMatrixSpec spec(n, m, tau);
            for (const auto& id : identity_catalogue()) {
                if (!identity_defined_for(id, m)) continue;
                auto rep = verify_identity(id, spec, 100, 1e-9, 42);
                if (rep.max_rel_residual > worst) {
                    worst = rep.max_rel_residual;
                    worst_id = id + "@N" + std::to_string(n) + "M" + std::to_string(m);
                }
                ok = ok && rep.passed;
            }
        }
    const double dt = seconds_since(t0);
    ok = ok && dt < 120.0;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "R-matrix catalogue at N in {1,2,3}, M in {1,2}: worst %.2e (%s) < 1e-9, "
                  "%.1fs < 120s",
                  worst, worst_id.c_str(), dt);
    line(2, ok, buf);
}

// --- criterion 3: Lax identity as numerics ---------------------------------
void criterion3() {
    Modulus tau(cplx(0, 1));
    bool ok = true;
    double worst = 0.0;
    Rng rng(301);
    for (int n : {2, 3}) {
        worst = std::max(worst, lax_residual(random_top_state(n, tau, rng),
                                             draw_z(tau, 31, 20)));
        worst = std::max(worst, lax_residual(random_rel_state(n, cplx(0.17, 0.05), tau, rng),
                                             draw_z(tau, 32, 20)));
    }
    worst = std::max(worst, lax_residual(random_matrix_state(2, 2, std::nullopt, tau, rng, true),
                                         draw_z(tau, 33, 20)));
    worst = std::max(worst,
                     lax_residual(random_matrix_state(2, 2, cplx(0.21, 0.04), tau, rng, true),
                                  draw_z(tau, 34, 20)));
    ok = ok && worst < 1e-9;

    // negative control: random non-scalar S_0 in the relativistic matrix top
    MatrixTopState bad = random_matrix_state(2, 2, cplx(0.21, 0.04), tau, rng, true);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) bad.coords[0](i, j) = rng.box();
    bad.z2_reduced = false;
    const double neg = lax_residual(ModelState(bad), draw_z(tau, 35, 20));
    ok = ok && neg > 1e-3;

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "Lax residual: constrained worst %.2e < 1e-9; non-scalar S_0 control %.2e > 1e-3",
                  worst, neg);
    line(3, ok, buf);
}

// --- criterion 4: constraint preservation ----------------------------------
void criterion4() {
    Modulus tau(cplx(0, 1));
    Rng rng(401);
    TopState s0 = random_top_state(3, tau, rng, true, 0.2);
    auto run = [&](double dt) { return integrate_autonomous(s0, 0.0, 1.0, dt,
                                                            FlowOptions{{}, 0, 1, 0, 1, false}); };
    Trajectory t1 = run(1e-2), t2 = run(5e-3);
    double z2max = 0.0;
    for (const auto& d : t1.diagnostics) z2max = std::max(z2max, d.z2_defect);
    const auto e1v = pack_state(t1.states.back());
    const auto e2v = pack_state(t2.states.back());
    double ierr = 1e-14; // rounding floor
    for (size_t i = 0; i < e1v.size(); ++i) ierr = std::max(ierr, std::abs(e1v[i] - e2v[i]));
    bool ok = z2max < 10.0 * ierr;

    RelTopState rs = random_rel_state(3, cplx(0.11, 0.03), tau, rng);
    ok = ok && (rhs_rel(rs).coords[0] == cplx(0.0));

    MatrixTopState ms = random_matrix_state(3, 2, std::nullopt, tau, rng, true);
    const double zm = max_abs(matrix_zero_mode(ms));
    ok = ok && zm < 1e-12;

    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "Z2 drift %.2e < 10 x integration error %.2e; (rhs_rel)_0 = 0 exactly; "
                  "matrix zero-mode %.2e < 1e-12",
                  z2max, ierr, zm);
    line(4, ok, buf);
}

// --- criterion 5: autonomous conservation ----------------------------------
void criterion5() {
    Modulus tau(cplx(0, 1));
    bool ok = true;
    double inv_drift = 0.0;
    // real N=2 data is the classical Euler top, whose real trajectories stay
    // on the Casimir sphere; the N=3 run uses a moderate complex state
    Rng rng(510);
    TopState euler{2, tau, std::vector<cplx>(4, 0.0), true, false};
    for (int a = 1; a < 4; ++a) euler.coords[size_t(a)] = 0.4 * rng.uniform(-1.0, 1.0);
    {
        FlowOptions opt;
        opt.seed = 5;
        opt.kmax = 2;
        Trajectory traj = integrate_autonomous(euler, 0.0, 1.0, 1e-3, opt);
        const auto& first = traj.diagnostics.front().invariants;
        for (const auto& d : traj.diagnostics)
            for (size_t k = 0; k < first.size(); ++k)
                inv_drift = std::max(inv_drift, std::abs(d.invariants[k] - first[k]));
    }
    {
        Rng rng3(503);
        TopState s0 = random_top_state(3, tau, rng3, false, 0.3);
        FlowOptions opt;
        opt.seed = 5;
        opt.kmax = 3;
        Trajectory traj = integrate_autonomous(s0, 0.0, 1.0, 1e-3, opt);
        const auto& first = traj.diagnostics.front().invariants;
        for (const auto& d : traj.diagnostics)
            for (size_t k = 0; k < first.size(); ++k)
                inv_drift = std::max(inv_drift, std::abs(d.invariants[k] - first[k]));
    }
    ok = ok && inv_drift < 1e-6;
    Trajectory traj = integrate_autonomous(euler, 0.0, 1.0, 1e-3,
                                           FlowOptions{{}, 0, 1, 0, 1, false});
    auto casimir = [](const ModelState& st) {
        const auto& s = std::get<TopState>(st);
        cplx c = 0.0;
        for (int a = 1; a < 4; ++a) c += s.coords[size_t(a)] * s.coords[size_t(a)];
        return c;
    };
    const cplx c0 = casimir(traj.states.front());
    double cas_drift = 0.0;
    for (const auto& st : traj.states)
        cas_drift = std::max(cas_drift, std::abs(casimir(st) - c0));
    ok = ok && cas_drift < 1e-10;

    auto endpoint = [&](double dt) {
        return pack_state(
            integrate_autonomous(euler, 0.0, 1.0, dt, FlowOptions{{}, 0, 1, 0, 1, false})
                .states.back());
    };
    const auto ref = endpoint(1e-5);
    const auto c1 = endpoint(0.02);
    const auto c2 = endpoint(0.01);
    double n1 = 0, n2 = 0;
    for (size_t i = 0; i < ref.size(); ++i) {
        n1 = std::max(n1, std::abs(c1[i] - ref[i]));
        n2 = std::max(n2, std::abs(c2[i] - ref[i]));
    }
    const double ratio = n1 / n2;
    ok = ok && ratio > 12.0 && ratio < 22.0;

    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "invariant drift %.2e < 1e-6; Casimir drift %.2e < 1e-10; halving ratio %.1f "
                  "in [12, 22]",
                  inv_drift, cas_drift, ratio);
    line(5, ok, buf);
}

// --- criterion 6: isomonodromy ----------------------------------------------
void criterion6() {
    TauPath path(cplx(0, 1), cplx(0.2, 1.2));
    bool ok = true;
    double worst = 0.0;
    auto run = [&](const ModelState& s0, const char*) {
        FlowOptions opt;
        opt.seed = 6;
        Trajectory traj = integrate_isomonodromic(s0, path, 1e-3, opt);
        double w = 0.0;
        for (const auto& d : traj.diagnostics) w = std::max(w, d.monodromy_residual);
        worst = std::max(worst, w);
        return traj;
    };
    Modulus tau0(path.tau0);
    Rng rng(601);
    run(random_top_state(3, tau0, rng, true, 0.2), "top");
    GyrostatState gy = random_gyrostat_state(
        1, {cplx(0.3, 0.1), cplx(-0.2, 0.05), cplx(0.4, -0.1), cplx(0.15, 0)}, tau0, rng, 0.3);
    run(gy, "pvi");
    run(random_gyrostat_state(2, {cplx(0.3, 0), cplx(-0.2, 0), cplx(0.4, 0), cplx(0.15, 0)},
                              tau0, rng, 0.3),
        "nc-pvi");
    run(random_gaudin_state(2, tau0, rng, true, 0.3), "gaudin");
    ok = ok && worst < 1e-8;

    // scalar trajectory against its identity-embedded matrix extension
    GyrostatState emb = gy;
    emb.m = 2;
    for (int a = 0; a < 3; ++a) emb.s[size_t(a)] = gy.s[size_t(a)](0, 0) * Mat::Identity(2, 2);
    FlowOptions opt;
    opt.w_count = 1;
    Trajectory ts = integrate_isomonodromic(gy, path, 1e-3, opt);
    Trajectory tm = integrate_isomonodromic(emb, path, 1e-3, opt);
    const auto& fs = std::get<GyrostatState>(ts.states.back());
    const auto& fm = std::get<GyrostatState>(tm.states.back());
    double emb_diff = 0.0;
    for (int a = 0; a < 3; ++a)
        emb_diff = std::max(
            emb_diff, max_abs(fm.s[size_t(a)] - fs.s[size_t(a)](0, 0) * Mat::Identity(2, 2)));
    ok = ok && emb_diff < 1e-10;

    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "monodromy residual along tau path: worst %.2e < 1e-8 (top N=3, PVI, "
                  "nc-PVI M=2, Gaudin); scalar/embedded endpoint diff %.2e < 1e-10",
                  worst, emb_diff);
    line(6, ok, buf);
}

// --- criterion 7: Gaudin structure ------------------------------------------
void criterion7() {
    Modulus tau(cplx(0, 1));
    Rng rng(701);
    GaudinState g = random_gaudin_state(2, tau, rng);
    g.s0 = cplx(0.13, 0.04);
    double resd = 0.0;
    for (int p = 0; p < 4; ++p) {
        const ModeIndex al{p / 2, p % 2};
        const cplx pole = 2.0 * lattice_fraction(al, 2, tau).omega;
        Mat quad = Mat::Zero(2, 2);
        const double r = 1e-2;
        for (int k = 0; k < 32; ++k) {
            const cplx w = r * std::exp(2.0 * pi * iu * double(k) / 32.0);
            quad += lax_gaudin(g, pole + w).l.data * w;
        }
        quad /= 32.0;
        Mat want = Mat::Zero(2, 2);
        for (int b = 1; b < 4; ++b) {
            const cplx kap = kappa({b / 2, b % 2}, al, 2);
            want += kap * kap * g.a[size_t(b)];
        }
        resd = std::max(resd, max_abs(quad - want) / std::max(1.0, max_abs(want)));
    }
    bool ok = resd < 1e-8;

    // reduction A = T S maps the Gaudin rhs onto the top rhs
    Rng rng2(702);
    TopState s = random_top_state(2, tau, rng2);
    BasisSet b = build_basis(2);
    GaudinState gt{2, tau, 0.0, std::vector<Mat>(4, Mat::Zero(2, 2)), true};
    for (int a = 1; a < 4; ++a) gt.a[size_t(a)] = s.coords[size_t(a)] * b.t[size_t(a)];
    GaudinState gv = rhs_gaudin(gt);
    TopState v = rhs_nonrel(s);
    double mapd = 0.0;
    for (int a = 1; a < 4; ++a)
        mapd = std::max(mapd, max_abs(gv.a[size_t(a)] - v.coords[size_t(a)] * b.t[size_t(a)]));
    ok = ok && mapd < 1e-12;

    // double periodicity on the big torus
    cplx z(0.37, 0.21);
    const Mat l0 = lax_gaudin(g, z).l.data;
    double per = max_abs(lax_gaudin(g, z + 2.0).l.data - l0);
    per = std::max(per, max_abs(lax_gaudin(g, z + 2.0 * tau.tau).l.data - l0));
    per /= std::max(1.0, max_abs(l0));
    ok = ok && per < 1e-10;

    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "contour residues %.2e < 1e-8; reduction map defect %.2e < 1e-12; big-torus "
                  "periodicity %.2e < 1e-10",
                  resd, mapd, per);
    line(7, ok, buf);
}

// --- criterion 8: equivalence of descriptions --------------------------------
void criterion8() {
    Modulus tau(cplx(0, 1));
    bool ok = true;
    double subst = 0.0;
    for (int n : {2, 3}) {
        Rng rng(800 + n);
        RelTopState s = random_rel_state(n, cplx(0.2, 0.07), tau, rng);
        TopState sub = eta_substitution(s);
        TopState lhs = rhs_nonrel(sub);
        RelTopState vr = rhs_rel(s);
        RelTopState vr_state = s;
        vr_state.coords = vr.coords;
        TopState mapped = eta_substitution(vr_state);
        for (int a = 1; a < n * n; ++a)
            subst = std::max(subst, std::abs(lhs.coords[size_t(a)] - mapped.coords[size_t(a)]));
    }
    ok = ok && subst < 1e-12;

    // trace forms against elliptic forms at two z, factor N
    Rng rng(810);
    const int n = 2;
    RMatrixSpec spec(n, 1, tau);
    TopState s = random_top_state(n, tau, rng);
    BasisSet b = build_basis(n);
    Mat sm = Mat::Zero(n, n);
    for (int a = 1; a < n * n; ++a) sm += s.coords[size_t(a)] * b.t[size_t(a)];
    double rec = 0.0;
    auto relm = [](const Mat& x, const Mat& y) {
        return max_abs(x - y) / std::max({max_abs(x), max_abs(y), 1.0});
    };
    for (cplx z : {cplx(0.31, 0.17), cplx(0.12, 0.43)}) {
        LaxPair lp = lax_nonrel(s, z);
        rec = std::max(rec, relm(l_trace_form(sm, z, spec), 2.0 * lp.l.data));
        rec = std::max(rec, relm(m_trace_form(sm, z, spec), 2.0 * lp.m.data));
    }
    {
        Mat jt = j_trace_form(sm, spec);
        Mat want = Mat::Zero(n, n);
        for (int a = 1; a < n * n; ++a)
            want += 2.0 * s.coords[size_t(a)] * inertia({a / n, a % n}, n, tau) * b.t[size_t(a)];
        rec = std::max(rec, relm(jt, want));
    }
    cplx eta(0.2, 0.05);
    RelTopState rs = random_rel_state(n, eta, tau, rng);
    Mat rsm = Mat::Zero(n, n);
    for (int a = 0; a < n * n; ++a) rsm += rs.coords[size_t(a)] * b.t[size_t(a)];
    for (cplx z : {cplx(0.29, 0.31), cplx(0.41, 0.13)}) {
        LaxPair lp = lax_rel(rs, z);
        rec = std::max(rec, relm(l_eta_trace_form(rsm, eta, z, spec), 2.0 * lp.l.data));
        rec = std::max(rec, relm(m_eta_trace_form(rsm, z, spec), 2.0 * lp.m.data));
    }
    {
        Mat jt = j_eta_trace_form(rsm, eta, spec);
        Mat want = e1(eta, tau) * rsm.trace() * Mat::Identity(n, n);
        for (int a = 1; a < n * n; ++a)
            want += 2.0 * rs.coords[size_t(a)] * inertia_eta({a / n, a % n}, eta, n, tau) *
                    b.t[size_t(a)];
        rec = std::max(rec, relm(jt, want));
    }
    {
        Rng rng2(811);
        MatrixTopState ms = random_matrix_state(2, 2, cplx(0.21, 0.06), tau, rng2);
        for (cplx z : {cplx(0.31, 0.17), cplx(0.22, 0.39)})
            rec = std::max(rec, relm(l_matrix_trace_form(ms, z), 2.0 * lax_matrix(ms, z).l.data));
    }
    ok = ok && rec < 1e-10;

    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "eta-substitution intertwiner %.2e < 1e-12; trace-form reconciliation "
                  "(factor N, identity pieces) %.2e < 1e-10",
                  subst, rec);
    line(8, ok, buf);
}

} // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    std::printf("%d of 8 criteria passed (%.0fs total)\n", 8 - failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
