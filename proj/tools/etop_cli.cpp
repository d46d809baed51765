// Command-line frontend: run identity suites, integrate flows, dump kernel
// function tables. Reports are machine-readable JSON; trajectories are CSV.

#include <CLI11.hpp>

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "etop/flows.hpp"
#include "etop/kernel_suite.hpp"
#include "etop/state_json.hpp"
#include "etop/version.hpp"

namespace {

using namespace etop;

cplx parse_cplx(const std::string& raw) {
    const std::string s = raw;
    if (s.empty()) throw std::invalid_argument("empty complex literal");
    auto to_d = [](const std::string& t) {
        size_t used = 0;
        const double v = std::stod(t, &used);
        if (used != t.size()) throw std::invalid_argument("bad number '" + t + "'");
        return v;
    };
    if (s.back() == 'i' || s.back() == 'I') {
        size_t split = std::string::npos;
        for (size_t k = s.size() - 1; k >= 1; --k) {
            const char c = s[k];
            if ((c == '+' || c == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
                split = k;
                break;
            }
        }
        std::string re = "0", im;
        if (split == std::string::npos) {
            im = s.substr(0, s.size() - 1);
            if (im.empty()) im = "1";
        } else {
            re = s.substr(0, split);
            im = s.substr(split, s.size() - 1 - split);
            if (im == "+" || im == "-") im += "1";
        }
        return {to_d(re), to_d(im)};
    }
    return {to_d(s), 0.0};
}

std::string iso_timestamp() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("ETOP_SEED")) return std::strtoull(env, nullptr, 10);
    return 42;
}

void write_out(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream os(path);
    if (!os) throw std::invalid_argument("cannot open output file '" + path + "'");
    os << content;
}

const std::vector<std::string>& lax_suite_ids() {
    static const std::vector<std::string> ids = {"lax-nonrel",  "lax-rel",     "lax-matrix",
                                                 "lax-matrix-rel", "lax-gyrostat", "lax-gaudin"};
    return ids;
}

IdentityReport run_lax_id(const std::string& id, int n, int m, const Modulus& tau, cplx eta,
                          int samples, double tol, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<cplx> zs;
    for (int k = 0; k < 20; ++k) zs.push_back(rng.in_cell(tau));
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        ModelState st = [&]() -> ModelState {
            if (id == "lax-nonrel") return random_top_state(n, tau, rng);
            if (id == "lax-rel") return random_rel_state(n, eta, tau, rng);
            if (id == "lax-matrix") return random_matrix_state(n, m, std::nullopt, tau, rng, true);
            if (id == "lax-matrix-rel") return random_matrix_state(n, m, eta, tau, rng, true);
            if (id == "lax-gyrostat")
                return random_gyrostat_state(
                    m, {cplx(0.3, 0.1), cplx(-0.2, 0.05), cplx(0.4, -0.1), cplx(0.15, 0)}, tau,
                    rng);
            return random_gaudin_state(n, tau, rng);
        }();
        worst = std::max(worst, lax_residual(st, zs));
    }
    return make_report(id, n, m, samples, worst, tol, seed);
}

struct VerifyConfig {
    std::string suite = "all";
    int n = 2;
    int m = 1;
    std::string tau_s = "0.0+1.0i";
    std::string eta_s = "0.2+0.0i";
    int samples = 100;
    double tol = 1e-9;
    std::uint64_t seed = default_seed();
    std::string out;
};

int cmd_verify(const VerifyConfig& cfg) {
    const Modulus tau(parse_cplx(cfg.tau_s));
    const cplx eta = parse_cplx(cfg.eta_s);
    if (cfg.samples < 1) throw std::invalid_argument("--samples must be >= 1");
    if (!(cfg.tol > 0)) throw std::invalid_argument("--tol must be positive");

    std::vector<std::string> kernel_ids, rmatrix_ids, lax_ids;
    auto contains = [](const std::vector<std::string>& v, const std::string& x) {
        for (const auto& e : v)
            if (e == x) return true;
        return false;
    };
    if (cfg.suite == "all" || cfg.suite == "kernel") kernel_ids = kernel_catalogue();
    if (cfg.suite == "all" || cfg.suite == "rmatrix") {
        for (const auto& id : identity_catalogue())
            if (identity_defined_for(id, cfg.m)) rmatrix_ids.push_back(id);
    }
    if (cfg.suite == "all" || cfg.suite == "lax") {
        for (const auto& id : lax_suite_ids()) {
            if (id == "lax-gyrostat" && cfg.n != 2) continue;
            lax_ids.push_back(id);
        }
    }
    if (kernel_ids.empty() && rmatrix_ids.empty() && lax_ids.empty()) {
        if (contains(kernel_catalogue(), cfg.suite)) kernel_ids.push_back(cfg.suite);
        else if (contains(identity_catalogue(), cfg.suite)) rmatrix_ids.push_back(cfg.suite);
        else if (contains(lax_suite_ids(), cfg.suite)) lax_ids.push_back(cfg.suite);
        else throw std::invalid_argument("unknown suite or identity id '" + cfg.suite + "'");
    }

    json rows = json::array();
    bool all_passed = true;
    auto add = [&](const IdentityReport& r) {
        rows.push_back({{"id", r.id},
                        {"N", r.n},
                        {"M", r.m},
                        {"samples", r.sample_count},
                        {"max_rel_residual", r.max_rel_residual},
                        {"tolerance", r.tolerance},
                        {"passed", r.passed},
                        {"seed", r.seed}});
        all_passed = all_passed && r.passed;
        std::cerr << (r.passed ? "pass  " : "FAIL  ") << r.id << "  residual "
                  << r.max_rel_residual << "\n";
    };
    for (const auto& id : kernel_ids)
        add(verify_kernel_identity(id, tau, cfg.samples, cfg.tol, cfg.seed));
    RMatrixSpec spec(cfg.n, cfg.m, tau);
    for (const auto& id : rmatrix_ids)
        add(verify_identity(id, spec, cfg.samples, cfg.tol, cfg.seed));
    const int lax_states = std::max(1, cfg.samples / 20);
    for (const auto& id : lax_ids)
        add(run_lax_id(id, cfg.n, cfg.m, tau, eta, lax_states, cfg.tol, cfg.seed));

    json report;
    report["suite"] = cfg.suite;
    report["version"] = version;
    report["timestamp"] = iso_timestamp();
    report["config"] = {{"suite", cfg.suite}, {"N", cfg.n},     {"M", cfg.m},
                        {"tau", to_json(tau.tau)}, {"eta", to_json(eta)},
                        {"samples", cfg.samples},  {"tol", cfg.tol},
                        {"seed", cfg.seed}};
    report["identities"] = rows;
    report["all_passed"] = all_passed;
    write_out(cfg.out, report.dump(2) + "\n");
    return all_passed ? 0 : 1;
}

struct IntegrateConfig {
    std::string model;
    std::string state_path;
    std::optional<double> t0, t1, dt;
    std::string tau0_s, tau1_s;
    std::optional<double> ds;
    std::string probe_s;
    int kmax = 0;
    std::uint64_t seed = default_seed();
    double inv_tol = 1e-6;
    double mono_tol = 1e-8;
    double z2_tol = 1e-6;
    std::string out;
    std::string summary;
};

int cmd_integrate(const IntegrateConfig& cfg) {
    std::ifstream is(cfg.state_path);
    if (!is) throw std::invalid_argument("cannot read state file '" + cfg.state_path + "'");
    json sj = json::parse(is);
    ModelState st = state_from_json(sj, cfg.model);
    validate_state(st);

    const bool autonomous = cfg.t1.has_value();
    const bool isomono = cfg.ds.has_value() || !cfg.tau1_s.empty();
    if (autonomous == isomono)
        throw std::invalid_argument("pass either --t0/--t1/--dt or --tau0/--tau1/--ds");

    FlowOptions opt;
    opt.seed = cfg.seed;
    opt.kmax = cfg.kmax;
    if (!cfg.probe_s.empty()) opt.probe_z = {parse_cplx(cfg.probe_s)};

    Trajectory traj;
    if (autonomous) {
        if (!cfg.t0 || !cfg.dt) throw std::invalid_argument("--t0 and --dt are required");
        traj = integrate_autonomous(st, *cfg.t0, *cfg.t1, *cfg.dt, opt);
    } else {
        if (cfg.tau0_s.empty() || cfg.tau1_s.empty() || !cfg.ds)
            throw std::invalid_argument("--tau0, --tau1 and --ds are required");
        TauPath path(parse_cplx(cfg.tau0_s), parse_cplx(cfg.tau1_s));
        traj = integrate_isomonodromic(st, path, *cfg.ds, opt);
    }

    std::ostringstream csv;
    write_trajectory_csv(csv, traj);
    write_out(cfg.out, csv.str());

    double inv_drift = 0.0, z2_max = 0.0, mono_max = 0.0;
    const auto& first = traj.diagnostics.front().invariants;
    for (const auto& d : traj.diagnostics) {
        for (size_t k = 0; k < first.size() && k < d.invariants.size(); ++k)
            inv_drift = std::max(inv_drift, std::abs(d.invariants[k] - first[k]));
        z2_max = std::max(z2_max, d.z2_defect);
        mono_max = std::max(mono_max, d.monodromy_residual);
    }
    const bool check_inv = autonomous;
    const bool passed = (!check_inv || inv_drift < cfg.inv_tol) && z2_max < cfg.z2_tol &&
                        mono_max < cfg.mono_tol;

    json summary;
    summary["version"] = version;
    summary["timestamp"] = iso_timestamp();
    summary["model"] = model_name(st);
    summary["steps"] = traj.states.size() - 1;
    summary["seed"] = traj.seed;
    json probes = json::array();
    for (cplx z : traj.probe_z) probes.push_back(to_json(z));
    summary["probe_z"] = probes;
    summary["max_invariant_drift"] = inv_drift;
    summary["max_z2_defect"] = z2_max;
    summary["max_monodromy_residual"] = mono_max;
    summary["tolerances"] = {{"invariant", cfg.inv_tol},
                             {"z2", cfg.z2_tol},
                             {"monodromy", cfg.mono_tol}};
    summary["passed"] = passed;
    const std::string stext = summary.dump(2) + "\n";
    if (!cfg.summary.empty())
        write_out(cfg.summary, stext);
    else if (!cfg.out.empty())
        std::cout << stext; // trajectory went to a file; summary owns stdout
    else
        std::cerr << stext;
    return passed ? 0 : 1;
}

struct TableConfig {
    std::string fn;
    std::string tau_s = "0.0+1.0i";
    std::string grid = "0.1:0.9:9";
    std::string u_s;
    std::string alpha_s;
    int n = 2;
    std::string hbar_s = "0";
    std::string out;
};

int cmd_table(const TableConfig& cfg) {
    const Modulus tau(parse_cplx(cfg.tau_s));
    double lo = 0, hi = 0;
    int count = 0;
    {
        std::istringstream gs(cfg.grid);
        std::string a, b, c;
        if (!std::getline(gs, a, ':') || !std::getline(gs, b, ':') || !std::getline(gs, c))
            throw std::invalid_argument("--grid expects a:b:n");
        lo = std::stod(a);
        hi = std::stod(b);
        count = std::stoi(c);
        if (count < 1) throw std::invalid_argument("--grid count must be >= 1");
    }
    ModeIndex alpha{0, 0};
    if (!cfg.alpha_s.empty()) {
        std::istringstream as(cfg.alpha_s);
        char comma = 0;
        if (!(as >> alpha.a1 >> comma >> alpha.a2) || comma != ',')
            throw std::invalid_argument("--alpha expects a1,a2");
    }
    const cplx hbar = parse_cplx(cfg.hbar_s);
    std::optional<cplx> u;
    if (!cfg.u_s.empty()) u = parse_cplx(cfg.u_s);

    auto fn = [&](cplx z) -> cplx {
        if (cfg.fn == "theta") return theta(z, tau);
        if (cfg.fn == "E1") return e1(z, tau);
        if (cfg.fn == "E2") return e2(z, tau);
        if (cfg.fn == "wp") return wp(z, tau);
        if (cfg.fn == "wp_prime") return wp_prime(z, tau);
        if (cfg.fn == "phi") {
            if (!u) throw std::invalid_argument("--fn phi requires --u");
            return kronecker(z, *u, tau);
        }
        if (cfg.fn == "f") {
            if (!u) throw std::invalid_argument("--fn f requires --u");
            return kronecker_du(z, *u, tau);
        }
        if (cfg.fn == "phi_alpha") return phi_alpha(hbar, z, alpha, cfg.n, tau);
        if (cfg.fn == "f_alpha") return f_alpha(z, alpha, cfg.n, tau);
        throw std::invalid_argument("unknown --fn '" + cfg.fn + "'");
    };
    // surface config errors (unknown fn, missing --u) before emitting output
    try {
        (void)fn(cplx(0.2347, 0.1711));
    } catch (const PoleProximity&) {
    } catch (const ZeroArgument&) {
    }

    std::ostringstream os;
    char buf[96];
    os << "re_z,im_z,re_value,im_value\n";
    int warn = 0;
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < count; ++j) {
            const double x = count == 1 ? lo : lo + (hi - lo) * i / double(count - 1);
            const double y = count == 1 ? lo : lo + (hi - lo) * j / double(count - 1);
            const cplx z(x, y);
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,", x, y);
            os << buf;
            try {
                const cplx v = fn(z);
                std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", v.real(), v.imag());
                os << buf;
            } catch (const PoleProximity&) {
                os << "nan,nan\n";
                ++warn;
            } catch (const ZeroArgument&) {
                os << "nan,nan\n";
                ++warn;
            }
        }
    write_out(cfg.out, os.str());
    if (warn > 0) std::cerr << warn << " pole-adjacent cells emitted as nan\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"elliptic integrable tops: identity verification, flows, function tables"};
    app.require_subcommand(1);

    VerifyConfig vc;
    auto* sv = app.add_subcommand("verify", "run identity suites and emit a JSON report");
    sv->add_option("--suite", vc.suite, "all | kernel | rmatrix | lax | <identity id>");
    sv->add_option("--N", vc.n, "auxiliary dimension");
    sv->add_option("--M", vc.m, "noncommutative dimension (1 = plain)");
    sv->add_option("--tau", vc.tau_s, "elliptic modulus a+bi");
    sv->add_option("--eta", vc.eta_s, "relativistic parameter a+bi");
    sv->add_option("--samples", vc.samples, "random samples per identity");
    sv->add_option("--tol", vc.tol, "relative residual tolerance");
    sv->add_option("--seed", vc.seed, "random seed (default from ETOP_SEED)");
    sv->add_option("--out", vc.out, "report file (stdout when omitted)");

    IntegrateConfig ic;
    auto* si = app.add_subcommand("integrate", "integrate a model flow from a state file");
    si->add_option("--model", ic.model, "model name, must match the state file")->required();
    si->add_option("--state", ic.state_path, "state JSON file")->required();
    si->add_option("--t0", ic.t0, "autonomous start time");
    si->add_option("--t1", ic.t1, "autonomous end time");
    si->add_option("--dt", ic.dt, "autonomous step");
    si->add_option("--tau0", ic.tau0_s, "deformation start modulus a+bi");
    si->add_option("--tau1", ic.tau1_s, "deformation end modulus a+bi");
    si->add_option("--ds", ic.ds, "deformation path step in [0,1]");
    si->add_option("--probe-z", ic.probe_s, "spectral probe point a+bi");
    si->add_option("--kmax", ic.kmax, "number of trace powers (0 = dim L)");
    si->add_option("--seed", ic.seed, "random seed (default from ETOP_SEED)");
    si->add_option("--inv-tol", ic.inv_tol, "invariant drift tolerance");
    si->add_option("--mono-tol", ic.mono_tol, "monodromy residual tolerance");
    si->add_option("--z2-tol", ic.z2_tol, "constraint drift tolerance");
    si->add_option("--out", ic.out, "trajectory CSV file (stdout when omitted)");
    si->add_option("--summary", ic.summary, "summary JSON file");

    TableConfig tc;
    auto* stt = app.add_subcommand("table", "dump kernel function values over a grid as CSV");
    stt->add_option("--fn", tc.fn,
                    "theta | E1 | E2 | wp | wp_prime | phi | f | phi_alpha | f_alpha")
        ->required();
    stt->add_option("--tau", tc.tau_s, "elliptic modulus a+bi");
    stt->add_option("--grid", tc.grid, "a:b:n for both axes of the z grid");
    stt->add_option("--u", tc.u_s, "second argument for phi / f");
    stt->add_option("--alpha", tc.alpha_s, "mode index a1,a2");
    stt->add_option("--N", tc.n, "lattice denominator for twisted sections");
    stt->add_option("--hbar", tc.hbar_s, "spectral shift for phi_alpha");
    stt->add_option("--out", tc.out, "CSV file (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (sv->parsed()) return cmd_verify(vc);
        if (si->parsed()) return cmd_integrate(ic);
        if (stt->parsed()) return cmd_table(tc);
    } catch (const etop::UnknownIdentity& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const etop::ConstraintViolation& e) {
        std::cerr << "error: ConstraintViolation: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
