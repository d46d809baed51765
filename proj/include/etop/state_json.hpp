#pragma once

// JSON (de)serialization of model states, matching the scheme used by the
// command-line tools: complex numbers are 2-element [re, im] arrays, matrix
// values are row-major nested arrays of those.

#include <json.hpp>

#include "etop/tops.hpp"

namespace etop {

using json = nlohmann::ordered_json;

inline json to_json(cplx c) { return json::array({c.real(), c.imag()}); }

inline cplx cplx_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2)
        throw std::invalid_argument("expected a [re, im] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline json to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(to_json(m(i, j)));
        rows.push_back(row);
    }
    return rows;
}

inline Mat mat_from_json(const json& j, int dim) {
    Mat m(dim, dim);
    if (int(j.size()) != dim) throw std::invalid_argument("matrix value has wrong row count");
    for (int i = 0; i < dim; ++i) {
        if (int(j[size_t(i)].size()) != dim)
            throw std::invalid_argument("matrix value has wrong column count");
        for (int k = 0; k < dim; ++k) m(i, k) = cplx_from_json(j[size_t(i)][size_t(k)]);
    }
    return m;
}

inline const char* model_name(const ModelState& st) {
    return std::visit(
        [](const auto& s) -> const char* {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, TopState>) return "nonrel-top";
            else if constexpr (std::is_same_v<T, RelTopState>) return "rel-top";
            else if constexpr (std::is_same_v<T, MatrixTopState>)
                return s.eta ? "matrix-rel-top" : "matrix-top";
            else if constexpr (std::is_same_v<T, GyrostatState>) return "gyrostat";
            else if constexpr (std::is_same_v<T, GaudinState>) return "gaudin";
            else return "pvi-scalar";
        },
        st);
}

inline json state_to_json(const ModelState& st) {
    json j;
    j["model"] = model_name(st);
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            j["tau"] = to_json(s.tau.tau);
            if constexpr (std::is_same_v<T, TopState>) {
                j["N"] = s.n;
                json coords = json::array();
                for (int a = 0; a < s.n * s.n; ++a)
                    coords.push_back({{"alpha", {a / s.n, a % s.n}},
                                      {"value", to_json(s.coords[size_t(a)])}});
                j["coords"] = coords;
                j["flags"] = {{"z2_reduced", s.z2_reduced}, {"traceless", s.traceless}};
            } else if constexpr (std::is_same_v<T, RelTopState>) {
                j["N"] = s.n;
                j["eta"] = to_json(s.eta);
                json coords = json::array();
                for (int a = 0; a < s.n * s.n; ++a)
                    coords.push_back({{"alpha", {a / s.n, a % s.n}},
                                      {"value", to_json(s.coords[size_t(a)])}});
                j["coords"] = coords;
                j["flags"] = {{"z2_reduced", s.z2_reduced}};
            } else if constexpr (std::is_same_v<T, MatrixTopState>) {
                j["N"] = s.n;
                j["M"] = s.m;
                if (s.eta) j["eta"] = to_json(*s.eta);
                json coords = json::array();
                for (int a = 0; a < s.n * s.n; ++a)
                    coords.push_back({{"alpha", {a / s.n, a % s.n}},
                                      {"value", to_json(s.coords[size_t(a)])}});
                j["coords"] = coords;
                j["flags"] = {{"z2_reduced", s.z2_reduced}};
            } else if constexpr (std::is_same_v<T, GyrostatState>) {
                j["N"] = 2;
                j["M"] = s.m;
                json nu = json::array();
                for (int a = 0; a < 4; ++a) nu.push_back(to_json(s.nu[size_t(a)]));
                j["nu"] = nu;
                json coords = json::array();
                for (int a = 0; a < 3; ++a) {
                    const ModeIndex mode = tdetail::pauli_modes()[size_t(a)];
                    json val = (s.m == 1) ? to_json(s.s[size_t(a)](0, 0)) : to_json(s.s[size_t(a)]);
                    coords.push_back({{"alpha", {mode.a1, mode.a2}}, {"value", val}});
                }
                j["coords"] = coords;
            } else if constexpr (std::is_same_v<T, GaudinState>) {
                j["N"] = s.n;
                json coords = json::array();
                coords.push_back({{"alpha", {0, 0}}, {"value", to_json(s.s0)}});
                for (int a = 1; a < s.n * s.n; ++a)
                    coords.push_back({{"alpha", {a / s.n, a % s.n}},
                                      {"value", to_json(s.a[size_t(a)])}});
                j["coords"] = coords;
                j["flags"] = {{"z2_reduced", s.z2_reduced}};
            } else {
                j["u0"] = to_json(s.u);
                j["udot0"] = to_json(s.udot);
                json nu = json::array();
                for (int a = 0; a < 4; ++a) nu.push_back(to_json(s.nu[size_t(a)]));
                j["nu"] = nu;
            }
        },
        st);
    return j;
}

namespace jdetail {

inline int coord_slot(const json& entry, int n) {
    const auto& al = entry.at("alpha");
    const int a1 = al.at(0).get<int>(), a2 = al.at(1).get<int>();
    if (a1 < 0 || a1 >= n || a2 < 0 || a2 >= n)
        throw std::invalid_argument("coords: alpha out of range");
    return a1 * n + a2;
}

} // namespace jdetail

/// Parse a state file. `model_hint` comes from the --model flag and must
/// agree with the file's own "model" field.
inline ModelState state_from_json(const json& j, const std::string& model_hint = {}) {
    const std::string model = j.at("model").get<std::string>();
    if (!model_hint.empty() && model_hint != model && !(model_hint == "pvi" && model == "gyrostat"))
        throw std::invalid_argument("state file model '" + model + "' does not match --model '" +
                                    model_hint + "'");
    const Modulus tau(cplx_from_json(j.at("tau")));

    if (model == "nonrel-top" || model == "rel-top") {
        const int n = j.at("N").get<int>();
        std::vector<cplx> coords(size_t(n * n), 0.0);
        for (const auto& e : j.at("coords"))
            coords[size_t(jdetail::coord_slot(e, n))] = cplx_from_json(e.at("value"));
        const bool z2 = j.contains("flags") && j["flags"].value("z2_reduced", false);
        if (model == "nonrel-top") {
            TopState s{n, tau, coords, j.contains("flags") && j["flags"].value("traceless", true),
                       z2};
            return s;
        }
        RelTopState s{n, tau, cplx_from_json(j.at("eta")), coords, z2};
        return s;
    }
    if (model == "matrix-top" || model == "matrix-rel-top") {
        const int n = j.at("N").get<int>();
        const int m = j.at("M").get<int>();
        MatrixTopState s{n, m, tau, std::nullopt, std::vector<Mat>(size_t(n * n), Mat::Zero(m, m)),
                         false};
        if (model == "matrix-rel-top") s.eta = cplx_from_json(j.at("eta"));
        for (const auto& e : j.at("coords"))
            s.coords[size_t(jdetail::coord_slot(e, n))] = mat_from_json(e.at("value"), m);
        s.z2_reduced = j.contains("flags") && j["flags"].value("z2_reduced", false);
        return s;
    }
    if (model == "gyrostat" || model == "pvi") {
        const int m = j.value("M", 1);
        GyrostatState s{m, tau, {}, std::vector<Mat>(3, Mat::Zero(m, m))};
        if (j.contains("nu")) {
            for (int a = 0; a < 4; ++a) s.nu[size_t(a)] = cplx_from_json(j.at("nu")[size_t(a)]);
        }
        for (const auto& e : j.at("coords")) {
            const auto& al = e.at("alpha");
            const ModeIndex mode{al.at(0).get<int>(), al.at(1).get<int>()};
            int slot = -1;
            for (int a = 0; a < 3; ++a)
                if (tdetail::pauli_modes()[size_t(a)] == mode) slot = a;
            if (slot < 0) throw std::invalid_argument("gyrostat coords: alpha must be a half-period mode");
            s.s[size_t(slot)] = (m == 1) ? cplx_from_json(e.at("value")) * Mat::Identity(1, 1)
                                         : mat_from_json(e.at("value"), m);
        }
        return s;
    }
    if (model == "gaudin") {
        const int n = j.at("N").get<int>();
        GaudinState s{n, tau, 0.0, std::vector<Mat>(size_t(n * n), Mat::Zero(n, n)), false};
        for (const auto& e : j.at("coords")) {
            const int slot = jdetail::coord_slot(e, n);
            if (slot == 0)
                s.s0 = cplx_from_json(e.at("value"));
            else
                s.a[size_t(slot)] = mat_from_json(e.at("value"), n);
        }
        s.z2_reduced = !j.contains("flags") || j["flags"].value("z2_reduced", true);
        return s;
    }
    if (model == "pvi-scalar") {
        PviScalarState s{tau, cplx_from_json(j.at("u0")), cplx_from_json(j.at("udot0")), {}};
        if (j.contains("nu"))
            for (int a = 0; a < 4; ++a) s.nu[size_t(a)] = cplx_from_json(j.at("nu")[size_t(a)]);
        return s;
    }
    throw std::invalid_argument("unknown model '" + model + "'");
}

/// Schema-level validation: states flagged z2_reduced must actually sit on
/// the constraint surface.
inline void validate_state(const ModelState& st, double tol = 1e-9) {
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, TopState> || std::is_same_v<T, RelTopState> ||
                          std::is_same_v<T, GaudinState>) {
                if (s.z2_reduced && z2_check(s) > tol)
                    throw ConstraintViolation("state flagged z2_reduced violates the constraint");
            } else if constexpr (std::is_same_v<T, MatrixTopState>) {
                if (s.z2_reduced && (z2_check(s) > tol || s0_defect(s) > tol))
                    throw ConstraintViolation("state flagged z2_reduced violates the constraint");
            }
        },
        st);
}

} // namespace etop
