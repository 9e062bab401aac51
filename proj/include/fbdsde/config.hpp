#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbdsde/game.hpp"
#include "fbdsde/io.hpp"
#include "fbdsde/smp.hpp"
#include "fbdsde/spde.hpp"

namespace fbdsde {

using Json = nlohmann::json;

namespace detail {

// Unknown keys are errors: a misspelt tolerance must not silently fall back to a default.
inline void only_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected a table");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
        if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
T get_or(const Json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

inline std::vector<double> vec(const Json& j, const std::string& where) {
    if (j.is_number()) return {j.get<double>()};
    if (!j.is_array()) throw ConfigError(where + ": expected a number or an array");
    std::vector<double> out;
    for (const auto& x : j) {
        if (!x.is_number()) throw ConfigError(where + ": expected numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

inline Eigen::MatrixXd matrix(const Json& j, int rows, int cols, const std::string& where) {
    Eigen::MatrixXd m(rows, cols);
    if (j.is_number()) {
        if (rows != 1 || cols != 1) throw ConfigError(where + ": expected a " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
        m(0, 0) = j.get<double>();
        return m;
    }
    if (!j.is_array() || static_cast<int>(j.size()) != rows) throw ConfigError(where + ": wrong number of rows");
    for (int r = 0; r < rows; ++r) {
        const auto row = vec(j[r], where);
        if (static_cast<int>(row.size()) != cols) throw ConfigError(where + ": wrong number of columns");
        for (int c = 0; c < cols; ++c) m(r, c) = row[c];
    }
    return m;
}

inline AffineRow affine_row(const Json& j, int m, const std::string& where) {
    only_keys(j, {"c0", "state", "control", "control_state"}, where);
    AffineRow r = AffineRow::zero(m);
    r.c0 = get_or(j, "c0", 0.0, where);
    r.control = get_or(j, "control", 0.0, where);
    if (j.contains("state")) r.state = vec(j["state"], where + ".state");
    if (j.contains("control_state")) r.control_state = vec(j["control_state"], where + ".control_state");
    if (static_cast<int>(r.state.size()) != m || static_cast<int>(r.control_state.size()) != m)
        throw ConfigError(where + ": rows need " + std::to_string(m) + " entries (y, Y, z.., Z..)");
    return r;
}

}  // namespace detail

inline SolverConfig parse_solver(const Json& j) {
    const std::string w = "solver";
    detail::only_keys(j, {"picard_max_iters", "picard_tol", "picard_relaxation", "anderson_depth", "basis", "poly_degree",
                          "features", "mc_paths", "antithetic"},
                      w);
    SolverConfig c;
    c.picard_max_iters = detail::get_or(j, "picard_max_iters", c.picard_max_iters, w);
    c.picard_tol = detail::get_or(j, "picard_tol", c.picard_tol, w);
    c.picard_relaxation = detail::get_or(j, "picard_relaxation", c.picard_relaxation, w);
    c.anderson_depth = detail::get_or(j, "anderson_depth", c.anderson_depth, w);
    c.poly_degree = detail::get_or(j, "poly_degree", c.poly_degree, w);
    c.mc_paths = detail::get_or(j, "mc_paths", c.mc_paths, w);
    c.antithetic = detail::get_or(j, "antithetic", c.antithetic, w);
    const auto basis = detail::get_or<std::string>(j, "basis", "polynomial", w);
    if (basis == "polynomial") c.basis = BasisKind::polynomial;
    else if (basis == "full_sigma") c.basis = BasisKind::full_sigma;
    else throw ConfigError("solver.basis: expected 'polynomial' or 'full_sigma'");
    if (j.contains("features")) {
        c.features.clear();
        for (const auto& f : j["features"]) {
            const auto s = f.get<std::string>();
            if (s == "increment") c.features.push_back(BackwardFeature::increment);
            else if (s == "tail") c.features.push_back(BackwardFeature::tail);
            else throw ConfigError("solver.features: unknown feature '" + s + "'");
        }
    }
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("solver: ") + e.what());
    }
    return c;
}

/// `{"builtin": "degenerate" | "order_system"}` or an explicit linear-quadratic system.
inline LinearSystem parse_linear_system(const Json& j) {
    const std::string w = "model";
    if (j.contains("builtin")) {
        detail::only_keys(j, {"builtin", "x0"}, w);
        const auto name = j["builtin"].get<std::string>();
        LinearSystem s;
        if (name == "degenerate") s = degenerate_example_system();
        else if (name == "order_system") s = designated_order_system();
        else throw ConfigError("model.builtin: unknown system '" + name + "'");
        s.x0 = detail::get_or(j, "x0", s.x0, w);
        return s;
    }
    detail::only_keys(j, {"d", "l", "x0", "f", "F", "g", "G", "h0", "h1", "cost_state", "cost_linear", "cost_control", "phi2",
                          "phi1", "gamma2", "gamma1", "domain", "constants"},
                      w);
    LinearSystem s = LinearSystem::zero(detail::get_or(j, "d", 1, w), detail::get_or(j, "l", 1, w));
    if (s.d < 1 || s.l < 1 || s.d > kMaxNoiseDim || s.l > kMaxNoiseDim) throw ConfigError("model: d and l must lie in 1..3");
    const int m = s.dim();
    s.x0 = detail::get_or(j, "x0", 0.0, w);
    if (j.contains("f")) s.f = detail::affine_row(j["f"], m, w + ".f");
    if (j.contains("F")) s.F = detail::affine_row(j["F"], m, w + ".F");
    auto rows = [&](const char* key, std::vector<AffineRow>& out, int count) {
        if (!j.contains(key)) return;
        const auto& a = j[key];
        if (!a.is_array() || static_cast<int>(a.size()) != count)
            throw ConfigError(w + "." + key + ": expected " + std::to_string(count) + " rows");
        for (int i = 0; i < count; ++i) out[i] = detail::affine_row(a[i], m, w + "." + key);
    };
    rows("g", s.g, s.d);
    rows("G", s.G, s.l);
    s.h0 = detail::get_or(j, "h0", 0.0, w);
    s.h1 = detail::get_or(j, "h1", 0.0, w);
    if (j.contains("cost_state")) {
        const auto W = detail::matrix(j["cost_state"], m, m, w + ".cost_state");
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) s.cost_state[a][b] = W(a, b);
    }
    if (j.contains("cost_linear")) {
        s.cost_linear = detail::vec(j["cost_linear"], w + ".cost_linear");
        if (static_cast<int>(s.cost_linear.size()) != m) throw ConfigError(w + ".cost_linear: wrong length");
    }
    s.cost_control = detail::get_or(j, "cost_control", 0.0, w);
    s.phi2 = detail::get_or(j, "phi2", 0.0, w);
    s.phi1 = detail::get_or(j, "phi1", 0.0, w);
    s.gamma2 = detail::get_or(j, "gamma2", 0.0, w);
    s.gamma1 = detail::get_or(j, "gamma1", 0.0, w);
    if (j.contains("domain")) {
        const auto& d = j["domain"];
        detail::only_keys(d, {"interval", "points"}, w + ".domain");
        if (d.contains("interval")) {
            const auto iv = detail::vec(d["interval"], w + ".domain.interval");
            if (iv.size() != 2) throw ConfigError(w + ".domain.interval: expected [lo, hi]");
            s.domain = ControlDomain::interval(iv[0], iv[1]);
        } else if (d.contains("points")) {
            s.domain = ControlDomain::finite(detail::vec(d["points"], w + ".domain.points"));
        }
    }
    if (j.contains("constants")) {
        const auto& c = j["constants"];
        detail::only_keys(c, {"lipschitz", "monotonicity", "derivative_bound"}, w + ".constants");
        s.constants.lipschitz = detail::get_or(c, "lipschitz", 0.0, w);
        s.constants.monotonicity = detail::get_or(c, "monotonicity", 0.0, w);
        s.constants.derivative_bound = detail::get_or(c, "derivative_bound", 0.0, w);
    }
    try {
        s.validate();
    } catch (const ModelError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    return s;
}

inline GameVariant parse_game_variant(const std::string& s) {
    if (s == "transposed") return GameVariant::transposed;
    if (s == "reduced_forward") return GameVariant::reduced_forward;
    if (s == "proof_adjoint") return GameVariant::proof_adjoint;
    throw ConfigError("game.variant: expected transposed, reduced_forward or proof_adjoint");
}

/// `{"builtin": "derived_scalar"}` or explicit matrices (nested arrays; scalars allowed
/// when n = k = 1).  alpha and beta are constant vectors.
inline GameSpec parse_game(const Json& j) {
    const std::string w = "game";
    if (j.contains("builtin")) {
        detail::only_keys(j, {"builtin", "variant"}, w);
        if (j["builtin"].get<std::string>() != "derived_scalar") throw ConfigError("game.builtin: unknown game");
        return derived_scalar_game();
    }
    detail::only_keys(j, {"n", "k", "A", "C", "D", "E", "B1", "B2", "R1", "R2", "P1", "P2", "Q1", "Q2", "N1", "N2", "a",
                          "alpha", "beta", "variant"},
                      w);
    const int n = detail::get_or(j, "n", 1, w), k = detail::get_or(j, "k", 1, w);
    GameSpec g = GameSpec::zero(n, k);
    auto mat = [&](const char* key, Eigen::MatrixXd& m, int r, int c) {
        if (j.contains(key)) m = detail::matrix(j[key], r, c, w + "." + key);
    };
    mat("A", g.A, n, n);
    mat("C", g.C, n, n);
    mat("D", g.D, n, n);
    mat("E", g.E, n, n);
    mat("B1", g.B1, n, k);
    mat("B2", g.B2, n, k);
    mat("R1", g.R1, n, n);
    mat("R2", g.R2, n, n);
    mat("P1", g.P1, n, n);
    mat("P2", g.P2, n, n);
    mat("Q1", g.Q1, n, n);
    mat("Q2", g.Q2, n, n);
    mat("N1", g.N1, k, k);
    mat("N2", g.N2, k, k);
    auto vector_of = [&](const char* key) -> std::optional<Eigen::VectorXd> {
        if (!j.contains(key)) return std::nullopt;
        const auto v = detail::vec(j[key], w + "." + key);
        if (static_cast<int>(v.size()) != n) throw ConfigError(w + "." + key + ": expected " + std::to_string(n) + " entries");
        return Eigen::Map<const Eigen::VectorXd>(v.data(), n);
    };
    if (auto a = vector_of("a")) g.a = *a;
    if (auto a = vector_of("alpha")) g.alpha = [v = *a](double) { return v; };
    if (auto b = vector_of("beta")) g.beta = [v = *b](double) { return v; };
    try {
        g.validate();
    } catch (const ModelError& e) {
        throw ConfigError(std::string("game: ") + e.what());
    }
    return g;
}

inline SpdeParams parse_spde(const Json& j) {
    const std::string w = "spde";
    detail::only_keys(j, {"T", "b0", "bx", "bv", "s0", "sx", "f0", "fx", "fy", "fz", "fv", "g0", "gx", "gy", "gz", "h0", "h1",
                          "h2", "lx", "ly", "lz", "lv", "gamma2", "lipschitz_c", "alpha"},
                      w);
    SpdeParams p;
    p.horizon = detail::get_or(j, "T", p.horizon, w);
    double* fields[] = {&p.b0, &p.bx, &p.bv, &p.s0, &p.sx, &p.f0, &p.fx, &p.fy, &p.fz, &p.fv, &p.g0, &p.gx,
                        &p.gy, &p.gz, &p.h0, &p.h1, &p.h2, &p.lx, &p.ly, &p.lz, &p.lv, &p.gamma2, &p.lipschitz_c, &p.alpha};
    const char* names[] = {"b0", "bx", "bv", "s0", "sx", "f0", "fx", "fy", "fz", "fv", "g0", "gx",
                           "gy", "gz", "h0", "h1", "h2", "lx", "ly", "lz", "lv", "gamma2", "lipschitz_c", "alpha"};
    for (std::size_t i = 0; i < std::size(names); ++i) *fields[i] = detail::get_or(j, names[i], *fields[i], w);
    return p;
}

/// One experiment: common grid/solver/seed plus the sections a command needs.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    double horizon = 1.0;
    int steps = 3;
    SolverConfig solver;
    std::string out = "out";
    Json model, game, spde, check;  // null when absent

    Provenance provenance() const {
        SolverConfig s = solver;
        s.seed = seed;
        return {seed, horizon, steps, s};
    }
};

inline ExperimentConfig parse_experiment(const Json& j) {
    detail::only_keys(j, {"seed", "grid", "solver", "out", "model", "game", "spde", "check"}, "config");
    ExperimentConfig c;
    c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed, "config");
    if (j.contains("grid")) {
        detail::only_keys(j["grid"], {"T", "N"}, "grid");
        c.horizon = detail::get_or(j["grid"], "T", c.horizon, "grid");
        c.steps = detail::get_or(j["grid"], "N", c.steps, "grid");
        if (!(c.horizon > 0.0) || c.steps < 1) throw ConfigError("grid: need T > 0 and N >= 1");
    }
    if (j.contains("solver")) c.solver = parse_solver(j["solver"]);
    c.solver.seed = c.seed;
    c.out = detail::get_or<std::string>(j, "out", c.out, "config");
    for (auto [key, slot] : {std::pair{"model", &c.model}, {"game", &c.game}, {"spde", &c.spde}, {"check", &c.check}})
        if (j.contains(key)) *slot = j[key];
    return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    Json j;
    try {
        j = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return parse_experiment(j);
}

}  // namespace fbdsde
