#pragma once

// Experiment commands behind the command-line runner.  Each fills a Summary and writes
// its CSV tables into the output directory.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "fbdsde/config.hpp"
#include "fbdsde/fbdsde.hpp"

namespace fbdsde::cli {

namespace fs = std::filesystem;

struct Context {
    ExperimentConfig cfg;
    fs::path out;
    Summary summary;

    CsvWriter csv(const std::string& name, std::vector<std::string> header) {
        summary.artifacts.push_back(name);
        return CsvWriter(out / name, summary.provenance, std::move(header));
    }
    const Json& check() const { return cfg.check.is_null() ? empty_ : cfg.check; }

private:
    inline static const Json empty_ = Json::object();
};

namespace detail {

inline std::vector<int> ints(const Json& j, const std::string& where) {
    std::vector<int> out;
    for (double x : fbdsde::detail::vec(j, where)) {
        if (x != std::floor(x)) throw ConfigError(where + ": expected integers");
        out.push_back(static_cast<int>(x));
    }
    return out;
}

inline LinearSystem model_or(const Context& ctx, const char* fallback) {
    return parse_linear_system(ctx.cfg.model.is_null() ? Json{{"builtin", fallback}} : ctx.cfg.model);
}

inline void write_fields(Context& ctx, const std::string& name, const Lattice& lat, const LatticeQuadruple& q,
                         const char* names[4]) {
    std::vector<std::string> header = {"k", "t", "index", names[0], names[1]};
    for (int c = 0; c < q.l; ++c) header.push_back(std::string(names[2]) + "_" + std::to_string(c));
    for (int c = 0; c < q.d; ++c) header.push_back(std::string(names[3]) + "_" + std::to_string(c));
    auto w = ctx.csv(name, header);
    for (int k = 0; k <= lat.steps(); ++k)
        for (std::size_t i = 0; i < lat.node_size(k); ++i) {
            const NodeValues s = q.at(k, i);
            std::vector<CsvWriter::Cell> row = {k, lat.grid().node(k), i, s.y, s.Y};
            for (int c = 0; c < q.l; ++c) row.emplace_back(s.z[c]);
            for (int c = 0; c < q.d; ++c) row.emplace_back(s.Z[c]);
            w.row(row);
        }
}

}  // namespace detail

// ---- ito-check ----
// mode "deterministic": constant beta, gamma = delta = 0, pathwise residual must vanish.
// mode "brownian": alpha = W over a list of step counts; the mean-square pathwise
// residual must fall like dt (slope within the band).
inline void ito_check(Context& ctx) {
    const auto& j = ctx.check();
    fbdsde::detail::only_keys(j, {"mode", "alpha0", "beta", "gamma", "delta", "paths", "steps", "tolerance", "slope_band"}, "check");
    const auto mode = fbdsde::detail::get_or<std::string>(j, "mode", "deterministic", "check");
    const auto paths = fbdsde::detail::get_or<std::size_t>(j, "paths", 2000, "check");
    const double T = ctx.cfg.horizon;
    if (mode == "deterministic") {
        const double a0 = fbdsde::detail::get_or(j, "alpha0", 1.0, "check");
        const double beta = fbdsde::detail::get_or(j, "beta", 0.0, "check");
        const double gamma = fbdsde::detail::get_or(j, "gamma", 0.0, "check");
        const double delta = fbdsde::detail::get_or(j, "delta", 0.0, "check");
        const double tol = fbdsde::detail::get_or(j, "tolerance", 1e-12, "check");
        if (gamma != 0.0 || delta != 0.0) throw ConfigError("check: deterministic mode needs gamma = delta = 0");
        const TimeGrid grid(T, ctx.cfg.steps);
        const auto noise = sample_noise(grid, 1, 1, paths, ctx.cfg.seed);
        const double b[] = {beta}, z[] = {0.0}, a[] = {a0};
        const auto r = ito_residual(a, DiscretePath::constant(grid, b), DiscretePath::constant(grid, z),
                                    DiscretePath::constant(grid, z), noise);
        auto w = ctx.csv("ito_residual.csv", {"N", "dt", "pathwise_max", "pathwise_rms", "expectation"});
        w.row({grid.steps(), grid.dt(), r.pathwise_max, r.pathwise_rms, r.expectation});
        ctx.summary.add("pathwise residual", r.max_abs(), tol, r.max_abs() <= tol);
        return;
    }
    if (mode != "brownian") throw ConfigError("check.mode: expected 'deterministic' or 'brownian'");
    const auto steps = j.contains("steps") ? detail::ints(j["steps"], "check.steps") : std::vector<int>{8, 16, 32, 64};
    const double band = fbdsde::detail::get_or(j, "slope_band", 0.25, "check");
    std::vector<double> dts, ms;
    auto w = ctx.csv("ito_residual.csv", {"N", "dt", "pathwise_ms", "expectation", "expectation_stderr"});
    for (int N : steps) {
        const TimeGrid grid(T, N);
        const auto noise = sample_noise(grid, 1, 1, paths, ctx.cfg.seed);
        const double one[] = {1.0}, zero[] = {0.0};
        const auto r = ito_residual(zero, DiscretePath::constant(grid, zero), DiscretePath::constant(grid, zero),
                                    DiscretePath::constant(grid, one), noise);
        dts.push_back(grid.dt());
        ms.push_back(r.pathwise_ms);
        w.row({N, grid.dt(), r.pathwise_ms, r.expectation, r.expectation_stderr});
    }
    const auto fit = fit_slope(dts, ms);
    ctx.summary.add("log-log slope of mean-square residual vs dt", fit.slope, 1.0,
                    fit.defined && std::abs(fit.slope - 1.0) <= band, "band " + format_double(band));
}

// ---- assumptions ----
inline void assumptions(Context& ctx) {
    const auto& j = ctx.check();
    fbdsde::detail::only_keys(j, {"probes", "variant", "derivative_tol"}, "check");
    const int probes = fbdsde::detail::get_or(j, "probes", 10000, "check");
    const auto variant = fbdsde::detail::get_or<std::string>(j, "variant", "decreasing", "check");
    if (variant != "decreasing" && variant != "increasing") throw ConfigError("check.variant: expected 'decreasing' or 'increasing'");
    const double dtol = fbdsde::detail::get_or(j, "derivative_tol", 1e-5, "check");
    const LinearSystem s = detail::model_or(ctx, "degenerate");
    const CoefficientSet c = to_coefficients(s);
    const double T = ctx.cfg.horizon;

    const auto der = check_derivatives(c, 64, ctx.cfg.seed, 1e-4, T);
    ctx.summary.add("derivative consistency", der.max_rel_error, dtol, der.max_rel_error < dtol, der.worst);
    const auto mono = check_monotone(c, probes, ctx.cfg.seed, variant == "decreasing" ? MonotoneVariant::decreasing : MonotoneVariant::increasing, T);
    ctx.summary.add("monotonicity margin", mono.worst_margin, 0.0, mono.pass,
                    "h margin " + format_double(mono.worst_h_margin) + ", sharpest mu " + format_double(mono.sharpest_mu));
    const auto lip = check_lipschitz_bounds(c, probes, ctx.cfg.seed, T);
    if (s.constants.lipschitz > 0.0 || s.constants.derivative_bound > 0.0)
        ctx.summary.add("Lipschitz and derivative bounds", std::max(lip.ratio, lip.derivative_ratio), 1.0, lip.pass);
    const auto spec = monotone_spectrum(s, fbdsde::detail::frozen_control(s.domain));
    ctx.summary.details["monotone_spectrum"] = Json{
        {"min_eigenvalue", spec.min_eigenvalue}, {"max_eigenvalue", spec.max_eigenvalue}, {"class", to_string(spec.cls)}};
    ctx.summary.details["lipschitz"] = Json{{"max_quotient", lip.max_quotient}, {"max_derivative", lip.max_derivative}};
    auto w = ctx.csv("assumptions.csv", {"quantity", "value"});
    w.row({"derivative_max_rel_error", der.max_rel_error});
    w.row({"monotone_worst_margin", mono.worst_margin});
    w.row({"monotone_worst_h_margin", mono.worst_h_margin});
    w.row({"lipschitz_max_quotient", lip.max_quotient});
    w.row({"max_derivative", lip.max_derivative});
    w.row({"spectrum_min", spec.min_eigenvalue});
    w.row({"spectrum_max", spec.max_eigenvalue});
}

// ---- solve ----
inline void solve(Context& ctx) {
    const auto& j = ctx.check();
    fbdsde::detail::only_keys(j, {"control", "residual_factor"}, "check");
    const LinearSystem s = detail::model_or(ctx, "degenerate");
    const CoefficientSet c = to_coefficients(s);
    const Lattice lat(TimeGrid(ctx.cfg.horizon, ctx.cfg.steps), s.d, s.l);
    const ControlPath u = ControlPath::constant(lat.grid(), fbdsde::detail::get_or(j, "control", 0.0, "check"), s.domain);
    const double factor = fbdsde::detail::get_or(j, "residual_factor", 10.0, "check");
    try {
        const auto rep = solve_lattice(c, u, lat, ctx.cfg.solver);
        const char* names[] = {"y", "Y", "z", "Z"};
        detail::write_fields(ctx, "fields.csv", lat, rep.solution, names);
        auto h = ctx.csv("picard_history.csv", {"iteration", "change"});
        for (std::size_t i = 0; i < rep.history.size(); ++i) h.row({i + 1, rep.history[i]});
        ctx.summary.add("Picard converged", rep.final_change, ctx.cfg.solver.picard_tol, true,
                        std::to_string(rep.iterations) + " iterations");
        const double bound = factor * ctx.cfg.solver.picard_tol;
        ctx.summary.add("residual of returned solution", rep.residuals.max(), bound, rep.residuals.max() <= bound);
        ctx.summary.details["Y0_mean"] = node_mean(rep.solution.Y[0]);
    } catch (const ConvergenceError& e) {
        ctx.summary.add("Picard converged", e.history.empty() ? 0.0 : e.history.back(), ctx.cfg.solver.picard_tol, false, e.what());
    }
}

// ---- verify-degenerate ----
inline void verify_degenerate(Context& ctx) {
    const auto& j = ctx.check();
    fbdsde::detail::only_keys(j, {"vgrid", "tolerance"}, "check");
    const auto vgrid = j.contains("vgrid") ? fbdsde::detail::vec(j["vgrid"], "check.vgrid") : std::vector<double>{-1, -0.5, 0, 0.5, 1};
    const double tol = fbdsde::detail::get_or(j, "tolerance", 1e-10, "check");
    const CoefficientSet c = degenerate_example_build();
    const Lattice lat(TimeGrid(ctx.cfg.horizon, ctx.cfg.steps), 1, 1);
    const ControlPath u = ControlPath::constant(lat.grid(), 0.0, c.domain);
    const auto zero = LatticeQuadruple::zeros(lat);
    const auto rs = residual_verify(c, u, zero, lat);
    const auto ra = adjoint_residual_verify(c, zero, u, zero, lat);
    ctx.summary.add("state residual of the zero quadruple", rs.max(), 1e-12, rs.max() < 1e-12);
    ctx.summary.add("adjoint residual of the zero quadruple", ra.max(), 1e-12, ra.max() < 1e-12);
    const auto sol = solve_lattice(c, u, lat, ctx.cfg.solver);
    ctx.summary.add("solved state is zero", sup_norm(sol.solution), 1e-12, sup_norm(sol.solution) < 1e-12);
    const auto adj = solve_adjoint(c, sol.solution, u, lat, ctx.cfg.solver);
    const auto rep = check_smp(c, sol.solution, u, adj.fields, vgrid, lat);
    ctx.summary.add("minimum Hamiltonian gap", rep.min_gap, 0.0, std::abs(rep.min_gap) <= tol);
    auto w = ctx.csv("hamiltonian_gap.csv", {"v", "min_gap", "half_v_squared"});
    double worst = 0.0;
    for (std::size_t i = 0; i < vgrid.size(); ++i) {
        w.row({vgrid[i], rep.min_gap_per_v[i], 0.5 * vgrid[i] * vgrid[i]});
        worst = std::max(worst, std::abs(rep.min_gap_per_v[i] - 0.5 * vgrid[i] * vgrid[i]));
    }
    ctx.summary.add("gap(v) = v^2/2", worst, tol, worst <= tol);
    ctx.summary.details["cost_at_optimum"] = expected_cost(c, lat, sol.solution, u);
}

// ---- spike-orders ----
inline void spike_orders(Context& ctx) {
    const auto& j = ctx.check();
    fbdsde::detail::only_keys(j, {"control", "first", "v", "windows"}, "check");
    const LinearSystem s = detail::model_or(ctx, "order_system");
    const CoefficientSet c = to_coefficients(s);
    const Lattice lat(TimeGrid(ctx.cfg.horizon, ctx.cfg.steps), s.d, s.l);
    const ControlPath u = ControlPath::constant(lat.grid(), fbdsde::detail::get_or(j, "control", 0.0, "check"), s.domain);
    const int first = fbdsde::detail::get_or(j, "first", 1, "check");
    const double v = fbdsde::detail::get_or(j, "v", 1.0, "check");
    const auto windows =
        j.contains("windows") ? detail::ints(j["windows"], "check.windows") : std::vector<int>{1, 2, 3, 4, 6, 8, 10};
    const auto rep = order_experiment(c, u, first, v, windows, lat, ctx.cfg.solver);
    std::vector<std::string> header = {"eps"};
    for (int q = 0; q < kOrderQuantities; ++q) header.emplace_back(to_string(static_cast<OrderQuantity>(q)));
    auto w = ctx.csv("orders.csv", header);
    for (std::size_t i = 0; i < rep.eps.size(); ++i) {
        std::vector<CsvWriter::Cell> row = {rep.eps[i]};
        for (int q = 0; q < kOrderQuantities; ++q) row.emplace_back(rep.values[q][i]);
        w.row(row);
    }
    auto sw = ctx.csv("slopes.csv", {"quantity", "slope", "stderr", "floor"});
    for (int q = 0; q < kOrderQuantities; ++q) {
        const auto oq = static_cast<OrderQuantity>(q);
        const auto& f = rep.slope(oq);
        sw.row({to_string(oq), f.slope, f.stderr, order_floor(oq)});
        ctx.summary.add(std::string("slope ") + to_string(oq), f.slope, order_floor(oq), f.defined && f.slope >= order_floor(oq));
    }
}

// ---- adjoint-check ----
inline void adjoint_check(Context& ctx) {
    const auto& j = ctx.check();
    fbdsde::detail::only_keys(j, {"control", "first", "steps", "v", "residual_factor"}, "check");
    const LinearSystem s = detail::model_or(ctx, "order_system");
    const CoefficientSet c = to_coefficients(s);
    const Lattice lat(TimeGrid(ctx.cfg.horizon, ctx.cfg.steps), s.d, s.l);
    const ControlPath u = ControlPath::constant(lat.grid(), fbdsde::detail::get_or(j, "control", 0.0, "check"), s.domain);
    const SpikeWindow win = node_window(lat.grid(), fbdsde::detail::get_or(j, "first", 1, "check"),
                                        fbdsde::detail::get_or(j, "steps", 1, "check"), fbdsde::detail::get_or(j, "v", 1.0, "check"));
    const double tol = fbdsde::detail::get_or(j, "residual_factor", 10.0, "check") * ctx.cfg.solver.picard_tol;
    const auto opt = solve_lattice(c, u, lat, ctx.cfg.solver).solution;
    const auto screen = screen_conventions(c, opt, u, spike_control(u, win), lat, ctx.cfg.solver, tol);
    auto w = ctx.csv("conventions.csv", {"convention", "duality_residual", "accepted"});
    for (const auto& sc : screen) {
        w.row({to_string(sc.convention), sc.residual, sc.accepted ? "yes" : "no"});
        ctx.summary.details["conventions"][to_string(sc.convention)] = Json{{"residual", format_double(sc.residual)},
                                                                        {"accepted", sc.accepted}};
    }
    ctx.summary.add("duality residual of the implemented adjoint", screen.front().residual, tol, screen.front().accepted);
    const auto adj = solve_adjoint(c, opt, u, lat, ctx.cfg.solver);
    const char* names[] = {"p", "q", "k", "h"};
    detail::write_fields(ctx, "adjoint.csv", lat, adj.fields, names);
}

// ---- smp-check ----
inline void smp_check(Context& ctx) {
    const auto& j = ctx.check();
    fbdsde::detail::only_keys(j, {"control", "vgrid", "tolerance", "x0"}, "check");
    const double v0 = fbdsde::detail::get_or(j, "control", 0.0, "check");
    const double tol = fbdsde::detail::get_or(j, "tolerance", 1e-10, "check");
    SmpReport rep;
    std::vector<double> vgrid;
    if (!ctx.cfg.spde.is_null()) {
        // quasilinear model: Hamiltonian with z = 0 along its own lattice
        const SpdeModel m = validate(make_spde_model(parse_spde(ctx.cfg.spde)));
        const Lattice lat(TimeGrid(m.horizon, ctx.cfg.steps), 1, 1);
        vgrid = j.contains("vgrid") ? fbdsde::detail::vec(j["vgrid"], "check.vgrid") : ControlDomain::interval(-1, 1).sample(9);
        rep = check_smp_spde(m, fbdsde::detail::get_or(j, "x0", 0.0, "check"), ControlPath::constant(lat.grid(), v0), vgrid, lat,
                             ctx.cfg.solver)
                  .report;
    } else {
        if (j.contains("x0")) throw ConfigError("check.x0 applies to spde models only");
        const LinearSystem s = detail::model_or(ctx, "degenerate");
        const CoefficientSet c = to_coefficients(s);
        const Lattice lat(TimeGrid(ctx.cfg.horizon, ctx.cfg.steps), s.d, s.l);
        const ControlPath u = ControlPath::constant(lat.grid(), v0, s.domain);
        vgrid = j.contains("vgrid") ? fbdsde::detail::vec(j["vgrid"], "check.vgrid") : s.domain.sample(9);
        const auto opt = solve_lattice(c, u, lat, ctx.cfg.solver).solution;
        const auto adj = solve_adjoint(c, opt, u, lat, ctx.cfg.solver);
        rep = check_smp(c, opt, u, adj.fields, vgrid, lat);
    }
    auto w = ctx.csv("hamiltonian_gap.csv", {"v", "min_gap"});
    for (std::size_t i = 0; i < vgrid.size(); ++i) w.row({vgrid[i], rep.min_gap_per_v[i]});
    ctx.summary.add("minimum Hamiltonian gap", rep.min_gap, -tol, rep.pass(tol),
                    rep.min_gap < -tol ? "at node " + std::to_string(rep.worst_node) + ", v = " + format_double(rep.worst_v) : "");
}

// ---- game-nash ----
inline void game_nash(Context& ctx) {
    const auto& j = ctx.check();
    fbdsde::detail::only_keys(j, {"paths", "k_sigma"}, "check");
    const Json gj = ctx.cfg.game.is_null() ? Json{{"builtin", "derived_scalar"}} : ctx.cfg.game;
    const GameSpec g = parse_game(gj);
    const GameVariant variant = parse_game_variant(fbdsde::detail::get_or<std::string>(gj, "variant", "transposed", "game"));
    const double ks = fbdsde::detail::get_or(j, "k_sigma", 3.0, "check");
    const auto paths = fbdsde::detail::get_or<std::size_t>(j, "paths", ctx.cfg.solver.mc_paths, "check");
    const Lattice lat(TimeGrid(ctx.cfg.horizon, ctx.cfg.steps), 1, 1);
    const auto comm = check_commutation(g);
    ctx.summary.add("commutation", comm.worst_defect, 1e-10, comm.pass);
    const auto cand = solve_game(g, lat, ctx.cfg.solver, variant);
    ctx.summary.details["aggregation_defect"] = cand.aggregation_defect;
    ctx.summary.details["variant"] = to_string(variant);
    const auto noise = sample_noise(lat.grid(), 1, 1, paths, ctx.cfg.seed, {ctx.cfg.solver.antithetic});
    const auto rep = verify_nash(g, cand, standard_deviations(lat.grid()), lat, noise, ks);
    auto w = ctx.csv("nash.csv", {"player", "deviation", "difference", "stderr", "exact_difference", "first_order",
                                  "first_order_stderr", "duality", "duality_stderr", "exact_duality"});
    double worst = std::numeric_limits<double>::infinity(), worst_first = 0.0, worst_dual = 0.0;
    for (const auto& e : rep.entries) {
        w.row({e.player, e.deviation, e.difference.mean, e.difference.stderr, e.exact_difference, e.first_order.mean,
               e.first_order.stderr, e.duality.mean, e.duality.stderr, e.exact_duality});
        worst = std::min(worst, e.difference.mean / std::max(e.difference.stderr, 1e-300));
        worst_first = std::max(worst_first, std::abs(e.first_order.mean) - ks * e.first_order.stderr);
        worst_dual = std::max(worst_dual, std::abs(e.duality.mean) - ks * e.duality.stderr);
    }
    ctx.summary.add("min cost difference / stderr", worst, -ks, rep.pass);
    ctx.summary.add("first-order cancellation within k stderr", worst_first, 1e-12, worst_first <= 1e-12);
    ctx.summary.add("duality cancellation within k stderr", worst_dual, 1e-12, worst_dual <= 1e-12);
}

// ---- spde-grid ----
inline void spde_grid(Context& ctx) {
    const auto& j = ctx.check();
    fbdsde::detail::only_keys(j, {"t", "x", "dt", "fd_level", "control", "rel_tol", "k_sigma"}, "check");
    if (ctx.cfg.spde.is_null()) throw ConfigError("spde-grid needs an 'spde' table");
    const SpdeModel m = validate(make_spde_model(parse_spde(ctx.cfg.spde)));
    const auto ts = j.contains("t") ? fbdsde::detail::vec(j["t"], "check.t") : std::vector<double>{0.0, 0.2, 0.4, 0.6, 0.8};
    const auto xs = j.contains("x") ? fbdsde::detail::vec(j["x"], "check.x") : std::vector<double>{-1, -0.5, 0, 0.5, 1};
    const double dt = fbdsde::detail::get_or(j, "dt", 0.05, "check");
    const int level = fbdsde::detail::get_or(j, "fd_level", 3, "check");
    const double v = fbdsde::detail::get_or(j, "control", 0.0, "check");
    const double rel = fbdsde::detail::get_or(j, "rel_tol", 0.02, "check");
    const double ks = fbdsde::detail::get_or(j, "k_sigma", 3.0, "check");
    const TimeControl control = [v](double) { return v; };
    const bool deterministic = ctx.cfg.spde.value("g0", 0.0) == 0.0 && ctx.cfg.spde.value("gx", 0.0) == 0.0 &&
                               ctx.cfg.spde.value("gy", 0.0) == 0.0 && ctx.cfg.spde.value("gz", 0.0) == 0.0;
    FdTable fd;
    if (deterministic) fd = fd_comparator(m, control, xs, ts, level);
    auto w = ctx.csv("u_grid.csv", {"t", "x", "u_mc", "stderr", "u_fd"});
    double worst = 0.0;
    std::uint64_t stream = 0;
    for (std::size_t a = 0; a < ts.size(); ++a)
        for (std::size_t b = 0; b < xs.size(); ++b) {
            const std::size_t ia = deterministic ? std::size_t(std::find(fd.t.begin(), fd.t.end(), ts[a]) - fd.t.begin()) : 0;
            const auto e = evaluate_u(m, control, ts[a], xs[b], dt, ctx.cfg.solver, ctx.cfg.seed + 7919 * ++stream);
            const double ufd = deterministic ? fd.u[ia][b] : std::numeric_limits<double>::quiet_NaN();
            w.row({ts[a], xs[b], e.mean, e.stderr, ufd});
            if (deterministic) worst = std::max(worst, std::abs(e.mean - ufd) / std::max(ks * e.stderr, rel * std::abs(ufd)));
        }
    if (deterministic)
        ctx.summary.add("|u_mc - u_fd| / max(k stderr, rel |u_fd|)", worst, 1.0, worst < 1.0);
    else
        ctx.summary.details["note"] = "backward noise present: no finite-difference comparison";
}

// ---- tree-vs-mc ----
inline void tree_vs_mc(Context& ctx) {
    const auto& j = ctx.check();
    fbdsde::detail::only_keys(j, {"x0", "control", "k_sigma"}, "check");
    if (ctx.cfg.spde.is_null()) throw ConfigError("tree-vs-mc needs an 'spde' table");
    const SpdeModel m = validate(make_spde_model(parse_spde(ctx.cfg.spde)));
    const double x0 = fbdsde::detail::get_or(j, "x0", 0.0, "check");
    const double v = fbdsde::detail::get_or(j, "control", 0.0, "check");
    const double ks = fbdsde::detail::get_or(j, "k_sigma", 3.0, "check");
    const Lattice lat(TimeGrid(m.horizon, ctx.cfg.steps), 1, 1);
    const ControlPath u = ControlPath::constant(lat.grid(), v);
    const auto tree = solve_lattice(spde_coefficients(m, x0), u, lat, ctx.cfg.solver);
    const double y0 = node_mean(tree.solution.Y[0]);
    const auto sys = spde_to_fbdsde(m, 0.0, x0);
    const auto noise = sample_noise(lat.grid(), 1, 1, ctx.cfg.solver.mc_paths, ctx.cfg.seed, {ctx.cfg.solver.antithetic});
    const auto mc = solve_partially_coupled_mc(sys, u, noise, ctx.cfg.solver);
    SolverConfig full = ctx.cfg.solver;
    full.basis = BasisKind::full_sigma;
    const auto exact = solve_partially_coupled_mc(sys, u, lattice_bundle(lat), full);
    auto w = ctx.csv("tree_vs_mc.csv", {"quantity", "value", "stderr"});
    w.row({"lattice_Y0_mean", y0, 0.0});
    w.row({"mc_Y0_mean", mc.y0.mean, mc.y0.stderr});
    w.row({"full_basis_on_atoms_Y0_mean", exact.y0.mean, 0.0});
    ctx.summary.add("|Y0_mc - Y0_lattice| / stderr", std::abs(mc.y0.mean - y0) / mc.y0.stderr, ks,
                    std::abs(mc.y0.mean - y0) <= ks * mc.y0.stderr);
    ctx.summary.add("full-basis regression on the atoms equals the lattice", std::abs(exact.y0.mean - y0), 1e-10,
                    std::abs(exact.y0.mean - y0) <= 1e-10);
}

}  // namespace fbdsde::cli
