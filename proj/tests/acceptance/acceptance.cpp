// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "fbdsde/fbdsde.hpp"
#include "linear_scheme.hpp"

using namespace fbdsde;

namespace {

// pinned tolerances
constexpr double kExactTol = 1e-12;      // residuals of exact zero solutions
constexpr double kGapTol = 1e-10;        // Hamiltonian gap against 1/2 v^2
constexpr double kOracleTol = 1e-10;     // lattice against the dense oracle
constexpr double kSigmas = 3.0;          // Monte Carlo comparisons
constexpr double kRelative = 0.02;       // finite-difference comparison floor
constexpr double kDualityFactor = 10.0;  // duality residual < factor * picard_tol
constexpr double kViBound = 1.0;         // fitted c in LHS >= -c eps^1.2
constexpr double kSlopeBand = 0.25;      // Ito slope within 1 +- band

struct Outcome {
    bool pass = false;
    std::string detail;
};

SolverConfig tight() {
    SolverConfig cfg;
    cfg.picard_tol = 1e-13;
    cfg.picard_max_iters = 500;
    cfg.anderson_depth = 3;
    return cfg;
}

std::string fmt(const char* f, auto... xs) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, xs...);
    return buf;
}

// ---- 1: degenerate example reproduction ----
Outcome degenerate_example() {
    const auto c = degenerate_example_build();
    const Lattice lat(make_grid(1.0, 3), 1, 1);
    const auto u = ControlPath::constant(lat.grid(), 0.0, c.domain);
    const auto zero = LatticeQuadruple::zeros(lat);
    const auto rs = residual_verify(c, u, zero, lat);
    const auto ra = adjoint_residual_verify(c, zero, u, zero, lat);
    const double res = std::max({rs.max(), ra.max(), rs.terminal_defect, rs.initial_defect, ra.terminal_defect,
                                 ra.initial_defect});
    const std::vector<double> vs = {-1.0, -0.5, 0.0, 0.5, 1.0};
    const auto smp = check_smp(c, zero, u, zero, vs, lat);
    double gap_err = 0.0;
    for (std::size_t j = 0; j < vs.size(); ++j) gap_err = std::max(gap_err, std::abs(smp.min_gap_per_v[j] - 0.5 * vs[j] * vs[j]));
    const bool ok = res < kExactTol && smp.min_gap == 0.0 && smp.worst_v == 0.0 && gap_err < kGapTol;
    return {ok, fmt("residual %.1e, min gap %.1e at v = %g, max |gap - v^2/2| %.1e", res, smp.min_gap, smp.worst_v, gap_err)};
}

// ---- 2: lattice against the dense oracle ----
Outcome oracle_equivalence() {
    std::vector<std::pair<std::string, LinearSystem>> systems;
    {
        LinearSystem s = LinearSystem::zero(1, 1);  // linear BDSDE, Y_T = 1
        s.F.c0 = 0.5;
        s.F.state = {0, 0.5, 0, 0};
        s.G[0].state = {0, 0.5, 0, 0};
        s.h0 = 1.0;
        systems.emplace_back("linear BDSDE", s);
    }
    {
        LinearSystem s = LinearSystem::zero(1, 1);
        s.x0 = 0.7;
        s.f = {0.1, {-0.3, 0.2, 0.1, -0.05}, 0.5, {0.1, 0, 0, 0}};
        s.g[0] = {0.2, {0.25, -0.1, 0.05, 0.1}, 0.0, {0, 0, 0, 0}};
        s.F = {-0.2, {0.15, 0.3, -0.1, 0.2}, 0.0, {0, 0, 0, 0}};
        s.G[0] = {0.05, {0.1, 0.2, 0.15, -0.1}, 0.3, {0, 0, 0, 0}};
        s.h0 = 0.3;
        s.h1 = 0.6;
        systems.emplace_back("coupled", s);
    }
    systems.emplace_back("order system", designated_order_system());
    systems.emplace_back("degenerate example", degenerate_example_system());
    double worst = 0.0;
    int runs = 0;
    for (const auto& [name, s] : systems)
        for (int N : {1, 2, 3}) {
            const Lattice lat(make_grid(1.0, N), 1, 1);
            const double v = 0.4;
            const auto q = solve_lattice(to_coefficients(s), ControlPath::constant(lat.grid(), v, s.domain), lat, tight());
            const auto o = oracle::solve(oracle::scheme_of(s, N, 1.0, v));
            worst = std::max(worst, oracle::max_field_gap(lat, q.solution, o));
            ++runs;
        }
    return {worst < kOracleTol, fmt("%zu systems x N in {1,2,3} (%d runs), max field gap %.1e", systems.size(), runs, worst)};
}

// ---- 3: Monte Carlo against the lattice ----
std::vector<std::pair<SpdeParams, double>> spde_cases() {
    SpdeParams a;
    a.s0 = 1;
    a.gy = 0.5;
    a.h1 = 1;
    SpdeParams b;
    b.b0 = 0.2;
    b.s0 = 0.5;
    b.f0 = 0.2;
    b.fy = -0.3;
    b.fz = 0.1;
    b.gy = 0.2;
    b.gz = 0.1;
    b.h0 = 1;
    b.h2 = 1;
    b.alpha = 0.05;
    SpdeParams c;
    c.bx = -0.5;
    c.bv = 1;
    c.s0 = 0.3;
    c.sx = 0.2;
    c.fx = 1;
    c.fy = 0.5;
    c.fz = -0.2;
    c.gy = 0.3;
    c.h2 = 2;
    return {{a, 0.3}, {b, 0.5}, {c, -0.2}};
}

Outcome mc_equivalence() {
    const Lattice lat(make_grid(1.0, 3), 1, 1);
    const auto u = ControlPath::constant(lat.grid(), 0.4);
    bool ok = true;
    std::string zs;
    int i = 0;
    for (const auto& [p, x0] : spde_cases()) {
        const auto m = make_spde_model(p);
        validate(m);
        const double tree = node_mean(solve_lattice(spde_coefficients(m, x0), u, lat, tight()).solution.Y[0]);
        const auto noise = sample_noise(lat.grid(), 1, 1, 100000, 11 + i);
        const auto est = solve_partially_coupled_mc(spde_to_fbdsde(m, 0.0, x0), u, noise, SolverConfig{}).y0;
        const double z = (est.mean - tree) / est.stderr;
        ok = ok && std::abs(z) < kSigmas;
        zs += fmt("%s%.2f", i ? ", " : "", z);
        ++i;
    }
    return {ok, "z-scores " + zs};
}

// ---- 4: spike orders ----
Outcome spike_orders() {
    const auto c = to_coefficients(designated_order_system());
    const Lattice lat(make_grid(1.0, 12), 1, 1);
    SolverConfig cfg;
    cfg.picard_tol = 1e-12;
    cfg.picard_max_iters = 200;
    const auto rep = order_experiment(c, ControlPath::constant(lat.grid(), 0.0), 1, 1.0, {1, 2, 3, 4, 6, 8, 10}, lat, cfg);
    bool ok = rep.eps.back() / rep.eps.front() >= 10.0 - 1e-12;
    double worst_margin = 1e300;
    std::string worst;
    for (int q = 0; q < kOrderQuantities; ++q) {
        const auto Q = static_cast<OrderQuantity>(q);
        const auto& s = rep.slope(Q);
        const double margin = s.defined ? s.slope - order_floor(Q) : -1e300;
        ok = ok && margin >= 0.0;
        if (margin < worst_margin) {
            worst_margin = margin;
            worst = fmt("%s slope %.3f vs floor %.2f", to_string(Q), s.slope, order_floor(Q));
        }
    }
    return {ok, fmt("eps %.3f..%.3f, tightest: ", rep.eps.front(), rep.eps.back()) + worst};
}

// ---- 5: duality identity ----
Outcome duality() {
    const auto cfg = tight();
    const double bound = kDualityFactor * cfg.picard_tol;
    double worst = 0.0;
    const Lattice lat(make_grid(1.0, 4), 1, 1);
    std::string screen;
    bool ok = true;
    {
        const auto c = degenerate_example_build();
        const auto u = ControlPath::constant(lat.grid(), 0.0, c.domain);
        const auto base = solve_lattice(c, u, lat, cfg).solution;
        const auto ue = spike_control(u, node_window(lat.grid(), 1, 2, 1.0));
        const auto var = solve_variational(c, base, u, ue, lat, cfg);
        const auto adj = solve_adjoint(c, base, u, lat, cfg);
        worst = std::max(worst, duality_residual(c, base, u, ue, var.fields, adj.fields, lat).residual());
        if (sup_norm(var.fields) == 0.0) return {false, "degenerate spike produced no variation"};
    }
    {
        const auto c = to_coefficients(designated_order_system());
        const auto u = ControlPath::constant(lat.grid(), 0.2);
        const auto base = solve_lattice(c, u, lat, cfg).solution;
        const auto ue = spike_control(u, node_window(lat.grid(), 0, 2, 1.0));
        for (const auto& s : screen_conventions(c, base, u, ue, lat, cfg, bound)) {
            if (s.convention == AdjointConvention::hamiltonian) {
                worst = std::max(worst, s.residual);
                ok = ok && s.accepted;
            } else {
                ok = ok && !s.accepted;
                screen += fmt(" %s %.1e", to_string(s.convention), s.residual);
            }
        }
    }
    ok = ok && worst < bound;
    return {ok, fmt("residual %.1e (bound %.0e); rejected:", worst, bound) + screen};
}

// ---- 6: variational inequality ----
Outcome variational_inequality_floor() {
    const auto c = degenerate_example_build();
    const Lattice lat(make_grid(1.0, 10), 1, 1);
    const auto u = ControlPath::constant(lat.grid(), 0.0, c.domain);
    const auto cfg = tight();
    const auto base = solve_lattice(c, u, lat, cfg).solution;
    double cfit = 0.0, lo = 1e300;
    for (double v : {1.0, -1.0, 0.5})
        for (int m : {1, 2, 4, 6, 8, 10}) {
            const auto w = node_window(lat.grid(), 0, m, v);
            const auto ue = spike_control(u, w);
            const auto var = solve_variational(c, base, u, ue, lat, cfg);
            const double lhs = variational_inequality(c, base, u, ue, var.fields, lat);
            cfit = std::max(cfit, -lhs / std::pow(w.eps, 1.2));
            lo = std::min(lo, lhs / w.eps);
        }
    return {cfit < kViBound, fmt("fitted c %.2e, min LHS/eps %.4f", cfit, lo)};
}

// ---- 7: Nash verification ----
Outcome nash() {
    const auto g = derived_scalar_game();
    const Lattice lat(make_grid(1.0, 3), 1, 1);
    SolverConfig cfg;
    cfg.anderson_depth = 5;
    cfg.picard_max_iters = 200;
    cfg.picard_tol = 1e-12;
    const auto cand = solve_game(g, lat, cfg);
    const auto noise = sample_noise(lat.grid(), 1, 1, 100000, 7);
    const auto rep = verify_nash(g, cand, standard_deviations(lat.grid()), lat, noise, kSigmas);
    bool ok = rep.pass;
    double worst_diff = 1e300, worst_fo = 0.0;
    for (const auto& e : rep.entries) {
        if (e.deviation != "own control") worst_diff = std::min(worst_diff, e.difference.mean);
        const double fo_tol = std::max(kSigmas * e.first_order.stderr, 1e-12);
        ok = ok && std::abs(e.first_order.mean) <= fo_tol;
        worst_fo = std::max(worst_fo, std::abs(e.first_order.mean));
    }
    return {ok, fmt("%zu entries, smallest deviation cost increase %.4f, max |first-order| %.1e", rep.entries.size(), worst_diff, worst_fo)};
}

// ---- 8: PDE representation ----
Outcome pde_representation() {
    SpdeParams p;
    p.b0 = 0.2;
    p.s0 = 0.5;
    p.f0 = 0.2;
    p.fy = -0.3;
    p.fz = 0.1;
    p.h0 = 1;
    p.h2 = 1;
    const auto m = make_spde_model(p);
    const std::vector<double> ts = {0.0, 0.2, 0.4, 0.6, 0.8}, xs = {-1.0, -0.5, 0.0, 0.5, 1.0};
    const auto fd = fd_comparator(m, nullptr, xs, ts, 3);
    const SolverConfig cfg;
    double worst = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i)
        for (std::size_t j = 0; j < xs.size(); ++j) {
            const auto e = evaluate_u(m, nullptr, ts[i], xs[j], 0.05, cfg, 100 + 5 * i + j);
            const double tol = std::max(kSigmas * e.stderr, kRelative * std::abs(fd.u[i][j]));
            worst = std::max(worst, std::abs(e.mean - fd.u[i][j]) / tol);
        }
    SpdeParams sq;
    sq.s0 = 1;
    sq.h2 = 2;
    const auto ms = make_spde_model(sq);
    double worst_sq = 0.0;
    std::uint64_t seed = 200;
    for (double t : {0.0, 0.5})
        for (double x : {-1.0, 0.5}) {
            const auto e = evaluate_u(ms, nullptr, t, x, 0.05, cfg, seed++);
            worst_sq = std::max(worst_sq, std::abs(e.mean - (x * x + 1.0 - t)) / e.stderr);
        }
    return {worst < 1.0 && worst_sq < kSigmas,
            fmt("5x5 grid worst |mc - fd| / tol %.2f; x^2 case worst z %.2f", worst, worst_sq)};
}

// ---- 9: Ito formula ----
Outcome ito() {
    const auto g8 = make_grid(1.0, 8);
    const auto noise8 = sample_noise(g8, 1, 1, 200, 3);
    const double a0[] = {1.3}, zero[] = {0.0}, beta[] = {-0.7}, one[] = {1.0}, minus[] = {-1.0};
    const auto constant = DiscretePath::constant(g8, zero);
    double exact = ito_residual(a0, constant, constant, constant, noise8).max_abs();
    exact = std::max(exact, ito_residual(a0, DiscretePath::constant(g8, beta), constant, constant, noise8).max_abs());
    const Lattice lat(make_grid(1.0, 4), 1, 1);
    const auto cz = DiscretePath::constant(lat.grid(), zero);
    // backward noise: the stochastic sums do not vanish in mean on the lattice, the pathwise identity is exact
    exact = std::max(exact, ito_residual(zero, cz, DiscretePath::constant(lat.grid(), minus), cz, lattice_bundle(lat)).pathwise_max);

    std::vector<double> dts, ms;
    double worst_mean_z = 0.0;
    for (int N : {8, 16, 32, 64}) {
        const auto g = make_grid(1.0, N);
        const auto noise = sample_noise(g, 1, 1, 20000, 40 + N);
        const auto r = ito_residual(zero, DiscretePath::constant(g, zero), DiscretePath::constant(g, zero),
                                    DiscretePath::constant(g, one), noise);
        dts.push_back(g.dt());
        ms.push_back(r.pathwise_ms);
        worst_mean_z = std::max(worst_mean_z, std::abs(r.expectation) / r.expectation_stderr);
    }
    const auto fit = fit_slope(dts, ms);
    const bool ok = exact < kExactTol && fit.defined && std::abs(fit.slope - 1.0) <= kSlopeBand;
    return {ok, fmt("deterministic residual %.1e; mean-square pathwise slope %.3f; expectation form |mean|/stderr <= %.2f",
                    exact, fit.slope, worst_mean_z)};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;  // runtime limit; 0 means none
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all = {
        {1, "degenerate example", 10, degenerate_example},
        {2, "lattice vs oracle", 30, oracle_equivalence},
        {3, "Monte Carlo vs lattice", 120, mc_equivalence},
        {4, "spike orders", 300, spike_orders},
        {5, "duality identity", 0, duality},
        {6, "variational inequality", 0, variational_inequality_floor},
        {7, "Nash verification", 120, nash},
        {8, "PDE representation", 120, pde_representation},
        {9, "Ito formula", 0, ito},
    };
    int failed = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.budget_s == 0 || secs < c.budget_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("%s %d %s: %s [%.1f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                    in_time ? "" : fmt(", over %.0f s budget", c.budget_s).c_str());
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
