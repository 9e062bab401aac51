#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fbdsde/smp.hpp"

namespace fbdsde {

/// Scalar quasilinear model
///   u(t,x) = h~(x) + int_t^T [L u + f(s, x, u, u_x sigma, v_s)] ds + int_t^T g(s, x, u, u_x sigma) dB^_s,
///   L phi = 1/2 sigma^2 phi'' + b(x, v) phi',
/// with cost E[int l(s, X, Y, Z, v) ds + gamma(Y_0)].  Derivatives are needed only by the
/// adjoint; missing ones are taken as zero.
struct SpdeModel {
    double horizon = 1.0;
    std::function<double(double x, double v)> b;
    std::function<double(double x)> sigma;
    std::function<double(double t, double x, double y, double z, double v)> f;
    std::function<double(double t, double x, double y, double z)> g;
    std::function<double(double x)> terminal;
    std::function<double(double t, double x, double y, double z, double v)> running;
    std::function<double(double y)> gamma;

    // partial derivatives: {x, v} for b; {x} for sigma; {x, y, z, v} for f and l; {x, y, z} for g
    std::function<std::array<double, 2>(double x, double v)> db;
    std::function<double(double x)> dsigma;
    std::function<std::array<double, 4>(double t, double x, double y, double z, double v)> df, drunning;
    std::function<std::array<double, 3>(double t, double x, double y, double z)> dg;
    std::function<double(double x)> dterminal, dgamma;

    double lipschitz_c = 1.0;  // c and alpha of the backward-noise Lipschitz bound
    double alpha = 0.0;
};

struct SpdeCheck {
    double worst_ratio = 0.0;  // max |dg|^2 / (c |dy|^2 + alpha |dz|^2) over probes
    double z_ratio = 0.0;      // max |dg|^2 / |dz|^2 with dy = 0
    bool pass = false;
};

/// Probes |g(y1, z1) - g(y2, z2)|^2 <= c |dy|^2 + alpha |dz|^2 with alpha < 1.
inline SpdeCheck probe_backward_noise(const SpdeModel& m, int probes = 4000, std::uint64_t seed = 17) {
    SpdeCheck r;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> ut(0.0, m.horizon);
    for (int i = 0; i < probes; ++i) {
        const double t = ut(rng), x = n01(rng), y1 = n01(rng), y2 = n01(rng), z1 = n01(rng), z2 = n01(rng);
        const double d = m.g(t, x, y1, z1) - m.g(t, x, y2, z2);
        const double bound = m.lipschitz_c * (y1 - y2) * (y1 - y2) + m.alpha * (z1 - z2) * (z1 - z2);
        if (bound > 0.0) r.worst_ratio = std::max(r.worst_ratio, d * d / bound);
        const double dz = m.g(t, x, y1, z1) - m.g(t, x, y1, z2);
        if (z1 != z2) r.z_ratio = std::max(r.z_ratio, dz * dz / ((z1 - z2) * (z1 - z2)));
    }
    r.pass = m.alpha < 1.0 && r.worst_ratio <= 1.0 + 1e-9 && r.z_ratio <= m.alpha + 1e-9;
    return r;
}

/// Validates the model; throws ModelError when the backward-noise bound fails.
inline const SpdeModel& validate(const SpdeModel& m) {
    if (!(m.horizon > 0.0)) throw ModelError("model horizon must be positive");
    if (!m.b || !m.sigma || !m.f || !m.g || !m.terminal) throw ModelError("model coefficients b, sigma, f, g, h are required");
    if (!(m.alpha >= 0.0 && m.alpha < 1.0)) throw ModelError("backward-noise constant alpha must lie in [0, 1)");
    const auto r = probe_backward_noise(m);
    if (!r.pass)
        throw ModelError("backward-noise bound violated (ratio " + std::to_string(r.worst_ratio) + ", z ratio " +
                         std::to_string(r.z_ratio) + ")");
    return m;
}

/// Coefficients for the linear/quadratic model family used by configs:
///   b = b0 + bx x + bv v,  sigma = s0 + sx x,
///   f = f0 + fx x + fy y + fz z + fv v,  g = g0 + gx x + gy y + gz z,
///   h~ = h0 + h1 x + 1/2 h2 x^2,
///   l = 1/2 (lx x^2 + ly y^2 + lz z^2 + lv v^2),  gamma = 1/2 gamma2 y^2.
struct SpdeParams {
    double horizon = 1.0;
    double b0 = 0, bx = 0, bv = 0, s0 = 1, sx = 0;
    double f0 = 0, fx = 0, fy = 0, fz = 0, fv = 0;
    double g0 = 0, gx = 0, gy = 0, gz = 0;
    double h0 = 0, h1 = 0, h2 = 0;
    double lx = 0, ly = 0, lz = 0, lv = 0, gamma2 = 0;
    double lipschitz_c = 1.0, alpha = 0.0;
};

inline SpdeModel make_spde_model(const SpdeParams& p) {
    SpdeModel m;
    m.horizon = p.horizon;
    m.b = [p](double x, double v) { return p.b0 + p.bx * x + p.bv * v; };
    m.sigma = [p](double x) { return p.s0 + p.sx * x; };
    m.f = [p](double, double x, double y, double z, double v) { return p.f0 + p.fx * x + p.fy * y + p.fz * z + p.fv * v; };
    m.g = [p](double, double x, double y, double z) { return p.g0 + p.gx * x + p.gy * y + p.gz * z; };
    m.terminal = [p](double x) { return p.h0 + p.h1 * x + 0.5 * p.h2 * x * x; };
    m.running = [p](double, double x, double y, double z, double v) {
        return 0.5 * (p.lx * x * x + p.ly * y * y + p.lz * z * z + p.lv * v * v);
    };
    m.gamma = [p](double y) { return 0.5 * p.gamma2 * y * y; };
    m.db = [p](double, double) { return std::array<double, 2>{p.bx, p.bv}; };
    m.dsigma = [p](double) { return p.sx; };
    m.df = [p](double, double, double, double, double) { return std::array<double, 4>{p.fx, p.fy, p.fz, p.fv}; };
    m.dg = [p](double, double, double, double) { return std::array<double, 3>{p.gx, p.gy, p.gz}; };
    m.drunning = [p](double, double x, double y, double z, double v) {
        return std::array<double, 4>{p.lx * x, p.ly * y, p.lz * z, p.lv * v};
    };
    m.dterminal = [p](double x) { return p.h1 + p.h2 * x; };
    m.dgamma = [p](double y) { return p.gamma2 * y; };
    m.lipschitz_c = p.lipschitz_c;
    m.alpha = p.alpha;
    return m;
}

/// Forward SDE started at (t, x) and the backward equation driven by it.
inline PartiallyCoupledSystem spde_to_fbdsde(const SpdeModel& m, double t, double x) {
    PartiallyCoupledSystem s;
    s.t0 = t;
    s.x0 = x;
    s.b = [b = m.b](double, double X, double v) { return b(X, v); };
    s.sigma = [sg = m.sigma](double, double X) { return sg(X); };
    s.f = m.f;
    s.g = m.g;
    s.terminal = m.terminal;
    return s;
}

/// The same system as a CoefficientSet (y <-> X, z unused), with its cost and derivatives,
/// for the lattice solver and the adjoint machinery.
inline CoefficientSet spde_coefficients(const SpdeModel& m, double x0) {
    CoefficientSet c = CoefficientSet::zero(1, 1);
    c.x0 = x0;
    c.f = [m](const Point& p) { return m.b(p.y, p.v); };
    c.g = [m](const Point& p) { return NoiseVec{m.sigma(p.y)}; };
    c.F = [m](const Point& p) { return m.f(p.t, p.y, p.Y, p.Z[0], p.v); };
    c.G = [m](const Point& p) { return NoiseVec{m.g(p.t, p.y, p.Y, p.Z[0])}; };
    c.h = m.terminal;
    if (m.running) c.running = [m](const Point& p) { return m.running(p.t, p.y, p.Y, p.Z[0], p.v); };
    if (m.gamma) c.gamma = m.gamma;
    if (m.db)
        c.df = [m](const Point& p) {
            const auto d = m.db(p.y, p.v);
            Partials r;
            r.y = d[0];
            r.v = d[1];
            return r;
        };
    if (m.dsigma)
        c.dg = [m](const Point& p) {
            Jacobian J{};
            J[0].y = m.dsigma(p.y);
            return J;
        };
    if (m.df)
        c.dF = [m](const Point& p) {
            const auto d = m.df(p.t, p.y, p.Y, p.Z[0], p.v);
            Partials r;
            r.y = d[0];
            r.Y = d[1];
            r.Z[0] = d[2];
            r.v = d[3];
            return r;
        };
    if (m.dg)
        c.dG = [m](const Point& p) {
            const auto d = m.dg(p.t, p.y, p.Y, p.Z[0]);
            Jacobian J{};
            J[0].y = d[0];
            J[0].Y = d[1];
            J[0].Z[0] = d[2];
            return J;
        };
    if (m.drunning)
        c.drunning = [m](const Point& p) {
            const auto d = m.drunning(p.t, p.y, p.Y, p.Z[0], p.v);
            Partials r;
            r.y = d[0];
            r.Y = d[1];
            r.Z[0] = d[2];
            r.v = d[3];
            return r;
        };
    if (m.dterminal) c.dh = m.dterminal;
    if (m.dgamma) c.dgamma = m.dgamma;
    return c;
}

using TimeControl = std::function<double(double t)>;

/// u(t, x) = Y_t^{t,x} by regression Monte Carlo on [t, T] with about (T - t) / dt steps.
/// With backward noise the value is random; the mean over paths is returned.
inline Estimate evaluate_u(const SpdeModel& m, const TimeControl& v, double t, double x, double dt,
                           const SolverConfig& cfg, std::uint64_t seed) {
    if (!(t < m.horizon)) throw DomainError("evaluate_u needs t < T");
    const double span = m.horizon - t;
    const int steps = std::max(1, static_cast<int>(std::lround(span / dt)));
    const TimeGrid grid(span, steps);
    const auto noise = sample_noise(grid, 1, 1, cfg.mc_paths, seed, {cfg.antithetic});
    const ControlPath u = ControlPath::deterministic(grid, [&](double s) { return v ? v(t + s) : 0.0; });
    return solve_partially_coupled_mc(spde_to_fbdsde(m, t, x), u, noise, cfg).y0;
}

struct FdTable {
    std::vector<double> t, x;
    std::vector<std::vector<double>> u;  // u[i][j] at (t[i], x[j])
    double dx = 0.0, dt = 0.0;
};

/// Explicit finite differences for u_t + 1/2 sigma^2 u_xx + b u_x + f(t, x, u, sigma u_x, v) = 0,
/// u(T) = h~, with g = 0.  Convection is upwinded, diffusion central, boundaries linearly
/// extrapolated; dx = 0.1 / 2^level and dt <= 0.9 dx^2 / (sigma^2 + |b| dx).
inline FdTable fd_comparator(const SpdeModel& m, const TimeControl& v, std::vector<double> xs, std::vector<double> ts,
                             int level = 3) {
    for (int probe = 0; probe < 16; ++probe) {
        const double t = m.horizon * probe / 16.0, x = probe - 8.0;
        if (m.g(t, x, 0.3 * probe, -0.2 * probe) != 0.0 || m.g(t, x, -1.0, 2.0) != 0.0)
            throw DomainError("finite-difference comparator needs g = 0");
    }
    if (xs.empty() || ts.empty()) throw DomainError("empty comparison grid");
    std::sort(ts.begin(), ts.end());
    for (double t : ts)
        if (t < 0.0 || t > m.horizon) throw DomainError("comparison time outside [0, T]");
    const double T = m.horizon;
    const double dx = 0.1 / std::pow(2.0, level);
    const double xlo = *std::min_element(xs.begin(), xs.end()), xhi = *std::max_element(xs.begin(), xs.end());

    // spatial extent: a few standard deviations plus drift travel beyond the requested points
    double smax = 0.0, bmax = 0.0;
    const double probe_lo = xlo - 3.0, probe_hi = xhi + 3.0;
    for (int i = 0; i <= 200; ++i) {
        const double x = probe_lo + (probe_hi - probe_lo) * i / 200.0;
        smax = std::max(smax, std::abs(m.sigma(x)));
        for (double tt : {0.0, 0.5 * T, T}) bmax = std::max(bmax, std::abs(m.b(x, v ? v(tt) : 0.0)));
    }
    const double margin = 6.0 * smax * std::sqrt(T) + 2.0 * bmax * T + 1.0;
    const int left = static_cast<int>(std::ceil((xlo - (xlo - margin)) / dx));
    const int cells = left + static_cast<int>(std::ceil((xhi + margin - xlo) / dx));
    const double x0 = xlo - left * dx;
    std::vector<double> grid_x(cells + 1);
    for (int i = 0; i <= cells; ++i) grid_x[i] = x0 + i * dx;

    double denom = 0.0;
    for (double x : grid_x) {
        const double s = m.sigma(x);
        for (double tt : {0.0, 0.5 * T, T}) denom = std::max(denom, s * s + std::abs(m.b(x, v ? v(tt) : 0.0)) * dx);
    }
    const double dt_max = denom > 0.0 ? 0.9 * dx * dx / denom : T;
    if (dt_max < 1e-9) throw DomainError("finite-difference step below 1e-9 after refinement");

    FdTable out;
    out.t = ts;
    out.x = xs;
    out.dx = dx;
    out.u.assign(ts.size(), std::vector<double>(xs.size(), 0.0));
    std::vector<double> u(cells + 1), un(cells + 1);
    for (int i = 0; i <= cells; ++i) u[i] = m.terminal(grid_x[i]);

    auto sample = [&](std::size_t row) {
        for (std::size_t j = 0; j < xs.size(); ++j) {
            const double pos = (xs[j] - x0) / dx;
            const int i = std::clamp(static_cast<int>(std::floor(pos)), 0, cells - 1);
            const double w = pos - i;
            out.u[row][j] = (1.0 - w) * u[i] + w * u[i + 1];
        }
    };

    double t = T;
    std::ptrdiff_t row = static_cast<std::ptrdiff_t>(ts.size()) - 1;
    while (row >= 0 && ts[row] >= T) sample(static_cast<std::size_t>(row--));
    double dt_used = 0.0;
    while (row >= 0) {
        const double target = ts[row];
        const int n = std::max(1, static_cast<int>(std::ceil((t - target) / dt_max - 1e-12)));
        const double h = (t - target) / n;
        dt_used = std::max(dt_used, h);
        for (int s = 0; s < n; ++s) {
            const double tn = t - s * h;  // step from tn down to tn - h, coefficients at tn
            const double vv = v ? v(tn) : 0.0;
            for (int i = 1; i < cells; ++i) {
                const double x = grid_x[i], sg = m.sigma(x), bb = m.b(x, vv);
                const double uxx = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
                const double ux_up = bb > 0.0 ? (u[i + 1] - u[i]) / dx : (u[i] - u[i - 1]) / dx;
                const double ux_c = (u[i + 1] - u[i - 1]) / (2.0 * dx);
                un[i] = u[i] + h * (0.5 * sg * sg * uxx + bb * ux_up + m.f(tn, x, u[i], sg * ux_c, vv));
            }
            un[0] = 2.0 * un[1] - un[2];
            un[cells] = 2.0 * un[cells - 1] - un[cells - 2];
            u.swap(un);
        }
        t = target;
        while (row >= 0 && ts[row] >= t) sample(static_cast<std::size_t>(row--));
    }
    out.dt = dt_used;
    return out;
}

/// Maximum-principle check for the model: optimal state and adjoint on the lattice from x0,
/// then the pointwise Hamiltonian gap over `vgrid`.
struct SpdeSmpResult {
    SmpReport report;
    LatticeQuadruple state, adjoint;
};

inline SpdeSmpResult check_smp_spde(const SpdeModel& m, double x0, const ControlPath& u, const std::vector<double>& vgrid,
                                    const Lattice& lat, const SolverConfig& cfg) {
    if (std::abs(lat.grid().horizon() - m.horizon) > 1e-12) throw DomainError("lattice horizon differs from the model");
    const CoefficientSet c = spde_coefficients(m, x0);
    SpdeSmpResult r;
    r.state = solve_lattice(c, u, lat, cfg).solution;
    r.adjoint = solve_adjoint(c, r.state, u, lat, cfg).fields;
    r.report = check_smp(c, r.state, u, r.adjoint, vgrid, lat);
    return r;
}

}  // namespace fbdsde
