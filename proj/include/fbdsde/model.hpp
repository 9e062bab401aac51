#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <random>
#include <string>
#include <vector>

#include "fbdsde/control.hpp"
#include "fbdsde/fields.hpp"

namespace fbdsde {

/// Arguments of every coefficient map.  Maps that do not depend on v ignore it.
struct Point {
    double t = 0.0, y = 0.0, Y = 0.0;
    NoiseVec z{}, Z{};
    double v = 0.0;
};

inline Point make_point(double t, const NodeValues& s, double v) { return {t, s.y, s.Y, s.z, s.Z, v}; }

/// Gradient of a scalar map in (y, Y, z, Z, v).
struct Partials {
    double y = 0.0, Y = 0.0;
    NoiseVec z{}, Z{};
    double v = 0.0;
};

using Jacobian = std::array<Partials, kMaxNoiseDim>;  // row i: gradient of component i

using ScalarMap = std::function<double(const Point&)>;
using VectorMap = std::function<NoiseVec(const Point&)>;
using GradMap = std::function<Partials(const Point&)>;
using JacMap = std::function<Jacobian(const Point&)>;
using Curve = std::function<double(double)>;

struct AssumptionConstants {
    double lipschitz = 0.0;         // Lipschitz constant k
    double monotonicity = 0.0;      // monotonicity constant mu
    double derivative_bound = 0.0;  // derivative bound C
};

// Coefficients of
//   dy = f dt + g dW - z dB^,   y_0 = x0
//   dY = -F dt - G dB^ + Z dW,  Y_T = h(y_T)
// with cost E[ int l dt + Phi(y_T) + gamma(Y_0) ].  g lives in R^d, G in R^l.
struct CoefficientSet {
    int d = 1, l = 1;
    double x0 = 0.0;
    ScalarMap f, F, running;
    VectorMap g, G;
    Curve h, Phi, gamma;
    GradMap df, dF, drunning;
    JacMap dg, dG;
    Curve dh, dPhi, dgamma;
    AssumptionConstants constants;
    ControlDomain domain = ControlDomain::real_line();

    int state_dim() const { return 2 + l + d; }

    static CoefficientSet zero(int d = 1, int l = 1) {
        CoefficientSet c;
        c.d = d;
        c.l = l;
        c.f = c.F = c.running = [](const Point&) { return 0.0; };
        c.g = c.G = [](const Point&) { return NoiseVec{}; };
        c.h = c.Phi = c.gamma = [](double) { return 0.0; };
        c.df = c.dF = c.drunning = [](const Point&) { return Partials{}; };
        c.dg = c.dG = [](const Point&) { return Jacobian{}; };
        c.dh = c.dPhi = c.dgamma = [](double) { return 0.0; };
        return c;
    }
};

// ---- coordinate access over zeta = (y, Y, z_1..z_l, Z_1..Z_d), then v ----

namespace detail {
inline double& coord(Point& p, int idx, int l) {
    if (idx == 0) return p.y;
    if (idx == 1) return p.Y;
    if (idx < 2 + l) return p.z[idx - 2];
    return p.Z[idx - 2 - l];
}
inline double coord(const Point& p, int idx, int l) {
    if (idx == 0) return p.y;
    if (idx == 1) return p.Y;
    if (idx < 2 + l) return p.z[idx - 2];
    return p.Z[idx - 2 - l];
}
inline double coord(const Partials& p, int idx, int l) {
    if (idx == 0) return p.y;
    if (idx == 1) return p.Y;
    if (idx < 2 + l) return p.z[idx - 2];
    return p.Z[idx - 2 - l];
}
inline double& coord(Partials& p, int idx, int l) {
    if (idx == 0) return p.y;
    if (idx == 1) return p.Y;
    if (idx < 2 + l) return p.z[idx - 2];
    return p.Z[idx - 2 - l];
}

inline Point random_point(std::mt19937_64& rng, const CoefficientSet& c, double horizon) {
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> unif(0.0, horizon);
    Point p;
    p.t = unif(rng);
    p.y = n01(rng);
    p.Y = n01(rng);
    for (int i = 0; i < c.l; ++i) p.z[i] = n01(rng);
    for (int i = 0; i < c.d; ++i) p.Z[i] = n01(rng);
    return p;
}

inline double random_control(std::mt19937_64& rng, const ControlDomain& u) {
    if (u.is_finite()) {
        std::uniform_int_distribution<std::size_t> pick(0, u.points().size() - 1);
        return u.points()[pick(rng)];
    }
    if (std::isfinite(u.lo()) && std::isfinite(u.hi()))
        return std::uniform_real_distribution<double>(u.lo(), u.hi())(rng);
    return std::normal_distribution<double>()(rng);
}

/// A point of U used when the control is frozen: 0 if admissible.
inline double frozen_control(const ControlDomain& u) {
    if (u.contains(0.0)) return 0.0;
    if (u.is_finite()) return u.points().front();
    return std::isfinite(u.lo()) ? u.lo() : u.hi();
}
}  // namespace detail

// ---- derivative consistency ----

struct DerivativeReport {
    double max_rel_error = 0.0;
    std::string worst;  // which map and coordinate
};

/// Central differences at Gaussian probes; error is |analytic - fd| / max(1, |analytic|).
inline DerivativeReport check_derivatives(const CoefficientSet& c, int probes = 64, std::uint64_t seed = 7,
                                          double step = 1e-4, double horizon = 1.0) {
    DerivativeReport rep;
    std::mt19937_64 rng(seed);
    const int m = c.state_dim();
    auto note = [&rep](double analytic, double fd, const std::string& what) {
        const double err = std::abs(analytic - fd) / std::max(1.0, std::abs(analytic));
        if (err > rep.max_rel_error) {
            rep.max_rel_error = err;
            rep.worst = what;
        }
    };
    for (int s = 0; s < probes; ++s) {
        Point p = detail::random_point(rng, c, horizon);
        p.v = detail::random_control(rng, c.domain);
        const Partials gf = c.df(p), gF = c.dF(p), gl = c.drunning(p);
        const Jacobian jg = c.dg(p), jG = c.dG(p);
        for (int idx = 0; idx <= m; ++idx) {
            Point up = p, dn = p;
            double& cu = idx < m ? detail::coord(up, idx, c.l) : up.v;
            double& cd = idx < m ? detail::coord(dn, idx, c.l) : dn.v;
            cu += step;
            cd -= step;
            auto grad = [&](const Partials& g) { return idx < m ? detail::coord(g, idx, c.l) : g.v; };
            const std::string at = "[" + std::to_string(idx) + "]";
            note(grad(gf), (c.f(up) - c.f(dn)) / (2 * step), "f" + at);
            note(grad(gF), (c.F(up) - c.F(dn)) / (2 * step), "F" + at);
            note(grad(gl), (c.running(up) - c.running(dn)) / (2 * step), "l" + at);
            const NoiseVec gu = c.g(up), gd = c.g(dn), Gu = c.G(up), Gd = c.G(dn);
            for (int i = 0; i < c.d; ++i)
                note(grad(jg[i]), (gu[i] - gd[i]) / (2 * step), "g" + std::to_string(i) + at);
            for (int i = 0; i < c.l; ++i)
                note(grad(jG[i]), (Gu[i] - Gd[i]) / (2 * step), "G" + std::to_string(i) + at);
        }
        auto curve = [&](const Curve& fn, const Curve& dfn, double x, const char* name) {
            note(dfn(x), (fn(x + step) - fn(x - step)) / (2 * step), name);
        };
        curve(c.h, c.dh, p.y, "h");
        curve(c.Phi, c.dPhi, p.y, "Phi");
        curve(c.gamma, c.dgamma, p.Y, "gamma");
    }
    return rep;
}

/// Throws ModelError when analytic derivatives disagree with finite differences.
inline const CoefficientSet& require_consistent_derivatives(const CoefficientSet& c, double tol = 1e-5) {
    const auto rep = check_derivatives(c);
    if (rep.max_rel_error > tol)
        throw ModelError("derivative of " + rep.worst + " disagrees with finite differences (rel err " +
                         std::to_string(rep.max_rel_error) + ")");
    return c;
}

// ---- monotonicity ----

enum class MonotoneVariant { decreasing, increasing };

struct MonotoneReport {
    double worst_margin = -std::numeric_limits<double>::infinity();    // normalised by |dzeta|^2
    double worst_h_margin = -std::numeric_limits<double>::infinity();  // normalised by |dy|^2
    double sharpest_mu = std::numeric_limits<double>::infinity();      // largest mu the probes allow
    bool pass = false;
};

/// <A(zeta) - A(zeta'), zeta - zeta'> with A = (-F, f, -G, g), control frozen at v.
inline double monotone_form(const CoefficientSet& c, const Point& a, const Point& b) {
    const NoiseVec ga = c.g(a), gb = c.g(b), Ga = c.G(a), Gb = c.G(b);
    double s = -(c.F(a) - c.F(b)) * (a.y - b.y) + (c.f(a) - c.f(b)) * (a.Y - b.Y);
    for (int i = 0; i < c.l; ++i) s += -(Ga[i] - Gb[i]) * (a.z[i] - b.z[i]);
    for (int i = 0; i < c.d; ++i) s += (ga[i] - gb[i]) * (a.Z[i] - b.Z[i]);
    return s;
}

inline double zeta_distance_sq(const CoefficientSet& c, const Point& a, const Point& b) {
    double s = (a.y - b.y) * (a.y - b.y) + (a.Y - b.Y) * (a.Y - b.Y);
    for (int i = 0; i < c.l; ++i) s += (a.z[i] - b.z[i]) * (a.z[i] - b.z[i]);
    for (int i = 0; i < c.d; ++i) s += (a.Z[i] - b.Z[i]) * (a.Z[i] - b.Z[i]);
    return s;
}

// decreasing: <dA, dzeta> <= -mu |dzeta|^2 and <dh, dy> >= 0.
// increasing: <dA, dzeta> >= mu |dzeta|^2 and <dh, dy> <= 0.
// Margins are positive on violation.
inline MonotoneReport check_monotone(const CoefficientSet& c, int probes = 10000, std::uint64_t seed = 11,
                                     MonotoneVariant variant = MonotoneVariant::decreasing, double horizon = 1.0,
                                     double tol = 1e-12) {
    if (probes < 1) throw DomainError("check_monotone needs at least one probe");
    MonotoneReport rep;
    std::mt19937_64 rng(seed);
    const double mu = c.constants.monotonicity;
    const double v = detail::frozen_control(c.domain);
    const double sgn = variant == MonotoneVariant::decreasing ? 1.0 : -1.0;
    for (int s = 0; s < probes; ++s) {
        Point a = detail::random_point(rng, c, horizon);
        Point b = detail::random_point(rng, c, horizon);
        b.t = a.t;
        a.v = b.v = v;
        const double dist = zeta_distance_sq(c, a, b);
        if (dist == 0.0) continue;
        const double form = monotone_form(c, a, b) / dist;
        rep.worst_margin = std::max(rep.worst_margin, sgn * form + mu);
        rep.sharpest_mu = std::min(rep.sharpest_mu, -sgn * form);
        const double dy = a.y - b.y;
        const double hform = (c.h(a.y) - c.h(b.y)) * dy / (dy * dy);
        rep.worst_h_margin = std::max(rep.worst_h_margin, -sgn * hform);
    }
    rep.pass = rep.worst_margin <= tol && rep.worst_h_margin <= tol;
    return rep;
}

// ---- Lipschitz and derivative bounds ----

struct LipschitzReport {
    double max_quotient = 0.0;  // sup |A(zeta)-A(zeta')| / |zeta-zeta'| and the same for h
    double declared_k = 0.0;
    double ratio = 0.0;  // max_quotient / declared_k (infinite if k = 0 and quotient > 0)
    double max_derivative = 0.0;
    double declared_C = 0.0;
    double derivative_ratio = 0.0;
    bool pass = false;
};

inline LipschitzReport check_lipschitz_bounds(const CoefficientSet& c, int probes = 10000,
                                             std::uint64_t seed = 13, double horizon = 1.0) {
    LipschitzReport rep;
    rep.declared_k = c.constants.lipschitz;
    rep.declared_C = c.constants.derivative_bound;
    std::mt19937_64 rng(seed);
    const int m = c.state_dim();
    for (int s = 0; s < probes; ++s) {
        Point a = detail::random_point(rng, c, horizon);
        Point b = detail::random_point(rng, c, horizon);
        b.t = a.t;
        a.v = b.v = detail::random_control(rng, c.domain);
        const NoiseVec ga = c.g(a), gb = c.g(b), Ga = c.G(a), Gb = c.G(b);
        double num = std::pow(c.F(a) - c.F(b), 2) + std::pow(c.f(a) - c.f(b), 2);
        for (int i = 0; i < c.l; ++i) num += std::pow(Ga[i] - Gb[i], 2);
        for (int i = 0; i < c.d; ++i) num += std::pow(ga[i] - gb[i], 2);
        const double dist = zeta_distance_sq(c, a, b);
        if (dist > 0.0) rep.max_quotient = std::max(rep.max_quotient, std::sqrt(num / dist));
        if (a.y != b.y)
            rep.max_quotient = std::max(rep.max_quotient, std::abs((c.h(a.y) - c.h(b.y)) / (a.y - b.y)));

        auto scan = [&](const Partials& p) {
            for (int i = 0; i < m; ++i) rep.max_derivative = std::max(rep.max_derivative, std::abs(detail::coord(p, i, c.l)));
        };
        scan(c.df(a));
        scan(c.dF(a));
        const Jacobian jg = c.dg(a), jG = c.dG(a);
        for (int i = 0; i < c.d; ++i) scan(jg[i]);
        for (int i = 0; i < c.l; ++i) scan(jG[i]);
        rep.max_derivative = std::max(rep.max_derivative, std::abs(c.dh(a.y)));
    }
    auto ratio = [](double got, double declared) {
        if (declared > 0.0) return got / declared;
        return got > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    };
    rep.ratio = ratio(rep.max_quotient, rep.declared_k);
    rep.derivative_ratio = ratio(rep.max_derivative, rep.declared_C);
    rep.pass = rep.ratio <= 1.0 + 1e-9 && rep.derivative_ratio <= 1.0 + 1e-9;
    return rep;
}

// ---- Hamiltonian and cost ----

/// (p, q, k, h) at one point; k pairs with G (l entries), h with g (d entries).
struct AdjointValues {
    double p = 0.0, q = 0.0;
    NoiseVec k{}, h{};
};

/// H = q f - p F - k.G + h.g + l
inline double hamiltonian(const CoefficientSet& c, double t, const NodeValues& s, double v,
                          const AdjointValues& a) {
    const Point pt = make_point(t, s, v);
    const NoiseVec g = c.g(pt), G = c.G(pt);
    double H = a.q * c.f(pt) - a.p * c.F(pt) + c.running(pt);
    for (int i = 0; i < c.l; ++i) H -= a.k[i] * G[i];
    for (int i = 0; i < c.d; ++i) H += a.h[i] * g[i];
    return H;
}

/// Left-Riemann running cost plus Phi(y_N) + gamma(Y_0), in expectation over the lattice.
inline double expected_cost(const CoefficientSet& c, const Lattice& lat, const LatticeQuadruple& s,
                            const ControlLaw& u) {
    const int N = lat.steps();
    if (s.steps() != N) throw DomainError("cost: trajectory and lattice grids differ");
    const double dt = lat.dt();
    double J = 0.0;
    for (int k = 0; k < N; ++k) {
        const double t = lat.grid().node(k);
        double acc = 0.0;
        for (std::size_t i = 0; i < lat.node_size(k); ++i) {
            const NodeValues v = s.at(k, i);
            acc += c.running(make_point(t, v, control_value(u, t, k, i, v.y)));
        }
        J += acc / static_cast<double>(lat.node_size(k)) * dt;
    }
    double term = 0.0;
    for (double y : s.y[N]) term += c.Phi(y);
    J += term / static_cast<double>(s.y[N].size());
    double init = 0.0;
    for (double Y : s.Y[0]) init += c.gamma(Y);
    return J + init / static_cast<double>(s.Y[0].size());
}

/// Cost of every atom (enumerates the full atom table; small lattices only).
inline std::vector<double> atom_costs(const CoefficientSet& c, const Lattice& lat, const LatticeQuadruple& s,
                                      const ControlLaw& u) {
    const int N = lat.steps();
    if (s.steps() != N) throw DomainError("cost: trajectory and lattice grids differ");
    std::vector<double> J(lat.atom_count(), 0.0);
    for (int k = 0; k < N; ++k) {
        const double t = lat.grid().node(k);
        std::vector<double> node(lat.node_size(k));
        for (std::size_t i = 0; i < node.size(); ++i) {
            const NodeValues v = s.at(k, i);
            node[i] = c.running(make_point(t, v, control_value(u, t, k, i, v.y))) * lat.dt();
        }
        for (std::size_t a = 0; a < J.size(); ++a) J[a] += node[lat.node_of_atom(k, a)];
    }
    for (std::size_t a = 0; a < J.size(); ++a)
        J[a] += c.Phi(s.y[N][lat.node_of_atom(N, a)]) + c.gamma(s.Y[0][lat.node_of_atom(0, a)]);
    return J;
}

struct Estimate {
    double mean = 0.0;
    double stderr = 0.0;
};

inline Estimate sample_estimate(std::span<const double> xs) {
    Estimate e;
    const double n = static_cast<double>(xs.size());
    if (xs.empty()) return e;
    double s = 0.0;
    for (double x : xs) s += x;
    e.mean = s / n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - e.mean) * (x - e.mean);
        e.stderr = std::sqrt(ss / (n - 1.0) / n);
    }
    return e;
}

/// Per-path cost over a Monte Carlo quadruple, aggregated to mean and standard error.
inline Estimate path_cost(const CoefficientSet& c, const TimeGrid& grid, const PathQuadruple& s,
                          const ControlLaw& u, std::vector<double>* per_path = nullptr) {
    const int N = grid.steps();
    if (s.steps != N) throw DomainError("cost: trajectory and grid differ");
    std::vector<double> J(s.paths, 0.0);
    for (std::size_t m = 0; m < s.paths; ++m) {
        for (int k = 0; k < N; ++k) {
            const double t = grid.node(k);
            const NodeValues v = s.at(k, m);
            J[m] += c.running(make_point(t, v, control_value(u, t, k, m, v.y))) * grid.dt();
        }
        J[m] += c.Phi(s.y[s.index(N, m)]) + c.gamma(s.Y[s.index(0, m)]);
    }
    const Estimate e = sample_estimate(J);
    if (per_path) *per_path = std::move(J);
    return e;
}

}  // namespace fbdsde
