#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fbdsde/linear.hpp"
#include "fbdsde/solver.hpp"

namespace fbdsde {

// ---- spike variations ----

/// u^eps = v on [tau, tau + eps], u elsewhere.
struct SpikeSpec {
    double tau = 0.0;
    double eps = 0.0;
    double v = 0.0;
};

/// A spike snapped to whole steps: nodes [first, first + steps), plus node N when the
/// window reaches the horizon.  eps = steps * dt is the value used in every estimate.
struct SpikeWindow {
    int first = 0;
    int steps = 1;
    double eps = 0.0;
    double v = 0.0;
    bool reaches_end = false;

    bool contains(int k, int N) const { return (k >= first && k < first + steps) || (reaches_end && k == N); }
};

inline SpikeWindow snap(const SpikeSpec& s, const TimeGrid& grid) {
    const double dt = grid.dt();
    const int N = grid.steps();
    if (!(s.eps > 0.0)) throw DomainError("spike width must be positive");
    if (s.tau < 0.0 || s.tau + s.eps > grid.horizon() * (1.0 + 1e-12) + 1e-12)
        throw DomainError("spike window lies outside [0, T]");
    SpikeWindow w;
    w.first = static_cast<int>(std::lround(s.tau / dt));
    w.steps = std::max(1, static_cast<int>(std::lround(s.eps / dt)));
    if (w.first + w.steps > N) throw DomainError("snapped spike window lies outside [0, T]");
    w.eps = w.steps * dt;
    w.v = s.v;
    w.reaches_end = w.first + w.steps == N;
    return w;
}

/// Spike window on nodes [first, first + steps) directly.
inline SpikeWindow node_window(const TimeGrid& grid, int first, int steps, double v) {
    return snap({first * grid.dt(), steps * grid.dt(), v}, grid);
}

inline ControlPath spike_control(const ControlPath& u, const SpikeWindow& w) {
    const int N = u.steps();
    if (w.first < 0 || w.first + w.steps > N) throw DomainError("spike window lies outside [0, T]");
    std::vector<std::vector<double>> rows(N + 1);
    for (int k = 0; k <= N; ++k) rows[k] = w.contains(k, N) ? std::vector<double>{w.v} : u.node(k);
    return ControlPath(std::move(rows), u.domain());
}

inline ControlPath spike_control(const ControlPath& u, const SpikeSpec& s, const TimeGrid& grid) {
    if (u.steps() != grid.steps()) throw DomainError("control path and grid differ");
    return spike_control(u, snap(s, grid));
}

namespace detail {

inline double dot(const Partials& g, const NodeValues& s, int d, int l) {
    double r = g.y * s.y + g.Y * s.Y;
    for (int c = 0; c < l; ++c) r += g.z[c] * s.z[c];
    for (int c = 0; c < d; ++c) r += g.Z[c] * s.Z[c];
    return r;
}

inline void accumulate(Partials& acc, double a, const Partials& g) {
    acc.y += a * g.y;
    acc.Y += a * g.Y;
    for (int c = 0; c < kMaxNoiseDim; ++c) {
        acc.z[c] += a * g.z[c];
        acc.Z[c] += a * g.Z[c];
    }
    acc.v += a * g.v;
}

inline void require_match(const Lattice& lat, const LatticeQuadruple& q, const char* what) {
    if (q.steps() != lat.steps() || q.d != lat.d() || q.l != lat.l())
        throw DomainError(std::string(what) + " does not match the lattice");
    for (int k = 0; k <= lat.steps(); ++k)
        if (q.y[k].size() != lat.node_size(k)) throw DomainError(std::string(what) + " does not match the lattice");
}

}  // namespace detail

// ---- variational equation ----

/// The state system linearised along (base, u) with inhomogeneity f(u^eps) - f(u) etc.
class VariationalDriver {
public:
    VariationalDriver(const CoefficientSet& c, const LatticeQuadruple& base, const ControlPath& u,
                      const ControlPath& ueps, const TimeGrid& grid)
        : c_(c), base_(base), u_(u), ue_(ueps), grid_(grid) {}

    double initial(std::size_t) const { return 0.0; }
    Increment forward(int k, std::size_t i, const NodeValues& s) const {
        const auto [p, pe] = points(k, i);
        Increment r;
        r.drift = detail::dot(c_.df(p), s, c_.d, c_.l) + c_.f(pe) - c_.f(p);
        const Jacobian J = c_.dg(p);
        const NoiseVec g = c_.g(p), ge = c_.g(pe);
        for (int j = 0; j < c_.d; ++j) r.noise[j] = detail::dot(J[j], s, c_.d, c_.l) + ge[j] - g[j];
        return r;
    }
    Increment backward(int k, std::size_t i, const NodeValues& s) const {
        const auto [p, pe] = points(k, i);
        Increment r;
        r.drift = detail::dot(c_.dF(p), s, c_.d, c_.l) + c_.F(pe) - c_.F(p);
        const Jacobian J = c_.dG(p);
        const NoiseVec G = c_.G(p), Ge = c_.G(pe);
        for (int j = 0; j < c_.l; ++j) r.noise[j] = detail::dot(J[j], s, c_.d, c_.l) + Ge[j] - G[j];
        return r;
    }
    double terminal(std::size_t i, const NodeValues& s) const {
        return c_.dh(base_.y[grid_.steps()][i]) * s.y;
    }

private:
    std::pair<Point, Point> points(int k, std::size_t i) const {
        const double t = grid_.node(k);
        const NodeValues b = base_.at(k, i);
        return {make_point(t, b, u_.value(k, i)), make_point(t, b, ue_.value(k, i))};
    }
    const CoefficientSet& c_;
    const LatticeQuadruple& base_;
    const ControlPath& u_;
    const ControlPath& ue_;
    const TimeGrid& grid_;
};

struct VariationalResult {
    LatticeQuadruple fields;  // (y1, Y1, z1, Z1)
    int iterations = 0;
    ResidualNorms residuals;
};

inline VariationalResult solve_variational(const CoefficientSet& c, const LatticeQuadruple& optimal,
                                           const ControlPath& u, const ControlPath& ueps, const Lattice& lat,
                                           const SolverConfig& cfg) {
    cfg.validate();
    detail::require_match(lat, optimal, "optimal trajectory");
    check_control_on_lattice(u, lat);
    check_control_on_lattice(ueps, lat);
    const VariationalDriver drv(c, optimal, u, ueps, lat.grid());
    PicardOutcome po = picard(drv, lat, cfg.picard());
    VariationalResult r;
    r.residuals = residual_verify(drv, lat, po.fields);
    r.fields = std::move(po.fields);
    r.iterations = po.iterations;
    return r;
}

inline VariationalResult solve_variational(const CoefficientSet& c, const LatticeQuadruple& optimal,
                                           const ControlPath& u, const SpikeSpec& spec, const Lattice& lat,
                                           const SolverConfig& cfg) {
    return solve_variational(c, optimal, u, spike_control(u, spec, lat.grid()), lat, cfg);
}

// ---- adjoint equation ----

/// Sign conventions for the adjoint system.  `hamiltonian` is the one that satisfies the
/// discrete duality identity; the others are kept so the identity can reject them.
enum class AdjointConvention { hamiltonian, negated_z_coupling, flipped_backward_noise, flipped_forward_noise };

inline const char* to_string(AdjointConvention a) {
    switch (a) {
        case AdjointConvention::hamiltonian: return "hamiltonian";
        case AdjointConvention::negated_z_coupling: return "negated_z_coupling";
        case AdjointConvention::flipped_backward_noise: return "flipped_backward_noise";
        case AdjointConvention::flipped_forward_noise: return "flipped_forward_noise";
    }
    return "?";
}

inline constexpr AdjointConvention kAllConventions[] = {
    AdjointConvention::hamiltonian, AdjointConvention::negated_z_coupling, AdjointConvention::flipped_backward_noise,
    AdjointConvention::flipped_forward_noise};

// Slots of the lattice quadruple: p in y, q in Y, k in z (l entries), h in Z (d entries).
// p runs forward from p_0 = -gamma_Y(Y_0), q backward from
//   q_N = -h_y(y_N) (p_N + f_adj(N) dt) + Phi_y(y_N).
// Terms from the forward coefficients (f, g, l) act on nodes k < N, those from the
// backward coefficients (F, G) on nodes k > 0, mirroring where each coefficient enters
// the state scheme.
class AdjointDriver {
public:
    AdjointDriver(const CoefficientSet& c, const LatticeQuadruple& base, const ControlPath& u, const TimeGrid& grid,
                  AdjointConvention conv = AdjointConvention::hamiltonian)
        : c_(c), base_(base), u_(u), grid_(grid), conv_(conv) {}

    double initial(std::size_t i) const { return -c_.dgamma(base_.Y[0][i]); }

    Increment forward(int k, std::size_t i, const NodeValues& s) const {
        const auto [A, Bf] = blocks(k, i, s);
        Increment r;
        r.drift = A.Y - Bf.Y;
        for (int c = 0; c < c_.d; ++c) r.noise[c] = A.Z[c] - Bf.Z[c];
        if (conv_ == AdjointConvention::negated_z_coupling && k > 0) {
            const Jacobian JG = c_.dG(point(k, i));
            for (int c = 0; c < c_.d; ++c)
                for (int j = 0; j < c_.l; ++j) r.noise[c] -= 2.0 * JG[j].Z[c] * s.z[j];
        }
        if (conv_ == AdjointConvention::flipped_forward_noise)
            for (int c = 0; c < c_.d; ++c) r.noise[c] = -r.noise[c];
        return r;
    }

    Increment backward(int k, std::size_t i, const NodeValues& s) const {
        const auto [A, Bf] = blocks(k, i, s);
        Increment r;
        r.drift = -(A.y - Bf.y);
        for (int c = 0; c < c_.l; ++c) r.noise[c] = -(A.z[c] - Bf.z[c]);
        if (conv_ == AdjointConvention::flipped_backward_noise)
            for (int c = 0; c < c_.l; ++c) r.noise[c] = -r.noise[c];
        return r;
    }

    double terminal(std::size_t i, const NodeValues& s) const {
        const int N = grid_.steps();
        const double yN = base_.y[N][i];
        const double pN = s.y + forward(N, i, s).drift * grid_.dt();
        return -c_.dh(yN) * pN + c_.dPhi(yN);
    }

private:
    Point point(int k, std::size_t i) const {
        return make_point(grid_.node(k), base_.at(k, i), u_.value(k, i));
    }
    // A = [k>0] (p dF + k.dG),  B = [k<N] (q df + h.dg + dl)
    std::pair<Partials, Partials> blocks(int k, std::size_t i, const NodeValues& s) const {
        const Point p = point(k, i);
        Partials A, B;
        if (k > 0) {
            detail::accumulate(A, s.y, c_.dF(p));
            const Jacobian JG = c_.dG(p);
            for (int j = 0; j < c_.l; ++j) detail::accumulate(A, s.z[j], JG[j]);
        }
        if (k < grid_.steps()) {
            detail::accumulate(B, s.Y, c_.df(p));
            const Jacobian Jg = c_.dg(p);
            for (int j = 0; j < c_.d; ++j) detail::accumulate(B, s.Z[j], Jg[j]);
            detail::accumulate(B, 1.0, c_.drunning(p));
        }
        return {A, B};
    }

    const CoefficientSet& c_;
    const LatticeQuadruple& base_;
    const ControlPath& u_;
    const TimeGrid& grid_;
    AdjointConvention conv_;
};

struct AdjointResult {
    LatticeQuadruple fields;  // slots (p, q, k, h)
    int iterations = 0;
    ResidualNorms residuals;
};

inline AdjointValues adjoint_at(const LatticeQuadruple& adj, int k, std::size_t i) {
    const NodeValues s = adj.at(k, i);
    return {s.y, s.Y, s.z, s.Z};
}

inline AdjointResult solve_adjoint(const CoefficientSet& c, const LatticeQuadruple& optimal, const ControlPath& u,
                                   const Lattice& lat, const SolverConfig& cfg,
                                   AdjointConvention conv = AdjointConvention::hamiltonian) {
    cfg.validate();
    detail::require_match(lat, optimal, "optimal trajectory");
    check_control_on_lattice(u, lat);
    const AdjointDriver drv(c, optimal, u, lat.grid(), conv);
    PicardOutcome po = picard(drv, lat, cfg.picard());
    AdjointResult r;
    r.residuals = residual_verify(drv, lat, po.fields);
    r.fields = std::move(po.fields);
    r.iterations = po.iterations;
    return r;
}

/// Defects of a candidate (p, q, k, h) in the discrete adjoint equations.
inline ResidualNorms adjoint_residual_verify(const CoefficientSet& c, const LatticeQuadruple& optimal, const ControlPath& u,
                                             const LatticeQuadruple& candidate, const Lattice& lat,
                                             AdjointConvention conv = AdjointConvention::hamiltonian) {
    detail::require_match(lat, optimal, "optimal trajectory");
    detail::require_match(lat, candidate, "adjoint candidate");
    return residual_verify(AdjointDriver(c, optimal, u, lat.grid(), conv), lat, candidate);
}

// ---- Hamiltonian checks ----

/// Node-masked Hamiltonian used by the discrete duality identity:
///   [k<N] (q f + h.g + l) - [k>0] (p F + k.G).
inline double masked_hamiltonian(const CoefficientSet& c, int k, int N, double t, const NodeValues& s, double v,
                                 const AdjointValues& a) {
    const Point pt = make_point(t, s, v);
    double H = 0.0;
    if (k < N) {
        const NoiseVec g = c.g(pt);
        H += a.q * c.f(pt) + c.running(pt);
        for (int i = 0; i < c.d; ++i) H += a.h[i] * g[i];
    }
    if (k > 0) {
        const NoiseVec G = c.G(pt);
        H -= a.p * c.F(pt);
        for (int i = 0; i < c.l; ++i) H -= a.k[i] * G[i];
    }
    return H;
}

struct DualityReport {
    double lhs = 0.0;  // E[Phi_y y1_N] + E[gamma_Y Y1_0] + E sum l_zeta.zeta1 dt
    double rhs = 0.0;  // E sum [H(u^eps) - H(u)] dt - E sum [l(u^eps) - l(u)] dt
    double residual() const { return std::abs(lhs - rhs); }
};

inline DualityReport duality_residual(const CoefficientSet& c, const LatticeQuadruple& optimal, const ControlPath& u,
                                      const ControlPath& ueps, const LatticeQuadruple& variational,
                                      const LatticeQuadruple& adjoint, const Lattice& lat) {
    detail::require_match(lat, optimal, "optimal trajectory");
    detail::require_match(lat, variational, "variational solution");
    detail::require_match(lat, adjoint, "adjoint solution");
    const int N = lat.steps();
    const double dt = lat.dt();
    DualityReport r;
    double term = 0.0, init = 0.0;
    for (std::size_t i = 0; i < lat.node_size(N); ++i) term += c.dPhi(optimal.y[N][i]) * variational.y[N][i];
    for (std::size_t i = 0; i < lat.node_size(0); ++i) init += c.dgamma(optimal.Y[0][i]) * variational.Y[0][i];
    r.lhs = term / static_cast<double>(lat.node_size(N)) + init / static_cast<double>(lat.node_size(0));
    for (int k = 0; k <= N; ++k) {
        const double t = lat.grid().node(k);
        double sl = 0.0, sh = 0.0;
        for (std::size_t i = 0; i < lat.node_size(k); ++i) {
            const NodeValues b = optimal.at(k, i);
            const double v = u.value(k, i), ve = ueps.value(k, i);
            const AdjointValues a = adjoint_at(adjoint, k, i);
            sh += masked_hamiltonian(c, k, N, t, b, ve, a) - masked_hamiltonian(c, k, N, t, b, v, a);
            if (k < N) {
                const Point p = make_point(t, b, v);
                sl += detail::dot(c.drunning(p), variational.at(k, i), c.d, c.l);
                sh -= c.running(make_point(t, b, ve)) - c.running(p);
            }
        }
        const double n = static_cast<double>(lat.node_size(k));
        r.lhs += sl / n * dt;
        r.rhs += sh / n * dt;
    }
    return r;
}

struct ConventionScreen {
    AdjointConvention convention;
    double residual = 0.0;
    bool accepted = false;
    std::string note;  // solver failure message, if any
};

/// Solves the adjoint under every convention and keeps those satisfying the duality
/// identity within `tol` for the given spike.
inline std::vector<ConventionScreen> screen_conventions(const CoefficientSet& c, const LatticeQuadruple& optimal,
                                                        const ControlPath& u, const ControlPath& ueps,
                                                        const Lattice& lat, const SolverConfig& cfg, double tol) {
    const auto var = solve_variational(c, optimal, u, ueps, lat, cfg);
    std::vector<ConventionScreen> out;
    for (auto conv : kAllConventions) {
        ConventionScreen s;
        s.convention = conv;
        try {
            const auto adj = solve_adjoint(c, optimal, u, lat, cfg, conv);
            s.residual = duality_residual(c, optimal, u, ueps, var.fields, adj.fields, lat).residual();
            s.accepted = s.residual < tol;
        } catch (const ConvergenceError& e) {
            s.residual = std::numeric_limits<double>::infinity();
            s.note = e.what();
        }
        out.push_back(s);
    }
    return out;
}

struct SmpReport {
    double min_gap = std::numeric_limits<double>::infinity();
    int worst_node = -1;
    std::size_t worst_index = 0;
    double worst_v = 0.0;
    std::vector<double> min_gap_per_v;  // over (t, omega), in v-grid order
    bool pass(double tol = 1e-10) const { return min_gap >= -tol; }
};

/// gap(v) = H(v) - H(u_t) at every node t_0..t_{N-1} and every lattice class.
inline SmpReport check_smp(const CoefficientSet& c, const LatticeQuadruple& optimal, const ControlPath& u,
                           const LatticeQuadruple& adjoint, const std::vector<double>& vgrid, const Lattice& lat) {
    detail::require_match(lat, optimal, "optimal trajectory");
    detail::require_match(lat, adjoint, "adjoint solution");
    check_control_on_lattice(u, lat);
    for (double v : vgrid)
        if (!c.domain.contains(v)) throw DomainError("v-grid leaves the control domain");
    SmpReport r;
    r.min_gap_per_v.assign(vgrid.size(), std::numeric_limits<double>::infinity());
    for (int k = 0; k < lat.steps(); ++k) {
        const double t = lat.grid().node(k);
        for (std::size_t i = 0; i < lat.node_size(k); ++i) {
            const NodeValues s = optimal.at(k, i);
            const AdjointValues a = adjoint_at(adjoint, k, i);
            const double H0 = hamiltonian(c, t, s, u.value(k, i), a);
            for (std::size_t j = 0; j < vgrid.size(); ++j) {
                const double gap = hamiltonian(c, t, s, vgrid[j], a) - H0;
                r.min_gap_per_v[j] = std::min(r.min_gap_per_v[j], gap);
                if (gap < r.min_gap) {
                    r.min_gap = gap;
                    r.worst_node = k;
                    r.worst_index = i;
                    r.worst_v = vgrid[j];
                }
            }
        }
    }
    return r;
}

/// E sum_{k<N} [l_zeta.zeta1 + l(u^eps) - l(u)] dt + E[Phi_y y1_N] + E[gamma_Y Y1_0].
inline double variational_inequality(const CoefficientSet& c, const LatticeQuadruple& optimal, const ControlPath& u,
                                     const ControlPath& ueps, const LatticeQuadruple& variational,
                                     const Lattice& lat) {
    detail::require_match(lat, optimal, "optimal trajectory");
    detail::require_match(lat, variational, "variational solution");
    const int N = lat.steps();
    double total = 0.0;
    for (int k = 0; k < N; ++k) {
        const double t = lat.grid().node(k);
        double s = 0.0;
        for (std::size_t i = 0; i < lat.node_size(k); ++i) {
            const NodeValues b = optimal.at(k, i);
            const Point p = make_point(t, b, u.value(k, i));
            s += detail::dot(c.drunning(p), variational.at(k, i), c.d, c.l) +
                 c.running(make_point(t, b, ueps.value(k, i))) - c.running(p);
        }
        total += s / static_cast<double>(lat.node_size(k)) * lat.dt();
    }
    double term = 0.0, init = 0.0;
    for (std::size_t i = 0; i < lat.node_size(N); ++i) term += c.dPhi(optimal.y[N][i]) * variational.y[N][i];
    for (std::size_t i = 0; i < lat.node_size(0); ++i) init += c.dgamma(optimal.Y[0][i]) * variational.Y[0][i];
    return total + term / static_cast<double>(lat.node_size(N)) + init / static_cast<double>(lat.node_size(0));
}

// ---- order-of-epsilon experiment ----

struct SlopeFit {
    bool defined = false;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    double stderr = std::numeric_limits<double>::quiet_NaN();
};

/// Least-squares line through (log x, log y); undefined if any y <= 0 or fewer than 2 points.
inline SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    SlopeFit f;
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return f;
    for (std::size_t i = 0; i < n; ++i)
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) return f;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += std::pow(std::log(x[i]) - mx, 2);
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    }
    if (sxx == 0.0) return f;
    f.defined = true;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::log(y[i]) - f.intercept - f.slope * std::log(x[i]);
            ss += e * e;
        }
        f.stderr = std::sqrt(ss / (n - 2) / sxx);
    } else {
        f.stderr = 0.0;
    }
    return f;
}

enum class OrderQuantity {
    int_y1, int_Y1, int_z1, int_Z1,          // E int |.1|^2
    sup_y1, sup_Y1,                          // E sup_t |.1|^2
    rem_int_y, rem_int_Y, rem_int_z, rem_int_Z,  // E int |.eps - . - .1|^2
    rem_sup_y, rem_sup_Y,                    // sup_t E |.eps - . - .1|^2
    count
};

inline constexpr int kOrderQuantities = static_cast<int>(OrderQuantity::count);

inline const char* to_string(OrderQuantity q) {
    static const char* names[] = {"E_int_y1",     "E_int_Y1",     "E_int_z1",     "E_int_Z1",
                                  "E_sup_y1",     "E_sup_Y1",     "rem_E_int_y",  "rem_E_int_Y",
                                  "rem_E_int_z",  "rem_E_int_Z",  "rem_sup_E_y",  "rem_sup_E_Y"};
    return names[static_cast<int>(q)];
}

/// Slope floor for a quantity family.
inline double order_floor(OrderQuantity q) {
    return q == OrderQuantity::sup_y1 || q == OrderQuantity::sup_Y1 ? 0.9 : 1.35;
}

struct OrderReport {
    std::vector<double> eps;                 // effective widths
    std::vector<std::vector<double>> values;  // [quantity][eps index]
    std::vector<SlopeFit> slopes;             // per quantity
    std::vector<int> picard_iterations;       // perturbed + variational per eps

    double value(OrderQuantity q, std::size_t i) const { return values[static_cast<int>(q)][i]; }
    const SlopeFit& slope(OrderQuantity q) const { return slopes[static_cast<int>(q)]; }
};

namespace detail {

// Quadratures: y, Y, Z on nodes 0..N-1 (left endpoint); z on nodes 1..N (it lives on
// the right end of each step).
inline double integral_sq(const Lattice& lat, const std::vector<std::vector<double>>& f, int dim, int from, int to) {
    double s = 0.0;
    for (int k = from; k < to; ++k) {
        double m = 0.0;
        for (double v : f[k]) m += v * v;
        s += m / static_cast<double>(lat.node_size(k)) * lat.dt();
    }
    (void)dim;
    return s;
}

inline double expected_sup_sq(const Lattice& lat, const std::vector<std::vector<double>>& f) {
    std::vector<double> best(lat.atom_count(), 0.0);
    for (int k = 0; k <= lat.steps(); ++k) {
        const auto& row = f[k];
        for (std::size_t a = 0; a < best.size(); ++a) {
            const double v = row[lat.node_of_atom(k, a)];
            best[a] = std::max(best[a], v * v);
        }
    }
    return lat.mean(best);
}

inline double sup_expected_sq(const Lattice& lat, const std::vector<std::vector<double>>& f) {
    double s = 0.0;
    for (int k = 0; k <= lat.steps(); ++k) {
        double m = 0.0;
        for (double v : f[k]) m += v * v;
        s = std::max(s, m / static_cast<double>(lat.node_size(k)));
    }
    return s;
}

}  // namespace detail

/// For each window length in `steps_list` (spike from node `first` with value v),
/// solves the perturbed and variational systems and measures every quantity family.
inline OrderReport order_experiment(const CoefficientSet& c, const ControlPath& u, int first, double v,
                                    const std::vector<int>& steps_list, const Lattice& lat, const SolverConfig& cfg,
                                    const LatticeQuadruple* optimal = nullptr) {
    if (steps_list.size() < 4) throw DomainError("order experiment needs at least 4 epsilon values");
    const int N = lat.steps();
    LatticeQuadruple base = optimal ? *optimal : solve_lattice(c, u, lat, cfg).solution;
    OrderReport r;
    r.values.assign(kOrderQuantities, {});
    for (int m : steps_list) {
        const SpikeWindow w = node_window(lat.grid(), first, m, v);
        const ControlPath ue = spike_control(u, w);
        const SolveReport pert = solve_lattice(c, ue, lat, cfg, &base);
        const VariationalResult var = solve_variational(c, base, u, ue, lat, cfg);
        LatticeQuadruple rem = pert.solution;
        rem -= base;
        rem -= var.fields;
        const auto& q1 = var.fields;
        auto put = [&r](OrderQuantity q, double x) { r.values[static_cast<int>(q)].push_back(x); };
        put(OrderQuantity::int_y1, detail::integral_sq(lat, q1.y, 1, 0, N));
        put(OrderQuantity::int_Y1, detail::integral_sq(lat, q1.Y, 1, 0, N));
        put(OrderQuantity::int_z1, detail::integral_sq(lat, q1.z, c.l, 1, N + 1));
        put(OrderQuantity::int_Z1, detail::integral_sq(lat, q1.Z, c.d, 0, N));
        put(OrderQuantity::sup_y1, detail::expected_sup_sq(lat, q1.y));
        put(OrderQuantity::sup_Y1, detail::expected_sup_sq(lat, q1.Y));
        put(OrderQuantity::rem_int_y, detail::integral_sq(lat, rem.y, 1, 0, N));
        put(OrderQuantity::rem_int_Y, detail::integral_sq(lat, rem.Y, 1, 0, N));
        put(OrderQuantity::rem_int_z, detail::integral_sq(lat, rem.z, c.l, 1, N + 1));
        put(OrderQuantity::rem_int_Z, detail::integral_sq(lat, rem.Z, c.d, 0, N));
        put(OrderQuantity::rem_sup_y, detail::sup_expected_sq(lat, rem.y));
        put(OrderQuantity::rem_sup_Y, detail::sup_expected_sq(lat, rem.Y));
        r.eps.push_back(w.eps);
        r.picard_iterations.push_back(pert.iterations + var.iterations);
    }
    for (const auto& vals : r.values) r.slopes.push_back(fit_slope(r.eps, vals));
    return r;
}

/// Scalar monotone linear system used for the order experiment: only f depends on v.
///   f = -a Y + s y + tau z + v (1 + kappa y),  g = sigma y - a Z + s' z,
///   F = a y + s Y + sigma Z,                   G = a z + s' Z + tau Y,
///   h = c_h y,  l = 1/2 (y^2 + Y^2 + z^2 + Z^2 + v^2),  Phi = 1/2 y^2,  gamma = 1/2 Y^2.
/// <A(zeta) - A(zeta'), zeta - zeta'> = -a |zeta - zeta'|^2, so mu = a.
inline LinearSystem designated_order_system() {
    const double a = 0.2, s = 0.2, tau = 0.1, sigma = 0.2, s2 = 0.1, kappa = 0.1, ch = 0.5;
    LinearSystem L = LinearSystem::zero(1, 1);
    L.x0 = 1.0;
    // zeta = (y, Y, z, Z)
    L.f.state = {s, -a, tau, 0.0};
    L.f.control = 1.0;
    L.f.control_state = {kappa, 0.0, 0.0, 0.0};
    L.g[0].state = {sigma, 0.0, s2, -a};
    L.F.state = {a, s, 0.0, sigma};
    L.G[0].state = {0.0, tau, a, s2};
    L.h1 = ch;
    for (int i = 0; i < 4; ++i) L.cost_state[i][i] = 1.0;
    L.cost_control = 1.0;
    L.phi2 = 1.0;
    L.gamma2 = 1.0;
    L.constants.monotonicity = a;
    L.constants.lipschitz = 2.0;
    L.constants.derivative_bound = 2.0;
    return L;
}

}  // namespace fbdsde
