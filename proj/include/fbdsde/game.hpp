#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "fbdsde/linear.hpp"
#include "fbdsde/solver.hpp"

namespace fbdsde {

// ---- degenerate example ----

/// dy = (z - Z + v) dW - z dB^,  dY = -(z + Z + v) dB^ + Z dW,  y_0 = 0, Y_T = 0,
/// J = 1/2 E int (y^2 + Y^2 + z^2 + Z^2 + v^2) dt + 1/2 E y_T^2 + 1/2 E Y_0^2,  U = [-1, 1].
inline LinearSystem degenerate_example_system() {
    LinearSystem s = LinearSystem::zero(1, 1);
    s.g[0].state = {0.0, 0.0, 1.0, -1.0};
    s.g[0].control = 1.0;
    s.G[0].state = {0.0, 0.0, 1.0, 1.0};
    s.G[0].control = 1.0;
    for (int i = 0; i < 4; ++i) s.cost_state[i][i] = 1.0;
    s.cost_control = 1.0;
    s.phi2 = 1.0;
    s.gamma2 = 1.0;
    s.domain = ControlDomain::interval(-1.0, 1.0);
    s.constants = {2.0, 0.0, 1.0};
    return s;
}

inline CoefficientSet degenerate_example_build() { return to_coefficients(degenerate_example_system()); }

// ---- two-player linear quadratic game ----

/// Which form of the candidate system to solve.
///   transposed:      forward dx = (Ax + B1 v1 + B2 v2 + Ck + alpha) dt + (Dx + Ek + beta) dW - k dB^,
///                    dy^i = -(A'y + D'h + R^i x) dt - (C'y + E'h + P^i k) dB^ + h dW.
///   reduced_forward: forward drift without Ck and diffusion Cx + beta (adjoints as above).
///   proof_adjoint:   adjoint drift A'y + C'h + R^i x.
/// The deviation states in verify_nash always follow the game dynamics (transposed forward).
enum class GameVariant { transposed, reduced_forward, proof_adjoint };

inline const char* to_string(GameVariant v) {
    switch (v) {
        case GameVariant::transposed: return "transposed";
        case GameVariant::reduced_forward: return "reduced_forward";
        case GameVariant::proof_adjoint: return "proof_adjoint";
    }
    return "?";
}

struct GameSpec {
    int n = 1, k = 1;
    Eigen::MatrixXd A, C, D, E;              // n x n
    Eigen::MatrixXd B1, B2;                  // n x k
    Eigen::MatrixXd R1, R2, P1, P2, Q1, Q2;  // n x n, symmetric >= 0
    Eigen::MatrixXd N1, N2;                  // k x k, symmetric > 0
    Eigen::VectorXd a;                       // x_0
    std::function<Eigen::VectorXd(double)> alpha, beta;  // deterministic; empty means zero

    static GameSpec zero(int n = 1, int k = 1) {
        GameSpec g;
        g.n = n;
        g.k = k;
        const auto Z = Eigen::MatrixXd::Zero(n, n);
        g.A = g.C = g.D = g.R1 = g.R2 = g.P1 = g.P2 = g.Q1 = g.Q2 = Z;
        g.E = 0.5 * Eigen::MatrixXd::Identity(n, n);
        g.B1 = g.B2 = Eigen::MatrixXd::Zero(n, k);
        g.N1 = g.N2 = Eigen::MatrixXd::Identity(k, k);
        g.a = Eigen::VectorXd::Zero(n);
        return g;
    }

    Eigen::VectorXd alpha_at(double t) const { return alpha ? alpha(t) : Eigen::VectorXd::Zero(n); }
    Eigen::VectorXd beta_at(double t) const { return beta ? beta(t) : Eigen::VectorXd::Zero(n); }

    void validate() const {
        auto shape = [](const Eigen::MatrixXd& m, int r, int c, const char* name) {
            if (m.rows() != r || m.cols() != c) throw ModelError(std::string("game matrix ") + name + " has the wrong shape");
        };
        if (n < 1 || k < 1) throw ModelError("game dimensions must be positive");
        for (auto [m, name] : {std::pair{&A, "A"}, {&C, "C"}, {&D, "D"}, {&E, "E"}, {&R1, "R1"}, {&R2, "R2"},
                               {&P1, "P1"}, {&P2, "P2"}, {&Q1, "Q1"}, {&Q2, "Q2"}})
            shape(*m, n, n, name);
        shape(B1, n, k, "B1");
        shape(B2, n, k, "B2");
        shape(N1, k, k, "N1");
        shape(N2, k, k, "N2");
        if (a.size() != n) throw ModelError("initial state has the wrong dimension");
        auto symmetric_min_eig = [](const Eigen::MatrixXd& m, const char* name) {
            if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
                throw ModelError(std::string("game matrix ") + name + " is not symmetric");
            return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff();
        };
        for (auto [m, name] : {std::pair{&R1, "R1"}, {&R2, "R2"}, {&P1, "P1"}, {&P2, "P2"}, {&Q1, "Q1"}, {&Q2, "Q2"}})
            if (symmetric_min_eig(*m, name) < -1e-12) throw ModelError(std::string("game matrix ") + name + " is not nonnegative");
        for (auto [m, name] : {std::pair{&N1, "N1"}, {&N2, "N2"}})
            if (symmetric_min_eig(*m, name) <= 1e-12) throw ModelError(std::string("game matrix ") + name + " is not positive");
        const double e = Eigen::JacobiSVD<Eigen::MatrixXd>(E).singularValues()(0);
        if (!(e > 0.0 && e < 1.0)) throw ModelError("game needs 0 < |E| < 1");
    }

    Eigen::MatrixXd S(int player) const {
        const auto& B = player == 1 ? B1 : B2;
        const auto& N = player == 1 ? N1 : N2;
        return B * N.inverse() * B.transpose();
    }
};

struct CommutationReport {
    double worst_defect = 0.0;  // Frobenius norm
    std::string worst_family;
    bool pass = true;
};

/// S_i M = M S_i for M in {A', C', D', E', P1, P2}, S_i = B^i (N^i)^{-1} (B^i)'.
inline CommutationReport check_commutation(const GameSpec& g) {
    g.validate();
    CommutationReport r;
    for (int i = 1; i <= 2; ++i) {
        const Eigen::MatrixXd S = g.S(i);
        const std::pair<Eigen::MatrixXd, const char*> fam[] = {
            {g.A.transpose(), "A'"}, {g.C.transpose(), "C'"}, {g.D.transpose(), "D'"},
            {g.E.transpose(), "E'"}, {g.P1, "P1"},            {g.P2, "P2"}};
        for (const auto& [M, name] : fam) {
            const double defect = (S * M - M * S).norm();
            if (defect > r.worst_defect) {
                r.worst_defect = defect;
                r.worst_family = std::string(name) + " with player " + std::to_string(i);
            }
        }
    }
    r.pass = r.worst_defect < 1e-10;
    return r;
}

/// Aggregated data: Y = S1 y1 + S2 y2 solves a single linear FBDSDE with
/// P = P1 S1 + P2 S2, R = S1 R1 + S2 R2 and terminal weight Q = S1 Q1 + S2 Q2.
struct AggregateSystem {
    Eigen::MatrixXd S1, S2, P, R, Q;
};

inline AggregateSystem build_aggregate(const GameSpec& g) {
    const auto cr = check_commutation(g);
    if (!cr.pass) throw ModelError("commutation assumption fails (" + cr.worst_family + ")");
    AggregateSystem a;
    a.S1 = g.S(1);
    a.S2 = g.S(2);
    a.P = g.P1 * a.S1 + g.P2 * a.S2;
    a.R = a.S1 * g.R1 + a.S2 * g.R2;
    a.Q = a.S1 * g.Q1 + a.S2 * g.Q2;
    return a;
}

namespace detail {

// Scalar game coefficients (n = k = 1).
struct ScalarGame {
    double A, C, D, E, B1, B2, N1, N2, R1, R2, P1, P2, Q1, Q2;
    std::function<double(double)> alpha, beta;

    explicit ScalarGame(const GameSpec& g)
        : A(g.A(0, 0)), C(g.C(0, 0)), D(g.D(0, 0)), E(g.E(0, 0)), B1(g.B1(0, 0)), B2(g.B2(0, 0)),
          N1(g.N1(0, 0)), N2(g.N2(0, 0)), R1(g.R1(0, 0)), R2(g.R2(0, 0)), P1(g.P1(0, 0)), P2(g.P2(0, 0)),
          Q1(g.Q1(0, 0)), Q2(g.Q2(0, 0)) {
        alpha = [g](double t) { return g.alpha_at(t)(0); };
        beta = [g](double t) { return g.beta_at(t)(0); };
    }
};

// Forward part of the candidate system; `control` is the drift contribution B1 u1 + B2 u2.
inline Increment game_forward(const ScalarGame& s, GameVariant v, double t, double x, double kx, double control) {
    if (v == GameVariant::reduced_forward) return {s.A * x + control + s.alpha(t), {s.C * x + s.beta(t)}};
    return {s.A * x + control + s.C * kx + s.alpha(t), {s.D * x + s.E * kx + s.beta(t)}};
}

// Adjoint coefficients, switched off at node N (no interval follows it).
inline Increment game_adjoint(const ScalarGame& s, GameVariant v, int k, int N, double x, double kx, double y,
                              double h, double R, double P) {
    if (k == N) return {};
    const double hc = v == GameVariant::proof_adjoint ? s.C : s.D;
    return {s.A * y + hc * h + R * x, {s.C * y + s.E * h + P * kx}};
}

}  // namespace detail

/// Slots: x in y, k in z, aggregate Y in Y, aggregate H in Z.
class GameAggregateDriver {
public:
    GameAggregateDriver(const GameSpec& g, GameVariant v, const TimeGrid& grid)
        : s_(g), v_(v), grid_(grid), agg_(build_aggregate(g)) {}

    double initial(std::size_t) const { return x0_; }
    Increment forward(int k, std::size_t, const NodeValues& s) const {
        return detail::game_forward(s_, v_, grid_.node(k), s.y, s.z[0], -s.Y);
    }
    Increment backward(int k, std::size_t, const NodeValues& s) const {
        return detail::game_adjoint(s_, v_, k, grid_.steps(), s.y, s.z[0], s.Y, s.Z[0], agg_.R(0, 0), agg_.P(0, 0));
    }
    double terminal(std::size_t, const NodeValues& s) const { return agg_.Q(0, 0) * s.y; }

    void set_initial(double x0) { x0_ = x0; }

private:
    detail::ScalarGame s_;
    GameVariant v_;
    const TimeGrid& grid_;
    AggregateSystem agg_;
    double x0_ = 0.0;
};

/// Player i's linear BDSDE given the aggregate forward solution.  The forward sweep
/// reproduces (x, k) from the stored aggregate Y.
class GameComponentDriver {
public:
    GameComponentDriver(const GameSpec& g, GameVariant v, const TimeGrid& grid, const LatticeQuadruple& agg,
                        int player)
        : s_(g), v_(v), grid_(grid), agg_(agg), player_(player), x0_(g.a(0)) {}

    double initial(std::size_t) const { return x0_; }
    Increment forward(int k, std::size_t i, const NodeValues& s) const {
        return detail::game_forward(s_, v_, grid_.node(k), s.y, s.z[0], -agg_.Y[k][i]);
    }
    Increment backward(int k, std::size_t, const NodeValues& s) const {
        const double R = player_ == 1 ? s_.R1 : s_.R2, P = player_ == 1 ? s_.P1 : s_.P2;
        return detail::game_adjoint(s_, v_, k, grid_.steps(), s.y, s.z[0], s.Y, s.Z[0], R, P);
    }
    double terminal(std::size_t, const NodeValues& s) const { return (player_ == 1 ? s_.Q1 : s_.Q2) * s.y; }

private:
    detail::ScalarGame s_;
    GameVariant v_;
    const TimeGrid& grid_;
    const LatticeQuadruple& agg_;
    int player_;
    double x0_;
};

struct NashCandidate {
    ControlPath u1, u2;            // u^i = -(N^i)^{-1} (B^i)' y^i, node fields
    LatticeQuadruple aggregate;    // (x, Y, k, H)
    LatticeQuadruple player1, player2;  // (x, y^i, k, h^i)
    GameVariant variant = GameVariant::transposed;
    double aggregation_defect = 0.0;  // sup |Y - S1 y1 - S2 y2| and the same for H
};

inline NashCandidate solve_game(const GameSpec& g, const Lattice& lat, const SolverConfig& cfg,
                                GameVariant variant = GameVariant::transposed) {
    g.validate();
    if (g.n != 1 || g.k != 1) throw DomainError("solve_game handles the scalar game (n = k = 1)");
    if (lat.d() != 1 || lat.l() != 1) throw DomainError("scalar game needs d = l = 1");
    const auto agg = build_aggregate(g);
    GameAggregateDriver drv(g, variant, lat.grid());
    drv.set_initial(g.a(0));
    LatticeQuadruple aggf = picard(drv, lat, cfg.picard()).fields;
    const GameComponentDriver c1(g, variant, lat.grid(), aggf, 1), c2(g, variant, lat.grid(), aggf, 2);
    LatticeQuadruple y1 = picard(c1, lat, cfg.picard()).fields;
    LatticeQuadruple y2 = picard(c2, lat, cfg.picard()).fields;

    const int N = lat.steps();
    const double m1 = g.B1(0, 0) / g.N1(0, 0), m2 = g.B2(0, 0) / g.N2(0, 0);
    std::vector<std::vector<double>> r1(N + 1), r2(N + 1);
    double defect = 0.0;
    for (int k = 0; k <= N; ++k) {
        r1[k].resize(lat.node_size(k));
        r2[k].resize(lat.node_size(k));
        for (std::size_t i = 0; i < lat.node_size(k); ++i) {
            r1[k][i] = -m1 * y1.Y[k][i];
            r2[k][i] = -m2 * y2.Y[k][i];
            defect = std::max(defect, std::abs(aggf.Y[k][i] - agg.S1(0, 0) * y1.Y[k][i] - agg.S2(0, 0) * y2.Y[k][i]));
            defect = std::max(defect, std::abs(aggf.Z[k][i] - agg.S1(0, 0) * y1.Z[k][i] - agg.S2(0, 0) * y2.Z[k][i]));
        }
    }
    return {ControlPath(std::move(r1), ControlDomain::real_line()), ControlPath(std::move(r2), ControlDomain::real_line()),
            std::move(aggf), std::move(y1), std::move(y2), variant, defect};
}

// ---- Nash verification ----

struct Deviation {
    std::string name;
    ControlLaw law;  // deterministic path or feedback on the state
};

/// Constants +-0.25 and +-0.5, sin(2 pi t / T), feedback -0.1 x.
inline std::vector<Deviation> standard_deviations(const TimeGrid& grid) {
    std::vector<Deviation> out;
    for (double c : {0.25, -0.25, 0.5, -0.5})
        out.push_back({"const " + std::to_string(c).substr(0, c < 0 ? 5 : 4), ControlPath::constant(grid, c)});
    const double T = grid.horizon();
    out.push_back({"sin", ControlPath::deterministic(grid, [T](double t) { return std::sin(2.0 * std::numbers::pi * t / T); })});
    out.push_back({"feedback -0.1x", FeedbackRule([](double, double x) { return -0.1 * x; })});
    return out;
}

namespace detail {

/// Forward-only state under (v1, v2) following the game dynamics; one sweep is exact
/// because k at node j is fixed before the drift at node j is used.
class GameStateDriver {
public:
    GameStateDriver(const GameSpec& g, const TimeGrid& grid, const ControlLaw& v1, const ControlLaw& v2)
        : s_(g), grid_(grid), v1_(v1), v2_(v2), x0_(g.a(0)) {}
    double initial(std::size_t) const { return x0_; }
    Increment forward(int k, std::size_t i, const NodeValues& s) const {
        const double t = grid_.node(k);
        const double ctl = s_.B1 * control_value(v1_, t, k, i, s.y) + s_.B2 * control_value(v2_, t, k, i, s.y);
        return game_forward(s_, GameVariant::transposed, t, s.y, s.z[0], ctl);
    }
    Increment backward(int, std::size_t, const NodeValues&) const { return {}; }
    double terminal(std::size_t, const NodeValues&) const { return 0.0; }

private:
    ScalarGame s_;
    const TimeGrid& grid_;
    const ControlLaw& v1_;
    const ControlLaw& v2_;
    double x0_;
};

struct GamePath {
    LatticeQuadruple state;  // x in y, k in z
    std::vector<std::vector<double>> v1, v2;  // realised controls on nodes 0..N-1
};

inline GamePath game_state(const GameSpec& g, const Lattice& lat, const ControlLaw& v1, const ControlLaw& v2) {
    check_control_on_lattice(v1, lat);
    check_control_on_lattice(v2, lat);
    GamePath p;
    p.state = LatticeQuadruple::zeros(lat);
    const GameStateDriver drv(g, lat.grid(), v1, v2);
    forward_sweep(drv, lat, p.state);
    const int N = lat.steps();
    p.v1.resize(N);
    p.v2.resize(N);
    for (int k = 0; k < N; ++k) {
        const double t = lat.grid().node(k);
        for (std::size_t i = 0; i < lat.node_size(k); ++i) {
            p.v1[k].push_back(control_value(v1, t, k, i, p.state.y[k][i]));
            p.v2[k].push_back(control_value(v2, t, k, i, p.state.y[k][i]));
        }
    }
    return p;
}

/// Player i's cost on every atom: 1/2 sum_{j<N} (R x^2 + N v^2 + P k^2) dt + 1/2 Q x_N^2.
inline std::vector<double> game_atom_costs(const GameSpec& g, const Lattice& lat, const GamePath& p, int player) {
    const double R = (player == 1 ? g.R1 : g.R2)(0, 0), Nw = (player == 1 ? g.N1 : g.N2)(0, 0);
    const double P = (player == 1 ? g.P1 : g.P2)(0, 0), Q = (player == 1 ? g.Q1 : g.Q2)(0, 0);
    const auto& v = player == 1 ? p.v1 : p.v2;
    const int N = lat.steps();
    std::vector<double> J(lat.atom_count(), 0.0);
    for (int k = 0; k < N; ++k)
        for (std::size_t a = 0; a < J.size(); ++a) {
            const std::size_t i = lat.node_of_atom(k, a);
            const double x = p.state.y[k][i], kx = p.state.z[k][i];
            J[a] += 0.5 * (R * x * x + Nw * v[k][i] * v[k][i] + P * kx * kx) * lat.dt();
        }
    for (std::size_t a = 0; a < J.size(); ++a) {
        const double x = p.state.y[N][lat.node_of_atom(N, a)];
        J[a] += 0.5 * Q * x * x;
    }
    return J;
}

}  // namespace detail

struct NashEntry {
    int player = 1;
    std::string deviation;
    Estimate difference;         // J^i(deviation) - J^i(candidate), Monte Carlo
    double exact_difference = 0.0;  // the same over the full lattice
    Estimate first_order;        // E sum (N u + B'y)(v - u) dt
    Estimate duality;            // E[Q x_N dx_N] - E sum (B'y dv - R x dx - P k dk) dt
    double exact_duality = 0.0;
    bool pass = false;
};

struct NashReport {
    std::vector<NashEntry> entries;
    bool pass = true;
};

/// Estimates every player's cost difference under each deviation from the paths of
/// `noise` (each path is mapped to the lattice atom with the same increment signs).
inline NashReport verify_nash(const GameSpec& g, const NashCandidate& cand, const std::vector<Deviation>& deviations,
                              const Lattice& lat, const NoiseBundle& noise, double k_sigma = 3.0) {
    g.validate();
    const ControlLaw u1 = cand.u1, u2 = cand.u2;
    const detail::GamePath base = detail::game_state(g, lat, u1, u2);
    std::vector<std::size_t> atoms(noise.paths());
    for (std::size_t m = 0; m < atoms.size(); ++m) atoms[m] = lat.atom_of_path(noise, m);
    const int N = lat.steps();
    const double dt = lat.dt();

    NashReport rep;
    for (int player = 1; player <= 2; ++player) {
        const auto& own = player == 1 ? cand.player1 : cand.player2;
        const double Bi = (player == 1 ? g.B1 : g.B2)(0, 0), Ni = (player == 1 ? g.N1 : g.N2)(0, 0);
        const double Ri = (player == 1 ? g.R1 : g.R2)(0, 0), Pi = (player == 1 ? g.P1 : g.P2)(0, 0);
        const double Qi = (player == 1 ? g.Q1 : g.Q2)(0, 0);
        const auto J0 = detail::game_atom_costs(g, lat, base, player);
        std::vector<Deviation> devs = deviations;
        devs.push_back({"own control", player == 1 ? u1 : u2});
        for (const auto& dev : devs) {
            const detail::GamePath pv = player == 1 ? detail::game_state(g, lat, dev.law, u2)
                                                    : detail::game_state(g, lat, u1, dev.law);
            const auto J1 = detail::game_atom_costs(g, lat, pv, player);
            const auto& vv = player == 1 ? pv.v1 : pv.v2;
            const auto& vu = player == 1 ? base.v1 : base.v2;
            std::vector<double> first(lat.atom_count(), 0.0), dual(lat.atom_count(), 0.0);
            for (int k = 0; k < N; ++k)
                for (std::size_t a = 0; a < first.size(); ++a) {
                    const std::size_t i = lat.node_of_atom(k, a);
                    const double dv = vv[k][i] - vu[k][i];
                    const double y = own.Y[k][i];
                    const double dx = pv.state.y[k][i] - base.state.y[k][i];
                    const double dk = pv.state.z[k][i] - base.state.z[k][i];
                    first[a] += (Ni * vu[k][i] + Bi * y) * dv * dt;
                    dual[a] -= (Bi * y * dv - Ri * base.state.y[k][i] * dx - Pi * base.state.z[k][i] * dk) * dt;
                }
            for (std::size_t a = 0; a < dual.size(); ++a) {
                const std::size_t i = lat.node_of_atom(N, a);
                dual[a] += Qi * base.state.y[N][i] * (pv.state.y[N][i] - base.state.y[N][i]);
            }
            std::vector<double> diff(atoms.size()), fo(atoms.size()), du(atoms.size());
            for (std::size_t m = 0; m < atoms.size(); ++m) {
                diff[m] = J1[atoms[m]] - J0[atoms[m]];
                fo[m] = first[atoms[m]];
                du[m] = dual[atoms[m]];
            }
            NashEntry e;
            e.player = player;
            e.deviation = dev.name;
            e.difference = sample_estimate(diff);
            double exact = 0.0;
            for (std::size_t a = 0; a < J1.size(); ++a) exact += J1[a] - J0[a];
            e.exact_difference = exact * lat.weight();
            e.first_order = sample_estimate(fo);
            e.duality = sample_estimate(du);
            e.exact_duality = lat.mean(dual);
            const double slack = std::max(k_sigma * e.difference.stderr, 1e-12);
            e.pass = e.difference.mean >= -slack;
            rep.pass = rep.pass && e.pass;
            rep.entries.push_back(std::move(e));
        }
    }
    return rep;
}

/// Scalar game with A = C = D = 0, E = 0.5, a = 1, R1 = Q1 = 1, B = N = 1 and every
/// other weight zero.
inline GameSpec derived_scalar_game() {
    GameSpec g = GameSpec::zero(1, 1);
    g.E(0, 0) = 0.5;
    g.a(0) = 1.0;
    g.R1(0, 0) = g.Q1(0, 0) = 1.0;
    g.B1(0, 0) = g.B2(0, 0) = 1.0;
    return g;
}

}  // namespace fbdsde
