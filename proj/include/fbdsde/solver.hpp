#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fbdsde/model.hpp"
#include "fbdsde/sweep.hpp"

namespace fbdsde {

enum class BackwardFeature { increment, tail };  // dB_k and B_T - B_{t_{k+1}}
enum class BasisKind { polynomial, full_sigma };

struct SolverConfig {
    int picard_max_iters = 50;
    double picard_tol = 1e-10;
    double picard_relaxation = 1.0;  // 1 with anderson_depth 0 is plain Picard
    int anderson_depth = 0;
    BasisKind basis = BasisKind::polynomial;
    int poly_degree = 3;
    std::vector<BackwardFeature> features = {BackwardFeature::increment, BackwardFeature::tail};
    std::size_t mc_paths = 100000;
    std::uint64_t seed = 1;
    bool antithetic = false;

    void validate() const {
        if (picard_max_iters < 1) throw ConfigError("picard_max_iters must be >= 1");
        if (!(picard_tol > 0.0)) throw ConfigError("picard_tol must be positive");
        if (!(picard_relaxation > 0.0 && picard_relaxation <= 1.0))
            throw ConfigError("picard_relaxation must lie in (0, 1]");
        if (anderson_depth < 0) throw ConfigError("anderson_depth must be >= 0");
        if (poly_degree < 0) throw ConfigError("poly_degree must be >= 0");
        if (mc_paths == 0) throw ConfigError("mc_paths must be positive");
    }
    PicardSettings picard() const { return {picard_max_iters, picard_tol, picard_relaxation, anderson_depth}; }
};

struct SolveReport {
    LatticeQuadruple solution;
    int iterations = 0;
    double final_change = 0.0;
    std::vector<double> history;
    bool monotone_history = true;
    ResidualNorms residuals;  // recomputed from `solution`
};

/// The state system of a CoefficientSet under a given control law.
class CoefficientDriver {
public:
    CoefficientDriver(const CoefficientSet& c, const ControlLaw& u, const TimeGrid& grid)
        : c_(c), u_(u), grid_(grid) {}

    double initial(std::size_t) const { return c_.x0; }
    Increment forward(int k, std::size_t i, const NodeValues& s) const {
        const Point p = point(k, i, s);
        return {c_.f(p), c_.g(p)};
    }
    Increment backward(int k, std::size_t i, const NodeValues& s) const {
        const Point p = point(k, i, s);
        return {c_.F(p), c_.G(p)};
    }
    double terminal(std::size_t, const NodeValues& s) const { return c_.h(s.y); }

private:
    Point point(int k, std::size_t i, const NodeValues& s) const {
        const double t = grid_.node(k);
        return make_point(t, s, control_value(u_, t, k, i, s.y));
    }
    const CoefficientSet& c_;
    const ControlLaw& u_;
    const TimeGrid& grid_;
};

inline void check_control_on_lattice(const ControlLaw& u, const Lattice& lat) {
    const auto* path = std::get_if<ControlPath>(&u);
    if (!path) return;
    if (path->steps() != lat.steps()) throw DomainError("control path and lattice grids differ");
    for (int k = 0; k <= lat.steps(); ++k) {
        const auto n = path->node(k).size();
        if (n != 1 && n != lat.node_size(k)) throw DomainError("control node field does not match the lattice");
    }
}

inline ResidualNorms residual_verify(const CoefficientSet& c, const ControlLaw& u, const LatticeQuadruple& cand,
                                     const Lattice& lat) {
    check_control_on_lattice(u, lat);
    return residual_verify(CoefficientDriver(c, u, lat.grid()), lat, cand);
}

inline SolveReport solve_lattice(const CoefficientSet& c, const ControlLaw& u, const Lattice& lat,
                                 const SolverConfig& cfg, const LatticeQuadruple* warm = nullptr) {
    cfg.validate();
    if (c.d != lat.d() || c.l != lat.l()) throw DomainError("coefficient and lattice driver dimensions differ");
    check_control_on_lattice(u, lat);
    const CoefficientDriver drv(c, u, lat.grid());
    PicardOutcome po = picard(drv, lat, cfg.picard(), warm);
    SolveReport rep;
    rep.residuals = residual_verify(drv, lat, po.fields);
    rep.solution = std::move(po.fields);
    rep.iterations = po.iterations;
    rep.final_change = po.final_change;
    rep.history = std::move(po.history);
    rep.monotone_history = po.monotone_history;
    return rep;
}

// ---- partially coupled systems on Monte Carlo paths ----

/// dX = b dt + sigma dW from (t0, x0); dY = -f dt - g dB^ + Z dW, Y_T = terminal(X_T).
/// Scalar X, W and B.  Time arguments are absolute (t0 + local time).
struct PartiallyCoupledSystem {
    double t0 = 0.0, x0 = 0.0;
    std::function<double(double t, double x, double v)> b;
    std::function<double(double t, double x)> sigma;
    std::function<double(double t, double x, double y, double z, double v)> f;
    std::function<double(double t, double x, double y, double z)> g;
    std::function<double(double x)> terminal;
};

/// Same system as a CoefficientSet (y <-> X, z unused, Y, Z), for the lattice solver.
inline CoefficientSet as_coefficients(const PartiallyCoupledSystem& s) {
    CoefficientSet c = CoefficientSet::zero(1, 1);
    c.x0 = s.x0;
    const double t0 = s.t0;
    c.f = [s, t0](const Point& p) { return s.b(t0 + p.t, p.y, p.v); };
    c.g = [s, t0](const Point& p) { return NoiseVec{s.sigma(t0 + p.t, p.y)}; };
    c.F = [s, t0](const Point& p) { return s.f(t0 + p.t, p.y, p.Y, p.Z[0], p.v); };
    c.G = [s, t0](const Point& p) { return NoiseVec{s.g(t0 + p.t, p.y, p.Y, p.Z[0])}; };
    c.h = s.terminal;
    return c;
}

struct McSolveReport {
    PathQuadruple solution;  // y holds X; z is identically zero
    Estimate y0;             // mean of Y_0 over paths; stderr from the pathwise telescoped sum
    std::size_t basis_size = 0;
};

namespace detail {

/// Least-squares projection of several targets onto a fixed design matrix.
class Projector {
public:
    explicit Projector(const Eigen::MatrixXd& design) : qr_(design) {
        if (design.rows() < design.cols()) throw RegressionError("path count below basis size");
        if (qr_.rank() < design.cols()) throw RegressionError("singular regression matrix");
        design_ = &design;
    }
    Eigen::VectorXd fit(const Eigen::VectorXd& target) const { return (*design_) * qr_.solve(target); }

private:
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
    const Eigen::MatrixXd* design_ = nullptr;
};

}  // namespace detail

inline McSolveReport solve_partially_coupled_mc(const PartiallyCoupledSystem& sys, const ControlPath& u,
                                                const NoiseBundle& noise, const SolverConfig& cfg) {
    cfg.validate();
    if (noise.d() != 1 || noise.l() != 1) throw DomainError("partially coupled solver is scalar in W and B");
    const TimeGrid& grid = noise.grid();
    const int N = grid.steps();
    const std::size_t M = noise.paths();
    const double dt = grid.dt();
    if (u.steps() != N) throw DomainError("control path and noise grids differ");
    for (int k = 0; k <= N; ++k)
        if (u.node(k).size() != 1 && u.node(k).size() != M)
            throw DomainError("control node values must be deterministic or one per path");
    if (cfg.basis == BasisKind::full_sigma && 2 * N > 62) throw DomainError("full sigma basis needs 2N <= 62");

    McSolveReport rep;
    PathQuadruple& q = rep.solution;
    q = PathQuadruple::zeros(M, N);
    auto t_abs = [&](int k) { return sys.t0 + grid.node(k); };

    // Euler forward pass
    for (std::size_t m = 0; m < M; ++m) q.y[q.index(0, m)] = sys.x0;
    for (int k = 0; k < N; ++k)
        for (std::size_t m = 0; m < M; ++m) {
            const double x = q.y[q.index(k, m)];
            q.y[q.index(k + 1, m)] =
                x + sys.b(t_abs(k), x, u.value(k, m)) * dt + sys.sigma(t_abs(k), x) * noise.dW(m, k);
        }

    // B_T - B_{t_{k+1}} for every path, built from the tail
    std::vector<double> tail(static_cast<std::size_t>(N + 1) * M, 0.0);
    for (int k = N - 1; k >= 0; --k)
        for (std::size_t m = 0; m < M; ++m) tail[k * M + m] = tail[(k + 1) * M + m] + noise.dB(m, k);
    // tail[k*M+m] = B_T - B_{t_k}; the feature at step k is tail[(k+1)*M+m]

    std::vector<double> pathsum(M);
    for (std::size_t m = 0; m < M; ++m) {
        const double xN = q.y[q.index(N, m)];
        q.Y[q.index(N, m)] = sys.terminal(xN);
        pathsum[m] = q.Y[q.index(N, m)];
    }

    Eigen::VectorXd tY(M), tZ(M);
    for (int k = N - 1; k >= 0; --k) {
        for (std::size_t m = 0; m < M; ++m) {
            const auto j = q.index(k + 1, m);
            const double x = q.y[j], Y = q.Y[j], Z = q.Z[j];
            const double drift = sys.f(t_abs(k + 1), x, Y, Z, u.value(k + 1, m)) * dt;
            const double bnoise = sys.g(t_abs(k + 1), x, Y, Z) * noise.dB(m, k);
            const double pre = Y + drift + bnoise;
            pathsum[m] += drift + bnoise;
            tY(m) = pre;
            tZ(m) = pre * noise.dW(m, k) / dt;
        }
        Eigen::VectorXd fY, fZ;
        if (cfg.basis == BasisKind::full_sigma) {
            // group paths by the signs observed at F_{t_k}
            std::unordered_map<std::uint64_t, std::array<double, 3>> groups;
            std::vector<std::uint64_t> key(M);
            for (std::size_t m = 0; m < M; ++m) {
                std::uint64_t kk = 0;
                for (int j = 0; j < k; ++j) kk |= std::uint64_t{noise.dW(m, j) > 0.0} << j;
                for (int j = k; j < N; ++j) kk |= std::uint64_t{noise.dB(m, j) > 0.0} << (N + j);
                key[m] = kk;
                auto& g = groups[kk];
                g[0] += tY(m);
                g[1] += tZ(m);
                g[2] += 1.0;
            }
            fY.resize(M);
            fZ.resize(M);
            for (std::size_t m = 0; m < M; ++m) {
                const auto& g = groups[key[m]];
                fY(m) = g[0] / g[2];
                fZ(m) = g[1] / g[2];
            }
            rep.basis_size = std::max(rep.basis_size, groups.size());
        } else {
            // columns: standardised X^j (j = 0..p) times {1, dB_k, tail}; degenerate columns dropped
            double mean = 0.0, var = 0.0;
            for (std::size_t m = 0; m < M; ++m) mean += q.y[q.index(k, m)];
            mean /= static_cast<double>(M);
            for (std::size_t m = 0; m < M; ++m) var += std::pow(q.y[q.index(k, m)] - mean, 2);
            var /= static_cast<double>(M);
            const double sd = std::sqrt(var);
            const int degree = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? cfg.poly_degree : 0;
            std::vector<int> feats = {0};
            for (auto ft : cfg.features) {
                if (ft == BackwardFeature::increment) feats.push_back(1);
                if (ft == BackwardFeature::tail && k + 1 < N) feats.push_back(2);
            }
            const double tail_scale = k + 1 < N ? std::sqrt(grid.node(N) - grid.node(k + 1)) : 1.0;
            const auto cols = static_cast<Eigen::Index>((degree + 1) * feats.size());
            Eigen::MatrixXd A(static_cast<Eigen::Index>(M), cols);
            for (std::size_t m = 0; m < M; ++m) {
                const double x = degree > 0 ? (q.y[q.index(k, m)] - mean) / sd : 0.0;
                Eigen::Index col = 0;
                for (int ft : feats) {
                    const double fv = ft == 0 ? 1.0
                                      : ft == 1 ? noise.dB(m, k) / std::sqrt(dt)
                                                : tail[(k + 1) * M + m] / tail_scale;
                    double xp = 1.0;
                    for (int j = 0; j <= degree; ++j) {
                        A(static_cast<Eigen::Index>(m), col++) = xp * fv;
                        xp *= x;
                    }
                }
            }
            const detail::Projector proj(A);
            fY = proj.fit(tY);
            fZ = proj.fit(tZ);
            rep.basis_size = std::max(rep.basis_size, static_cast<std::size_t>(cols));
        }
        for (std::size_t m = 0; m < M; ++m) {
            q.Y[q.index(k, m)] = fY(static_cast<Eigen::Index>(m));
            q.Z[q.index(k, m)] = fZ(static_cast<Eigen::Index>(m));
        }
    }

    double s = 0.0;
    for (std::size_t m = 0; m < M; ++m) s += q.Y[q.index(0, m)];
    rep.y0.mean = s / static_cast<double>(M);
    rep.y0.stderr = sample_estimate(pathsum).stderr;
    return rep;
}

}  // namespace fbdsde
