#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fbdsde/errors.hpp"
#include "fbdsde/fields.hpp"
#include "fbdsde/lattice.hpp"

namespace fbdsde {

// A driver supplies the coefficients of one discrete system
//   y_{k+1} + z_{k+1}.dB_k = y_k + f_k dt + g_k.dW_k          (forward step, f/g at node k)
//   Y_k + Z_k.dW_k = Y_{k+1} + F_{k+1} dt + G_{k+1}.dB_k      (backward step, F/G at node k+1)
// with y_0 = initial(i) and Y_N = terminal(i, (y_N, z_N)).  Node indices i are the
// compressed node-field indices of the lattice.
template <class D>
concept LatticeDriver = requires(const D& drv, int k, std::size_t i, const NodeValues& s) {
    { drv.initial(i) } -> std::convertible_to<double>;
    { drv.forward(k, i, s) } -> std::same_as<Increment>;
    { drv.backward(k, i, s) } -> std::same_as<Increment>;
    { drv.terminal(i, s) } -> std::convertible_to<double>;
};

/// Recomputes y, z from the current Y, Z (fresh values are used as soon as they exist).
template <LatticeDriver D>
void forward_sweep(const D& drv, const Lattice& lat, LatticeQuadruple& q) {
    const int N = lat.steps(), d = lat.d(), l = lat.l();
    const double dt = lat.dt();
    const std::size_t nb = std::size_t{1} << l;
    for (std::size_t i = 0; i < lat.node_size(0); ++i) q.y[0][i] = drv.initial(i);
    std::vector<Increment> inc;
    for (int k = 0; k < N; ++k) {
        inc.resize(lat.node_size(k));
        for (std::size_t i = 0; i < inc.size(); ++i) inc[i] = drv.forward(k, i, q.at(k, i));
        auto& y1 = q.y[k + 1];
        auto& z1 = q.z[k + 1];
        for (std::size_t n = 0; n < lat.node_size(k + 1); ++n) {
            double sy = 0.0;
            double sz[kMaxNoiseDim] = {};
            for (std::size_t b = 0; b < nb; ++b) {
                const std::size_t iv = lat.interval_from_after(k, n, b);
                const std::size_t i = lat.node_before(k, iv);
                double pre = q.y[k][i] + inc[i].drift * dt;
                for (int c = 0; c < d; ++c) pre += inc[i].noise[c] * lat.interval_dW(k, iv, c);
                sy += pre;
                for (int c = 0; c < l; ++c) sz[c] += pre * lat.interval_dB(k, iv, c);
            }
            y1[n] = sy / static_cast<double>(nb);
            for (int c = 0; c < l; ++c) z1[n * l + c] = sz[c] / (static_cast<double>(nb) * dt);
        }
    }
}

/// Recomputes Y, Z from the current y, z.
template <LatticeDriver D>
void backward_sweep(const D& drv, const Lattice& lat, LatticeQuadruple& q) {
    const int N = lat.steps(), d = lat.d(), l = lat.l();
    const double dt = lat.dt();
    const std::size_t nw = std::size_t{1} << d;
    for (std::size_t i = 0; i < lat.node_size(N); ++i) {
        q.Y[N][i] = drv.terminal(i, q.at(N, i));
        for (int c = 0; c < d; ++c) q.Z[N][i * d + c] = 0.0;
    }
    std::vector<Increment> inc;
    for (int k = N - 1; k >= 0; --k) {
        inc.resize(lat.node_size(k + 1));
        for (std::size_t i = 0; i < inc.size(); ++i) inc[i] = drv.backward(k + 1, i, q.at(k + 1, i));
        auto& Yk = q.Y[k];
        auto& Zk = q.Z[k];
        for (std::size_t n = 0; n < lat.node_size(k); ++n) {
            double sY = 0.0;
            double sZ[kMaxNoiseDim] = {};
            for (std::size_t w = 0; w < nw; ++w) {
                const std::size_t iv = lat.interval_from_before(k, n, w);
                const std::size_t i = lat.node_after(k, iv);
                double pre = q.Y[k + 1][i] + inc[i].drift * dt;
                for (int c = 0; c < l; ++c) pre += inc[i].noise[c] * lat.interval_dB(k, iv, c);
                sY += pre;
                for (int c = 0; c < d; ++c) sZ[c] += pre * lat.interval_dW(k, iv, c);
            }
            Yk[n] = sY / static_cast<double>(nw);
            for (int c = 0; c < d; ++c) Zk[n * d + c] = sZ[c] / (static_cast<double>(nw) * dt);
        }
    }
}

struct PicardOutcome {
    LatticeQuadruple fields;
    int iterations = 0;
    double final_change = 0.0;
    std::vector<double> history;  // sup-norm change per iteration
    bool monotone_history = true;  // change non-increasing after the first iteration
};

/// relaxation w and anderson_depth m > 0 turn the plain iteration q <- S(q) into
/// Anderson mixing over the last m sweeps; w = 1, m = 0 is plain Picard.
struct PicardSettings {
    int max_iters = 50;
    double tol = 1e-10;
    double relaxation = 1.0;
    int anderson_depth = 0;
};

namespace detail {

inline std::size_t flat_size(const LatticeQuadruple& q) {
    std::size_t n = 0;
    for (const auto* f : {&q.y, &q.Y, &q.z, &q.Z})
        for (const auto& row : *f) n += row.size();
    return n;
}

inline void flatten(const LatticeQuadruple& q, Eigen::VectorXd& out) {
    out.resize(static_cast<Eigen::Index>(flat_size(q)));
    Eigen::Index j = 0;
    for (const auto* f : {&q.y, &q.Y, &q.z, &q.Z})
        for (const auto& row : *f)
            for (double v : row) out(j++) = v;
}

inline void unflatten(const Eigen::VectorXd& v, LatticeQuadruple& q) {
    Eigen::Index j = 0;
    for (auto* f : {&q.y, &q.Y, &q.z, &q.Z})
        for (auto& row : *f)
            for (double& x : row) x = v(j++);
}

}  // namespace detail

/// Fixed point of one forward then one backward sweep, iterated from `start` (zeros if null).
template <LatticeDriver D>
PicardOutcome picard(const D& drv, const Lattice& lat, PicardSettings cfg, const LatticeQuadruple* start = nullptr) {
    if (cfg.max_iters < 1 || !(cfg.tol > 0.0)) throw DomainError("Picard settings need max_iters >= 1 and tol > 0");
    if (!(cfg.relaxation > 0.0 && cfg.relaxation <= 1.0)) throw DomainError("relaxation must lie in (0, 1]");
    if (cfg.anderson_depth < 0) throw DomainError("anderson depth must be >= 0");
    PicardOutcome out;
    out.fields = start ? *start : LatticeQuadruple::zeros(lat);
    const bool plain = cfg.relaxation == 1.0 && cfg.anderson_depth == 0;
    LatticeQuadruple work = out.fields;
    Eigen::VectorXd x, g, f, f_prev, g_prev;
    std::vector<Eigen::VectorXd> dF, dG;
    if (!plain) detail::flatten(out.fields, x);
    for (int it = 1; it <= cfg.max_iters; ++it) {
        double change = 0.0;
        if (plain) {
            work = out.fields;
            forward_sweep(drv, lat, out.fields);
            backward_sweep(drv, lat, out.fields);
            change = sup_distance(out.fields, work);
        } else {
            detail::unflatten(x, work);
            forward_sweep(drv, lat, work);
            backward_sweep(drv, lat, work);
            detail::flatten(work, g);
            f = g - x;
            change = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
            out.fields = work;
            if (it > 1) {
                dF.push_back(f - f_prev);
                dG.push_back(g - g_prev);
                if (static_cast<int>(dF.size()) > cfg.anderson_depth) {
                    dF.erase(dF.begin());
                    dG.erase(dG.begin());
                }
            }
            f_prev = f;
            g_prev = g;
            const double w = cfg.relaxation;
            if (dF.empty()) {
                x += w * f;
            } else {
                Eigen::MatrixXd Fm(f.size(), static_cast<Eigen::Index>(dF.size()));
                for (std::size_t c = 0; c < dF.size(); ++c) Fm.col(static_cast<Eigen::Index>(c)) = dF[c];
                const Eigen::VectorXd gam = Fm.colPivHouseholderQr().solve(f);
                // x_new = (1 - w)(x - dX gam) + w (g - dG gam), with dX = dG - dF
                Eigen::VectorXd xa = x, ga = g;
                for (std::size_t c = 0; c < dF.size(); ++c) {
                    xa -= gam(static_cast<Eigen::Index>(c)) * (dG[c] - dF[c]);
                    ga -= gam(static_cast<Eigen::Index>(c)) * dG[c];
                }
                x = (1.0 - w) * xa + w * ga;
            }
        }
        if (it > 2 && change > out.history.back()) out.monotone_history = false;
        out.history.push_back(change);
        out.iterations = it;
        out.final_change = change;
        if (!std::isfinite(change) || change > 1e12)
            throw ConvergenceError("Picard iteration diverged at iteration " + std::to_string(it), out.history);
        if (change < cfg.tol) return out;
    }
    throw ConvergenceError("Picard iteration did not reach tolerance in " + std::to_string(cfg.max_iters) +
                               " iterations (last change " + std::to_string(out.final_change) + ")",
                           out.history);
}

struct ResidualNorms {
    double forward_sup = 0.0, forward_l2 = 0.0;
    double backward_sup = 0.0, backward_l2 = 0.0;
    double initial_defect = 0.0;   // sup |y_0 - x|
    double terminal_defect = 0.0;  // sup |Y_N - h(y_N)|
    double max() const { return std::max(forward_sup, backward_sup); }
};

// Defects of the discrete integral equations.  Step defects live on interval index
// spaces; the sup norms include the initial/terminal defects, the L2 norms are
// sqrt(sum_k E[defect_k^2] + E[boundary defect^2]).
template <LatticeDriver D>
ResidualNorms residual_verify(const D& drv, const Lattice& lat, const LatticeQuadruple& q) {
    const int N = lat.steps(), d = lat.d(), l = lat.l();
    if (q.steps() != N || q.d != d || q.l != l) throw DomainError("candidate does not match the lattice");
    for (int k = 0; k <= N; ++k)
        if (q.y[k].size() != lat.node_size(k)) throw DomainError("candidate field sizes do not match the lattice");
    const double dt = lat.dt();
    ResidualNorms r;
    double fl2 = 0.0, bl2 = 0.0;

    for (std::size_t i = 0; i < lat.node_size(0); ++i) {
        const double e = q.y[0][i] - drv.initial(i);
        r.initial_defect = std::max(r.initial_defect, std::abs(e));
        fl2 += e * e / static_cast<double>(lat.node_size(0));
    }
    for (std::size_t i = 0; i < lat.node_size(N); ++i) {
        const double e = q.Y[N][i] - drv.terminal(i, q.at(N, i));
        r.terminal_defect = std::max(r.terminal_defect, std::abs(e));
        bl2 += e * e / static_cast<double>(lat.node_size(N));
    }
    r.forward_sup = r.initial_defect;
    r.backward_sup = r.terminal_defect;

    std::vector<Increment> fwd, bwd;
    for (int k = 0; k < N; ++k) {
        fwd.resize(lat.node_size(k));
        bwd.resize(lat.node_size(k + 1));
        for (std::size_t i = 0; i < fwd.size(); ++i) fwd[i] = drv.forward(k, i, q.at(k, i));
        for (std::size_t i = 0; i < bwd.size(); ++i) bwd[i] = drv.backward(k + 1, i, q.at(k + 1, i));
        const auto n_iv = lat.interval_size(k);
        double fs = 0.0, bs = 0.0;
        for (std::size_t iv = 0; iv < n_iv; ++iv) {
            const std::size_t a = lat.node_before(k, iv), b = lat.node_after(k, iv);
            double ef = q.y[k + 1][b] - q.y[k][a] - fwd[a].drift * dt;
            for (int c = 0; c < l; ++c) ef += q.z[k + 1][b * l + c] * lat.interval_dB(k, iv, c);
            for (int c = 0; c < d; ++c) ef -= fwd[a].noise[c] * lat.interval_dW(k, iv, c);
            double eb = q.Y[k][a] - q.Y[k + 1][b] - bwd[b].drift * dt;
            for (int c = 0; c < d; ++c) eb += q.Z[k][a * d + c] * lat.interval_dW(k, iv, c);
            for (int c = 0; c < l; ++c) eb -= bwd[b].noise[c] * lat.interval_dB(k, iv, c);
            r.forward_sup = std::max(r.forward_sup, std::abs(ef));
            r.backward_sup = std::max(r.backward_sup, std::abs(eb));
            fs += ef * ef;
            bs += eb * eb;
        }
        fl2 += fs / static_cast<double>(n_iv);
        bl2 += bs / static_cast<double>(n_iv);
    }
    r.forward_l2 = std::sqrt(fl2);
    r.backward_l2 = std::sqrt(bl2);
    return r;
}

}  // namespace fbdsde
