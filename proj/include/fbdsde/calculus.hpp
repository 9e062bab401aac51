#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fbdsde/errors.hpp"
#include "fbdsde/noise.hpp"

namespace fbdsde {

/// One path sampled at t_0..t_N, each node an m-vector (row-major).
class DiscretePath {
public:
    DiscretePath(TimeGrid grid, int dim) : grid_(grid), dim_(dim), v_((grid.steps() + 1) * dim, 0.0) {
        if (dim < 1) throw DomainError("path dimension must be positive");
    }
    DiscretePath(TimeGrid grid, int dim, std::vector<double> values)
        : grid_(grid), dim_(dim), v_(std::move(values)) {
        if (dim < 1 || v_.size() != static_cast<std::size_t>((grid.steps() + 1) * dim))
            throw DomainError("path values do not match (N+1) x dim");
    }
    static DiscretePath constant(TimeGrid grid, std::span<const double> value) {
        DiscretePath p(grid, static_cast<int>(value.size()));
        for (int k = 0; k <= grid.steps(); ++k)
            for (std::size_t c = 0; c < value.size(); ++c) p(k, static_cast<int>(c)) = value[c];
        return p;
    }

    const TimeGrid& grid() const { return grid_; }
    int dim() const { return dim_; }
    double& operator()(int k, int c = 0) { return v_[k * dim_ + c]; }
    double operator()(int k, int c = 0) const { return v_[k * dim_ + c]; }
    std::span<const double> at(int k) const { return {v_.data() + k * dim_, static_cast<std::size_t>(dim_)}; }
    std::span<const double> values() const { return v_; }

private:
    TimeGrid grid_;
    int dim_;
    std::vector<double> v_;
};

/// Increments of one path: N x dim, row-major.
inline DiscretePath forward_ito(const DiscretePath& u, std::span<const double> dW) {
    const int N = u.grid().steps(), d = u.dim();
    if (dW.size() != static_cast<std::size_t>(N * d)) throw DomainError("forward_ito: dimension mismatch");
    DiscretePath out(u.grid(), 1);
    for (int k = 0; k < N; ++k) {
        double s = 0.0;
        for (int c = 0; c < d; ++c) s += u(k, c) * dW[k * d + c];
        out(k + 1) = out(k) + s;
    }
    return out;
}

/// Tail sums sum_{j>=k} v(t_{j+1}) . dB_j; zero at t_N.
inline DiscretePath backward_ito(const DiscretePath& v, std::span<const double> dB) {
    const int N = v.grid().steps(), l = v.dim();
    if (dB.size() != static_cast<std::size_t>(N * l)) throw DomainError("backward_ito: dimension mismatch");
    DiscretePath out(v.grid(), 1);
    for (int k = N - 1; k >= 0; --k) {
        double s = 0.0;
        for (int c = 0; c < l; ++c) s += v(k + 1, c) * dB[k * l + c];
        out(k) = out(k + 1) + s;
    }
    return out;
}

struct ItoResidual {
    std::vector<double> pathwise;  // per path, at t_N
    double pathwise_max = 0.0;     // over paths and nodes
    double pathwise_rms = 0.0;     // at t_N
    double pathwise_ms = 0.0;      // mean square at t_N
    double expectation = 0.0;      // sample mean of the expectation-form defect at t_N
    double expectation_stderr = 0.0;
    double max_abs() const { return std::max(pathwise_max, std::abs(expectation)); }
};

// alpha_{k+1} = alpha_k + beta_k dt + gamma_{k+1} dB_k + delta_k dW_k, alpha in R^m,
// gamma an m x l and delta an m x d process (row-major per node).  The discrete identity
// checked is
//   |alpha_n|^2 = |alpha_0|^2 + sum_{j<n} [ 2 alpha_j.beta_j dt + |beta_j dt|^2
//                  + 2 alpha_j.delta_j dW_j + 2 alpha_{j+1}.gamma_{j+1} dB_j
//                  + |delta_j|^2 dt - |gamma_{j+1}|^2 dt ]
// pathwise; the expectation form drops the two stochastic sums.
inline ItoResidual ito_residual(std::span<const double> alpha0, const DiscretePath& beta,
                                const DiscretePath& gamma, const DiscretePath& delta,
                                const NoiseBundle& noise) {
    const int m = static_cast<int>(alpha0.size());
    const int d = noise.d(), l = noise.l(), N = noise.grid().steps();
    if (m < 1 || beta.dim() != m || gamma.dim() != m * l || delta.dim() != m * d)
        throw DomainError("ito_residual: dimension mismatch");
    if (beta.grid() != noise.grid() || gamma.grid() != noise.grid() || delta.grid() != noise.grid())
        throw DomainError("ito_residual: grid mismatch");
    const double dt = noise.grid().dt();
    const std::size_t M = noise.paths();

    ItoResidual out;
    out.pathwise.resize(M);
    std::vector<double> a(alpha0.begin(), alpha0.end()), next(m);
    double sum_e = 0.0, sum_e2 = 0.0, sum_r2 = 0.0;
    for (std::size_t p = 0; p < M; ++p) {
        a.assign(alpha0.begin(), alpha0.end());
        double sq0 = 0.0;
        for (double x : a) sq0 += x * x;
        double path_terms = 0.0, mean_terms = 0.0;
        for (int k = 0; k < N; ++k) {
            for (int i = 0; i < m; ++i) {
                double inc = beta(k, i) * dt;
                for (int c = 0; c < l; ++c) inc += gamma(k + 1, i * l + c) * noise.dB(p, k, c);
                for (int c = 0; c < d; ++c) inc += delta(k, i * d + c) * noise.dW(p, k, c);
                next[i] = a[i] + inc;
            }
            double det = 0.0, sto = 0.0;
            for (int i = 0; i < m; ++i) {
                const double bdt = beta(k, i) * dt;
                det += 2.0 * a[i] * bdt + bdt * bdt;
                for (int c = 0; c < d; ++c) {
                    const double dl = delta(k, i * d + c);
                    sto += 2.0 * a[i] * dl * noise.dW(p, k, c);
                    det += dl * dl * dt;
                }
                for (int c = 0; c < l; ++c) {
                    const double gm = gamma(k + 1, i * l + c);
                    sto += 2.0 * next[i] * gm * noise.dB(p, k, c);
                    det -= gm * gm * dt;
                }
            }
            path_terms += det + sto;
            mean_terms += det;
            a.swap(next);
            double sq = 0.0;
            for (double x : a) sq += x * x;
            out.pathwise_max = std::max(out.pathwise_max, std::abs(sq - sq0 - path_terms));
        }
        double sq = 0.0;
        for (double x : a) sq += x * x;
        const double r = sq - sq0 - path_terms;
        const double e = sq - sq0 - mean_terms;
        out.pathwise[p] = r;
        sum_r2 += r * r;
        sum_e += e;
        sum_e2 += e * e;
    }
    const double Md = static_cast<double>(M);
    out.pathwise_ms = sum_r2 / Md;
    out.pathwise_rms = std::sqrt(out.pathwise_ms);
    out.expectation = sum_e / Md;
    if (M > 1) {
        const double var = std::max(0.0, (sum_e2 - Md * out.expectation * out.expectation) / (Md - 1.0));
        out.expectation_stderr = std::sqrt(var / Md);
    }
    return out;
}

}  // namespace fbdsde
