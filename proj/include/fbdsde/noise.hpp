#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "fbdsde/errors.hpp"

namespace fbdsde {

/// Uniform partition of [0, T] into N steps.
class TimeGrid {
public:
    TimeGrid(double horizon, int steps) : T_(horizon), N_(steps) {
        if (!(horizon > 0.0)) throw DomainError("time grid needs a positive horizon");
        if (steps < 1) throw DomainError("time grid needs at least one step");
        if (horizon / steps < 1e-12) throw DomainError("time step below 1e-12");
    }

    double horizon() const { return T_; }
    int steps() const { return N_; }
    double dt() const { return T_ / N_; }
    // t_N is returned exactly as T so that end-of-horizon comparisons are clean
    double node(int k) const { return k == N_ ? T_ : T_ * k / N_; }

    std::vector<double> nodes() const {
        std::vector<double> t(N_ + 1);
        for (int k = 0; k <= N_; ++k) t[k] = node(k);
        return t;
    }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    double T_;
    int N_;
};

inline TimeGrid make_grid(double T, int N) { return TimeGrid(T, N); }

struct SamplingOptions {
    bool antithetic = false;  // path 2j+1 is the negation of path 2j
};

/// Gaussian increments of the forward driver W (M x N x d) and the backward driver B (M x N x l).
class NoiseBundle {
public:
    NoiseBundle(TimeGrid grid, int d, int l, std::size_t paths, std::vector<double> dW,
                std::vector<double> dB, std::uint64_t seed)
        : grid_(grid), d_(d), l_(l), M_(paths), seed_(seed), dW_(std::move(dW)), dB_(std::move(dB)) {
        const auto n = static_cast<std::size_t>(grid_.steps());
        if (dW_.size() != M_ * n * d_ || dB_.size() != M_ * n * l_)
            throw DomainError("noise bundle arrays do not match M x N x dim");
    }

    const TimeGrid& grid() const { return grid_; }
    int d() const { return d_; }
    int l() const { return l_; }
    std::size_t paths() const { return M_; }
    std::uint64_t seed() const { return seed_; }

    double dW(std::size_t m, int k, int c = 0) const {
        return dW_[(m * grid_.steps() + k) * d_ + c];
    }
    double dB(std::size_t m, int k, int c = 0) const {
        return dB_[(m * grid_.steps() + k) * l_ + c];
    }
    std::span<const double> raw_dW() const { return dW_; }
    std::span<const double> raw_dB() const { return dB_; }

private:
    TimeGrid grid_;
    int d_, l_;
    std::size_t M_;
    std::uint64_t seed_;
    std::vector<double> dW_, dB_;
};

/// Per path and step: the d forward coordinates are drawn first, then the l backward ones.
inline NoiseBundle sample_noise(const TimeGrid& grid, int d, int l, std::size_t M, std::uint64_t seed,
                                SamplingOptions opts = {}) {
    if (M == 0) throw DomainError("sample_noise needs at least one path");
    if (d < 1 || l < 1) throw DomainError("driver dimensions must be positive");
    const int N = grid.steps();
    std::vector<double> dW(M * N * d), dB(M * N * l);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(grid.dt()));
    for (std::size_t m = 0; m < M; ++m) {
        const bool mirror = opts.antithetic && (m % 2 == 1);
        for (int k = 0; k < N; ++k) {
            for (int c = 0; c < d; ++c) {
                auto& w = dW[(m * N + k) * d + c];
                w = mirror ? -dW[((m - 1) * N + k) * d + c] : normal(rng);
            }
            for (int c = 0; c < l; ++c) {
                auto& b = dB[(m * N + k) * l + c];
                b = mirror ? -dB[((m - 1) * N + k) * l + c] : normal(rng);
            }
        }
    }
    return NoiseBundle(grid, d, l, M, std::move(dW), std::move(dB), seed);
}

}  // namespace fbdsde
