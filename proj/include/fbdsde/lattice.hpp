#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fbdsde/errors.hpp"
#include "fbdsde/noise.hpp"

namespace fbdsde {

inline constexpr int kMaxNoiseDim = 3;
inline constexpr int kLatticeBudgetBits = 24;

/// F_{t_k}: W-increments 0..k-1 joined with B-increments k..N-1.
struct FiltrationIndex {
    int k;
};

// Exhaustive +-sqrt(dt) tree over both drivers.
//
// Atom bit layout: coordinate c of W_j sits at bit j*d + c, coordinate c of B_j at
// bit d*N + j*l + c; a set bit means +sqrt(dt).
//
// Fields measurable at F_{t_k} are stored compressed ("node fields") over
// 2^(d*k + l*(N-k)) entries indexed by [W_0..W_{k-1} | B_k..B_{N-1}].  The step from
// k to k+1 lives on "interval" indices [W_0..W_k | B_k..B_{N-1}], which refine both
// node k and node k+1.
class Lattice {
public:
    Lattice(TimeGrid grid, int d, int l) : grid_(grid), d_(d), l_(l) {
        if (d < 1 || l < 1 || d > kMaxNoiseDim || l > kMaxNoiseDim)
            throw DomainError("lattice driver dimensions must lie in 1..3");
        if ((d + l) * grid.steps() > kLatticeBudgetBits)
            throw BudgetError("lattice needs (d+l)*N <= 24");
        bits_ = (d + l) * grid.steps();
        s_ = std::sqrt(grid.dt());
    }

    const TimeGrid& grid() const { return grid_; }
    int d() const { return d_; }
    int l() const { return l_; }
    int steps() const { return grid_.steps(); }
    double dt() const { return grid_.dt(); }
    double sqrt_dt() const { return s_; }

    std::size_t atom_count() const { return std::size_t{1} << bits_; }
    double weight() const { return 1.0 / static_cast<double>(atom_count()); }

    double dW(std::size_t atom, int k, int c = 0) const { return sign(atom >> (k * d_ + c)); }
    double dB(std::size_t atom, int k, int c = 0) const {
        return sign(atom >> (d_ * steps() + k * l_ + c));
    }

    double mean(std::span<const double> values) const {
        check_atoms(values);
        double s = 0.0;
        for (double v : values) s += v;
        return s * weight();
    }

    /// Average over the coordinates unobserved at F_{t_k}.
    std::vector<double> cond_expect(std::span<const double> values, FiltrationIndex at) const {
        check_atoms(values);
        check_node(at.k);
        std::vector<double> sums(node_size(at.k), 0.0);
        for (std::size_t a = 0; a < values.size(); ++a) sums[node_of_atom(at.k, a)] += values[a];
        const double share = static_cast<double>(node_size(at.k)) / static_cast<double>(atom_count());
        for (double& s : sums) s *= share;
        return expand(at.k, sums);
    }

    // ---- compressed node fields ----

    int node_bits(int k) const { return d_ * k + l_ * (steps() - k); }
    std::size_t node_size(int k) const { return std::size_t{1} << node_bits(k); }
    std::size_t interval_size(int k) const { return std::size_t{1} << (node_bits(k) + d_); }

    std::size_t node_of_atom(int k, std::size_t atom) const {
        const std::size_t low = atom & mask(d_ * k);
        const std::size_t high = atom >> (d_ * steps() + l_ * k);
        return low | (high << (d_ * k));
    }

    /// Node field (dim components per entry, component c) to per-atom values.
    std::vector<double> expand(int k, std::span<const double> field, int dim = 1, int c = 0) const {
        check_node(k);
        if (field.size() != node_size(k) * static_cast<std::size_t>(dim))
            throw DomainError("node field has wrong length");
        std::vector<double> out(atom_count());
        for (std::size_t a = 0; a < out.size(); ++a) out[a] = field[node_of_atom(k, a) * dim + c];
        return out;
    }

    /// Per-atom values assumed F_{t_k}-measurable, compressed (averaging within classes).
    std::vector<double> compress(int k, std::span<const double> values) const {
        check_atoms(values);
        check_node(k);
        std::vector<double> sums(node_size(k), 0.0);
        for (std::size_t a = 0; a < values.size(); ++a) sums[node_of_atom(k, a)] += values[a];
        const double share = static_cast<double>(node_size(k)) / static_cast<double>(atom_count());
        for (double& s : sums) s *= share;
        return sums;
    }

    // ---- interval k <-> node k, node k+1 ----

    std::size_t node_before(int k, std::size_t iv) const {
        const int wk = d_ * k;
        return (iv & mask(wk)) | ((iv >> (wk + d_)) << wk);
    }
    std::size_t node_after(int k, std::size_t iv) const {
        const int wk1 = d_ * (k + 1);
        return (iv & mask(wk1)) | ((iv >> (wk1 + l_)) << wk1);
    }
    /// Interval index from a node-(k+1) entry and the bits b of B_k.
    std::size_t interval_from_after(int k, std::size_t n, std::size_t b) const {
        const int wk1 = d_ * (k + 1);
        return (n & mask(wk1)) | (b << wk1) | ((n >> wk1) << (wk1 + l_));
    }
    /// Interval index from a node-k entry and the bits w of W_k.
    std::size_t interval_from_before(int k, std::size_t n, std::size_t w) const {
        const int wk = d_ * k;
        return (n & mask(wk)) | (w << wk) | ((n >> wk) << (wk + d_));
    }
    double interval_dW(int k, std::size_t iv, int c = 0) const { return sign(iv >> (d_ * k + c)); }
    double interval_dB(int k, std::size_t iv, int c = 0) const { return sign(iv >> (d_ * (k + 1) + c)); }

    /// The atom whose increments match the signs of a sampled Gaussian path.
    std::size_t atom_of_path(const NoiseBundle& noise, std::size_t m) const {
        if (noise.grid() != grid_ || noise.d() != d_ || noise.l() != l_)
            throw DomainError("noise bundle does not match the lattice");
        std::size_t a = 0;
        const int N = steps();
        for (int k = 0; k < N; ++k) {
            for (int c = 0; c < d_; ++c)
                if (noise.dW(m, k, c) > 0.0) a |= std::size_t{1} << (k * d_ + c);
            for (int c = 0; c < l_; ++c)
                if (noise.dB(m, k, c) > 0.0) a |= std::size_t{1} << (d_ * N + k * l_ + c);
        }
        return a;
    }

private:
    static std::size_t mask(int bits) { return (std::size_t{1} << bits) - 1; }
    double sign(std::size_t shifted) const { return (shifted & 1u) ? s_ : -s_; }
    void check_atoms(std::span<const double> values) const {
        if (values.size() != atom_count()) throw DomainError("per-atom field has wrong length");
    }
    void check_node(int k) const {
        if (k < 0 || k > steps()) throw DomainError("filtration index out of range");
    }

    TimeGrid grid_;
    int d_, l_;
    int bits_ = 0;
    double s_ = 0.0;
};

inline Lattice build_lattice(const TimeGrid& grid, int d, int l) { return Lattice(grid, d, l); }

/// Every atom as one equally weighted path, in atom order.
inline NoiseBundle lattice_bundle(const Lattice& lat) {
    const auto M = lat.atom_count();
    const int N = lat.steps(), d = lat.d(), l = lat.l();
    std::vector<double> dW(M * N * d), dB(M * N * l);
    for (std::size_t a = 0; a < M; ++a)
        for (int k = 0; k < N; ++k) {
            for (int c = 0; c < d; ++c) dW[(a * N + k) * d + c] = lat.dW(a, k, c);
            for (int c = 0; c < l; ++c) dB[(a * N + k) * l + c] = lat.dB(a, k, c);
        }
    return NoiseBundle(lat.grid(), d, l, M, std::move(dW), std::move(dB), 0);
}

}  // namespace fbdsde
