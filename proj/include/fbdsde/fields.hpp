#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fbdsde/lattice.hpp"

namespace fbdsde {

using NoiseVec = std::array<double, kMaxNoiseDim>;

/// Values of one quadruple at a single (node, atom-class) or (node, path).
/// z pairs with the backward driver (l entries used), Z with the forward one (d entries).
struct NodeValues {
    double y = 0.0, Y = 0.0;
    NoiseVec z{}, Z{};
};

/// A drift and a driver coefficient: (f, g) or (F, G).
struct Increment {
    double drift = 0.0;
    NoiseVec noise{};
};

/// (y, Y, z, Z) stored as compressed node fields, see Lattice.
/// Conventions: z[0] and Z[N] are identically zero (no interval attaches to them).
struct LatticeQuadruple {
    int d = 1, l = 1;
    std::vector<std::vector<double>> y, Y, z, Z;

    static LatticeQuadruple zeros(const Lattice& lat) {
        LatticeQuadruple q;
        q.d = lat.d();
        q.l = lat.l();
        const int N = lat.steps();
        q.y.resize(N + 1);
        q.Y.resize(N + 1);
        q.z.resize(N + 1);
        q.Z.resize(N + 1);
        for (int k = 0; k <= N; ++k) {
            const auto n = lat.node_size(k);
            q.y[k].assign(n, 0.0);
            q.Y[k].assign(n, 0.0);
            q.z[k].assign(n * q.l, 0.0);
            q.Z[k].assign(n * q.d, 0.0);
        }
        return q;
    }

    int steps() const { return static_cast<int>(y.size()) - 1; }

    NodeValues at(int k, std::size_t i) const {
        NodeValues s;
        s.y = y[k][i];
        s.Y = Y[k][i];
        for (int c = 0; c < l; ++c) s.z[c] = z[k][i * l + c];
        for (int c = 0; c < d; ++c) s.Z[c] = Z[k][i * d + c];
        return s;
    }

    LatticeQuadruple& operator+=(const LatticeQuadruple& o) { return axpy(1.0, o); }
    LatticeQuadruple& operator-=(const LatticeQuadruple& o) { return axpy(-1.0, o); }
    LatticeQuadruple& axpy(double a, const LatticeQuadruple& o) {
        auto add = [a](auto& dst, const auto& src) {
            for (std::size_t k = 0; k < dst.size(); ++k)
                for (std::size_t i = 0; i < dst[k].size(); ++i) dst[k][i] += a * src[k][i];
        };
        add(y, o.y);
        add(Y, o.Y);
        add(z, o.z);
        add(Z, o.Z);
        return *this;
    }
    LatticeQuadruple& operator*=(double a) {
        auto scale = [a](auto& f) {
            for (auto& row : f)
                for (double& v : row) v *= a;
        };
        scale(y);
        scale(Y);
        scale(z);
        scale(Z);
        return *this;
    }
};

inline double sup_distance(const LatticeQuadruple& a, const LatticeQuadruple& b) {
    double m = 0.0;
    auto scan = [&m](const auto& p, const auto& q) {
        for (std::size_t k = 0; k < p.size(); ++k)
            for (std::size_t i = 0; i < p[k].size(); ++i) m = std::max(m, std::abs(p[k][i] - q[k][i]));
    };
    scan(a.y, b.y);
    scan(a.Y, b.Y);
    scan(a.z, b.z);
    scan(a.Z, b.Z);
    return m;
}

inline double sup_norm(const LatticeQuadruple& a) {
    double m = 0.0;
    for (const auto* f : {&a.y, &a.Y, &a.z, &a.Z})
        for (const auto& row : *f)
            for (double v : row) m = std::max(m, std::abs(v));
    return m;
}

/// Mean of a node field component (every entry carries equal probability).
inline double node_mean(const std::vector<double>& field, int dim = 1, int c = 0) {
    const std::size_t n = field.size() / dim;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += field[i * dim + c];
    return s / static_cast<double>(n);
}

/// Per-path quadruple from a Monte Carlo solve; entry (k, m) at index k * paths + m.
struct PathQuadruple {
    std::size_t paths = 0;
    int steps = 0;
    int d = 1, l = 1;
    std::vector<double> y, Y, z, Z;

    static PathQuadruple zeros(std::size_t M, int N, int d = 1, int l = 1) {
        PathQuadruple q;
        q.paths = M;
        q.steps = N;
        q.d = d;
        q.l = l;
        const std::size_t n = (N + 1) * M;
        q.y.assign(n, 0.0);
        q.Y.assign(n, 0.0);
        q.z.assign(n * l, 0.0);
        q.Z.assign(n * d, 0.0);
        return q;
    }

    std::size_t index(int k, std::size_t m) const { return k * paths + m; }

    NodeValues at(int k, std::size_t m) const {
        NodeValues s;
        const auto i = index(k, m);
        s.y = y[i];
        s.Y = Y[i];
        for (int c = 0; c < l; ++c) s.z[c] = z[i * l + c];
        for (int c = 0; c < d; ++c) s.Z[c] = Z[i * d + c];
        return s;
    }
};

}  // namespace fbdsde
