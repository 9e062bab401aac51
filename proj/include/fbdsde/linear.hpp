#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "fbdsde/model.hpp"

namespace fbdsde {

/// value = c0 + state.zeta + control * v + v * (control_state.zeta),
/// zeta = (y, Y, z_1..z_l, Z_1..Z_d).
struct AffineRow {
    double c0 = 0.0;
    std::vector<double> state;
    double control = 0.0;
    std::vector<double> control_state;

    static AffineRow zero(int m) { return {0.0, std::vector<double>(m, 0.0), 0.0, std::vector<double>(m, 0.0)}; }

    double operator()(const Point& p, int l) const {
        double s = c0 + control * p.v;
        for (std::size_t i = 0; i < state.size(); ++i) {
            const double x = detail::coord(p, static_cast<int>(i), l);
            s += (state[i] + p.v * control_state[i]) * x;
        }
        return s;
    }
    Partials grad(const Point& p, int l) const {
        Partials g;
        g.v = control;
        for (std::size_t i = 0; i < state.size(); ++i) {
            detail::coord(g, static_cast<int>(i), l) = state[i] + p.v * control_state[i];
            g.v += control_state[i] * detail::coord(p, static_cast<int>(i), l);
        }
        return g;
    }
};

/// Linear dynamics with quadratic cost:
///   l = 1/2 zeta' W zeta + w.zeta + 1/2 r v^2,  Phi = 1/2 phi2 y^2 + phi1 y,
///   gamma = 1/2 gamma2 Y^2 + gamma1 Y,  h = h0 + h1 y.
struct LinearSystem {
    int d = 1, l = 1;
    double x0 = 0.0;
    AffineRow f, F;
    std::vector<AffineRow> g, G;
    double h0 = 0.0, h1 = 0.0;
    std::vector<std::vector<double>> cost_state;
    std::vector<double> cost_linear;
    double cost_control = 0.0;
    double phi2 = 0.0, phi1 = 0.0, gamma2 = 0.0, gamma1 = 0.0;
    ControlDomain domain = ControlDomain::real_line();
    AssumptionConstants constants;

    int dim() const { return 2 + l + d; }

    static LinearSystem zero(int d = 1, int l = 1) {
        LinearSystem s;
        s.d = d;
        s.l = l;
        const int m = s.dim();
        s.f = s.F = AffineRow::zero(m);
        s.g.assign(d, AffineRow::zero(m));
        s.G.assign(l, AffineRow::zero(m));
        s.cost_state.assign(m, std::vector<double>(m, 0.0));
        s.cost_linear.assign(m, 0.0);
        return s;
    }

    void validate() const {
        const auto m = static_cast<std::size_t>(dim());
        auto row_ok = [m](const AffineRow& r) { return r.state.size() == m && r.control_state.size() == m; };
        bool ok = d >= 1 && l >= 1 && d <= kMaxNoiseDim && l <= kMaxNoiseDim && row_ok(f) && row_ok(F) &&
                  g.size() == static_cast<std::size_t>(d) && G.size() == static_cast<std::size_t>(l) &&
                  cost_state.size() == m && cost_linear.size() == m;
        for (const auto& r : g) ok = ok && row_ok(r);
        for (const auto& r : G) ok = ok && row_ok(r);
        for (const auto& r : cost_state) ok = ok && r.size() == m;
        if (!ok) throw ModelError("linear system dimensions are inconsistent");
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (cost_state[i][j] != cost_state[j][i]) throw ModelError("state cost weight must be symmetric");
    }
};

/// Builds the coefficient maps and cross-checks their derivatives.
inline CoefficientSet to_coefficients(const LinearSystem& s) {
    s.validate();
    CoefficientSet c;
    c.d = s.d;
    c.l = s.l;
    c.x0 = s.x0;
    c.domain = s.domain;
    c.constants = s.constants;
    const int l = s.l, m = s.dim();
    c.f = [row = s.f, l](const Point& p) { return row(p, l); };
    c.F = [row = s.F, l](const Point& p) { return row(p, l); };
    c.df = [row = s.f, l](const Point& p) { return row.grad(p, l); };
    c.dF = [row = s.F, l](const Point& p) { return row.grad(p, l); };
    c.g = [rows = s.g, l](const Point& p) {
        NoiseVec out{};
        for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i](p, l);
        return out;
    };
    c.G = [rows = s.G, l](const Point& p) {
        NoiseVec out{};
        for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i](p, l);
        return out;
    };
    c.dg = [rows = s.g, l](const Point& p) {
        Jacobian J{};
        for (std::size_t i = 0; i < rows.size(); ++i) J[i] = rows[i].grad(p, l);
        return J;
    };
    c.dG = [rows = s.G, l](const Point& p) {
        Jacobian J{};
        for (std::size_t i = 0; i < rows.size(); ++i) J[i] = rows[i].grad(p, l);
        return J;
    };
    c.running = [W = s.cost_state, w = s.cost_linear, r = s.cost_control, l, m](const Point& p) {
        double x[2 + 2 * kMaxNoiseDim];
        for (int i = 0; i < m; ++i) x[i] = detail::coord(p, i, l);
        double q = 0.0;
        for (int i = 0; i < m; ++i) {
            q += w[i] * x[i];
            for (int j = 0; j < m; ++j) q += 0.5 * W[i][j] * x[i] * x[j];
        }
        return q + 0.5 * r * p.v * p.v;
    };
    c.drunning = [W = s.cost_state, w = s.cost_linear, r = s.cost_control, l, m](const Point& p) {
        Partials g;
        g.v = r * p.v;
        for (int i = 0; i < m; ++i) {
            double gi = w[i];
            for (int j = 0; j < m; ++j) gi += W[i][j] * detail::coord(p, j, l);
            detail::coord(g, i, l) = gi;
        }
        return g;
    };
    c.h = [a = s.h0, b = s.h1](double y) { return a + b * y; };
    c.dh = [b = s.h1](double) { return b; };
    c.Phi = [a = s.phi2, b = s.phi1](double y) { return 0.5 * a * y * y + b * y; };
    c.dPhi = [a = s.phi2, b = s.phi1](double y) { return a * y + b; };
    c.gamma = [a = s.gamma2, b = s.gamma1](double Y) { return 0.5 * a * Y * Y + b * Y; };
    c.dgamma = [a = s.gamma2, b = s.gamma1](double Y) { return a * Y + b; };
    require_consistent_derivatives(c);
    return c;
}

enum class MonotoneClass { strict, degenerate, violated };

struct MonotoneSpectrum {
    double min_eigenvalue = 0.0, max_eigenvalue = 0.0;  // of the symmetric part of the form
    MonotoneClass cls = MonotoneClass::violated;         // for the decreasing condition
};

/// Exact classification (decreasing condition) of a linear system with the control frozen at v:
/// <dA, dzeta> = dzeta' S dzeta with S the symmetric part of the stacked matrix.
inline MonotoneSpectrum monotone_spectrum(const LinearSystem& s, double v = 0.0, double tol = 1e-12) {
    s.validate();
    const int m = s.dim(), l = s.l, d = s.d;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);  // rows: -F, f, -G_i, g_i
    auto put = [&](int r, const AffineRow& row, double sign) {
        for (int j = 0; j < m; ++j) A(r, j) = sign * (row.state[j] + v * row.control_state[j]);
    };
    put(0, s.F, -1.0);
    put(1, s.f, 1.0);
    for (int i = 0; i < l; ++i) put(2 + i, s.G[i], -1.0);
    for (int i = 0; i < d; ++i) put(2 + l + i, s.g[i], 1.0);
    const Eigen::MatrixXd S = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    MonotoneSpectrum out;
    out.min_eigenvalue = es.eigenvalues().minCoeff();
    out.max_eigenvalue = es.eigenvalues().maxCoeff();
    if (out.max_eigenvalue < -tol)
        out.cls = MonotoneClass::strict;
    else if (out.max_eigenvalue <= tol)
        out.cls = MonotoneClass::degenerate;
    else
        out.cls = MonotoneClass::violated;
    return out;
}

inline const char* to_string(MonotoneClass c) {
    switch (c) {
        case MonotoneClass::strict: return "strict";
        case MonotoneClass::degenerate: return "degenerate monotone";
        case MonotoneClass::violated: return "violated";
    }
    return "?";
}

}  // namespace fbdsde
