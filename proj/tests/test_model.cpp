#include <gtest/gtest.h>

#include <cmath>

#include "dense_oracle.hpp"
#include "fbdsde/game.hpp"
#include "fbdsde/smp.hpp"

using namespace fbdsde;

namespace {

// A(zeta) = -zeta: F = y, f = -Y, G = z, g = -Z
LinearSystem negative_identity() {
    LinearSystem s = LinearSystem::zero(1, 1);
    s.F.state = {1, 0, 0, 0};
    s.f.state = {0, -1, 0, 0};
    s.G[0].state = {0, 0, 1, 0};
    s.g[0].state = {0, 0, 0, -1};
    s.constants.monotonicity = 1.0;
    return s;
}

}  // namespace

TEST(Derivatives, LinearBuildIsConsistent) {
    const auto rep = check_derivatives(to_coefficients(designated_order_system()));
    EXPECT_LT(rep.max_rel_error, 1e-5);
}

TEST(Derivatives, WrongPartialIsRejected) {
    CoefficientSet c = to_coefficients(negative_identity());
    c.dF = [](const Point&) {
        Partials p;
        p.y = 2.0;  // true value is 1
        return p;
    };
    EXPECT_THROW(require_consistent_derivatives(c), ModelError);
}

TEST(Monotone, NegativeIdentityHasZeroMargin) {
    const auto c = to_coefficients(negative_identity());
    const auto rep = check_monotone(c, 2000, 3);
    EXPECT_NEAR(rep.worst_margin, 0.0, 1e-12);
    EXPECT_TRUE(rep.pass);
    EXPECT_NEAR(rep.sharpest_mu, 1.0, 1e-12);
}

TEST(Monotone, PassSurvivesSmallerMu) {
    LinearSystem s = negative_identity();
    s.constants.monotonicity = 0.4;
    EXPECT_TRUE(check_monotone(to_coefficients(s), 2000, 3).pass);
    EXPECT_LT(check_monotone(to_coefficients(s), 2000, 3).worst_margin, 0.0);
}

TEST(Monotone, DegenerateExampleIsBoundaryCase) {
    const auto s = degenerate_example_system();
    const auto spec = monotone_spectrum(s);
    EXPECT_EQ(spec.cls, MonotoneClass::degenerate);
    EXPECT_NEAR(spec.max_eigenvalue, 0.0, 1e-12);
    const auto rep = check_monotone(to_coefficients(s), 2000, 5);
    EXPECT_LE(rep.worst_margin, 1e-12);
}

TEST(Monotone, DecreasingTerminalMapFails) {
    LinearSystem s = negative_identity();
    s.h1 = -1.0;
    const auto rep = check_monotone(to_coefficients(s), 500, 3);
    EXPECT_GT(rep.worst_h_margin, 0.0);
    EXPECT_FALSE(rep.pass);
}

TEST(Monotone, IncreasingVariantIsTheMirror) {
    LinearSystem s = negative_identity();
    for (auto* row : {&s.F, &s.f, &s.G[0], &s.g[0]})
        for (double& x : row->state) x = -x;
    s.h1 = -0.5;
    EXPECT_TRUE(check_monotone(to_coefficients(s), 1000, 3, MonotoneVariant::increasing).pass);
    EXPECT_FALSE(check_monotone(to_coefficients(s), 1000, 3, MonotoneVariant::decreasing).pass);
}

TEST(Lipschitz, DeclaredConstants) {
    LinearSystem s = negative_identity();
    for (auto* row : {&s.F, &s.f, &s.G[0], &s.g[0]})
        for (double& x : row->state) x *= 2.0;  // matrix norm 2
    s.constants.lipschitz = 2.0;
    s.constants.derivative_bound = 2.0;
    const auto ok = check_lipschitz_bounds(to_coefficients(s), 2000, 1);
    EXPECT_TRUE(ok.pass);
    EXPECT_NEAR(ok.max_quotient, 2.0, 1e-9);
    s.constants.lipschitz = 1.0;
    const auto bad = check_lipschitz_bounds(to_coefficients(s), 2000, 1);
    EXPECT_FALSE(bad.pass);
    EXPECT_NEAR(bad.ratio, 2.0, 1e-9);
}

TEST(Lipschitz, ZeroCoefficients) {
    const auto rep = check_lipschitz_bounds(CoefficientSet::zero(), 100, 1);
    EXPECT_EQ(rep.max_quotient, 0.0);
    EXPECT_EQ(rep.max_derivative, 0.0);
    EXPECT_TRUE(rep.pass);
}

TEST(Hamiltonian, DegenerateExampleIsHalfVSquared) {
    const auto c = degenerate_example_build();
    for (double v : {1.0, -1.0, 0.5}) EXPECT_DOUBLE_EQ(hamiltonian(c, 0.3, {}, v, {}), 0.5 * v * v);
    EXPECT_EQ(hamiltonian(CoefficientSet::zero(), 0.0, {}, 0.0, {}), 0.0);
}

TEST(Hamiltonian, AffineInAdjoint) {
    const auto c = to_coefficients(designated_order_system());
    NodeValues s;
    s.y = 0.3;
    s.Y = -0.2;
    s.z[0] = 0.7;
    s.Z[0] = 1.1;
    const AdjointValues a{0.5, -1.0, {0.2}, {0.4}}, b{-0.3, 0.6, {1.5}, {-0.8}};
    auto mix = [](const AdjointValues& x, const AdjointValues& y, double t) {
        return AdjointValues{(1 - t) * x.p + t * y.p, (1 - t) * x.q + t * y.q, {(1 - t) * x.k[0] + t * y.k[0]},
                             {(1 - t) * x.h[0] + t * y.h[0]}};
    };
    const double Ha = hamiltonian(c, 0.1, s, 0.4, a), Hb = hamiltonian(c, 0.1, s, 0.4, b);
    for (double t : {-1.0, 0.25, 2.0}) EXPECT_NEAR(hamiltonian(c, 0.1, s, 0.4, mix(a, b, t)), (1 - t) * Ha + t * Hb, 1e-12);
}

TEST(Cost, ZeroTrajectoryCostsNothing) {
    const auto c = degenerate_example_build();
    const Lattice lat(make_grid(1.0, 3), 1, 1);
    EXPECT_EQ(expected_cost(c, lat, LatticeQuadruple::zeros(lat), ControlPath::constant(lat.grid(), 0.0, c.domain)), 0.0);
}

TEST(Cost, UnitRunningCost) {
    CoefficientSet c = CoefficientSet::zero();
    c.running = [](const Point&) { return 1.0; };
    const Lattice lat(make_grid(1.0, 4), 1, 1);
    EXPECT_NEAR(expected_cost(c, lat, LatticeQuadruple::zeros(lat), ControlPath::constant(lat.grid(), 0.0)), 1.0, 1e-15);
}

TEST(Cost, MismatchedGrid) {
    const auto c = degenerate_example_build();
    const Lattice a(make_grid(1.0, 3), 1, 1), b(make_grid(1.0, 2), 1, 1);
    EXPECT_THROW(expected_cost(c, a, LatticeQuadruple::zeros(b), ControlPath::constant(a.grid(), 0.0)), DomainError);
}

// Constant control c on the degenerate example, N = 2: cost from the solved lattice state
// against the same cost evaluated on the oracle's per-atom solution.
TEST(Cost, DegenerateConstantControlMatchesOracle) {
    const auto s = degenerate_example_system();
    const auto c = to_coefficients(s);
    const Lattice lat(make_grid(1.0, 2), 1, 1);
    const double v = 0.6;
    const auto u = ControlPath::constant(lat.grid(), v, s.domain);
    SolverConfig cfg;
    cfg.picard_tol = 1e-13;
    cfg.picard_max_iters = 500;
    cfg.anderson_depth = 3;
    const auto sol = solve_lattice(c, u, lat, cfg).solution;
    const double J = expected_cost(c, lat, sol, u);

    oracle::Scheme sc;
    sc.N = 2;
    sc.g = oracle::constant({v, 0, 0, 1, -1});
    sc.G = oracle::constant({v, 0, 0, 1, 1});
    const auto o = oracle::solve(sc);
    const oracle::Tree t(2, 1.0);
    double Jo = 0.0;
    for (std::size_t a = 0; a < t.atoms; ++a) {
        for (int k = 0; k < 2; ++k) {
            const double y = o.y[k][a], Y = o.Y[k][a], z = o.z[k][a], Z = o.Z[k][a];
            Jo += 0.5 * (y * y + Y * Y + z * z + Z * Z + v * v) * t.dt / t.atoms;
        }
        Jo += 0.5 * (o.y[2][a] * o.y[2][a] + o.Y[0][a] * o.Y[0][a]) / t.atoms;
    }
    EXPECT_NEAR(J, Jo, 1e-10);
    EXPECT_GE(J, 0.5 * v * v - 1e-12);
    // the per-atom costs aggregate to the same number
    const auto per_atom = atom_costs(c, lat, sol, u);
    EXPECT_NEAR(lat.mean(per_atom), J, 1e-12);
}

TEST(Cost, MonteCarloSeedsAgree) {
    CoefficientSet c = CoefficientSet::zero();
    c.running = [](const Point& p) { return p.y * p.y; };
    c.g = [](const Point&) { return NoiseVec{1.0}; };
    const auto grid = make_grid(1.0, 8);
    auto estimate = [&](std::uint64_t seed) {
        const auto noise = sample_noise(grid, 1, 1, 20000, seed);
        auto q = PathQuadruple::zeros(noise.paths(), 8);
        for (std::size_t m = 0; m < noise.paths(); ++m)
            for (int k = 0; k < 8; ++k) q.y[q.index(k + 1, m)] = q.y[q.index(k, m)] + noise.dW(m, k);
        return path_cost(c, grid, q, ControlPath::constant(grid, 0.0));
    };
    const auto a = estimate(1), b = estimate(2);
    EXPECT_LT(std::abs(a.mean - b.mean), 3.0 * std::hypot(a.stderr, b.stderr));
    EXPECT_NEAR(a.mean, 0.4375, 4.0 * a.stderr);  // sum_{k<8} k/8 * 1/8
}
