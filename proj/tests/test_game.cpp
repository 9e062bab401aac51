#include <gtest/gtest.h>

#include <cmath>

#include "dense_oracle.hpp"
#include "fbdsde/game.hpp"

using namespace fbdsde;

namespace {

SolverConfig game_cfg() {
    SolverConfig cfg;
    cfg.picard_tol = 1e-13;
    cfg.picard_max_iters = 400;
    cfg.anderson_depth = 5;
    return cfg;
}

GameSpec zero_cost_game() {
    GameSpec g = GameSpec::zero(1, 1);
    g.a(0) = 1.0;
    g.B1(0, 0) = g.B2(0, 0) = 1.0;
    return g;
}

}  // namespace

TEST(Commutation, ScalarAlwaysCommutes) {
    auto g = derived_scalar_game();
    g.A(0, 0) = 0.7;
    g.C(0, 0) = -0.2;
    EXPECT_TRUE(check_commutation(g).pass);
    EXPECT_EQ(check_commutation(g).worst_defect, 0.0);
}

TEST(Commutation, DiagonalPassesAndCouplingFails) {
    GameSpec g = GameSpec::zero(2, 1);
    g.B1 << 1.0, 0.0;
    g.B2 << 0.0, 1.0;
    g.A = Eigen::Vector2d(0.3, -0.1).asDiagonal();
    g.P1 = Eigen::Vector2d(1.0, 2.0).asDiagonal();
    EXPECT_TRUE(check_commutation(g).pass);
    g.A(0, 1) = 0.5;  // S1 = diag(1, 0) no longer commutes with A'
    const auto r = check_commutation(g);
    EXPECT_FALSE(r.pass);
    EXPECT_NEAR(r.worst_defect, 0.5, 1e-12);  // one off-diagonal entry of S1 A' - A' S1
    EXPECT_NE(r.worst_family.find("A'"), std::string::npos);
    EXPECT_THROW(build_aggregate(g), ModelError);
}

TEST(Aggregate, Weights) {
    const auto a = build_aggregate(derived_scalar_game());
    EXPECT_EQ(a.R(0, 0), 1.0);
    EXPECT_EQ(a.P(0, 0), 0.0);
    EXPECT_EQ(a.Q(0, 0), 1.0);
    GameSpec g = GameSpec::zero(1, 1);
    g.B1(0, 0) = 1.0;
    g.N1(0, 0) = 2.0;
    g.B2(0, 0) = 2.0;
    g.P1(0, 0) = 0.3;
    g.P2(0, 0) = 0.2;
    EXPECT_NEAR(build_aggregate(g).P(0, 0), 0.3 * 0.5 + 0.2 * 4.0, 1e-15);
    EXPECT_EQ(build_aggregate(GameSpec::zero(1, 1)).S1(0, 0), 0.0);
}

TEST(GameSpec, Validation) {
    auto g = derived_scalar_game();
    g.E(0, 0) = 1.0;
    EXPECT_THROW(g.validate(), ModelError);
    g = derived_scalar_game();
    g.N1(0, 0) = 0.0;
    EXPECT_THROW(g.validate(), ModelError);
    g = derived_scalar_game();
    g.R1(0, 0) = -1.0;
    EXPECT_THROW(g.validate(), ModelError);
    GameSpec two = GameSpec::zero(2, 1);
    two.R1(0, 1) = 1.0;
    EXPECT_THROW(two.validate(), ModelError);
    const Lattice lat(make_grid(1.0, 2), 1, 1);
    EXPECT_THROW(solve_game(GameSpec::zero(2, 1), lat, game_cfg()), DomainError);
}

// Aggregate system of the derived game written out as a plain linear scheme:
//   x: drift -Y, dW-coefficient 0.5 k;  Y: drift x, dB-coefficient 0.5 H (off at node N);  Y_N = x_N.
TEST(SolveGame, AggregateMatchesOracle) {
    const auto g = derived_scalar_game();
    for (int N : {1, 2}) {
        const Lattice lat(make_grid(1.0, N), 1, 1);
        const auto cand = solve_game(g, lat, game_cfg());
        oracle::Scheme sc;
        sc.N = N;
        sc.x0 = 1.0;
        sc.f = oracle::constant({0, 0, -1, 0, 0});
        sc.g = oracle::constant({0, 0, 0, 0.5, 0});
        sc.F = [N](int k) { return k < N ? oracle::Row{0, 1, 0, 0, 0} : oracle::Row{}; };
        sc.G = [N](int k) { return k < N ? oracle::Row{0, 0, 0, 0, 0.5} : oracle::Row{}; };
        sc.h = {0, 1, 0, 0, 0};
        const auto o = oracle::solve(sc);
        double worst = 0.0;
        for (int k = 0; k <= N; ++k)
            for (std::size_t a = 0; a < lat.atom_count(); ++a) {
                const std::size_t i = lat.node_of_atom(k, a);
                for (const auto* q : {&cand.aggregate, &cand.player1}) {
                    worst = std::max({worst, std::abs(q->y[k][i] - o.y[k][a]), std::abs(q->Y[k][i] - o.Y[k][a]),
                                      std::abs(q->z[k][i] - o.z[k][a]), std::abs(q->Z[k][i] - o.Z[k][a])});
                }
                EXPECT_EQ(cand.player2.Y[k][i], 0.0);
                EXPECT_NEAR(cand.u1.value(k, i), -o.Y[k][a], 1e-10);
            }
        EXPECT_LT(worst, 1e-10) << "N = " << N;
        EXPECT_LT(cand.aggregation_defect, 1e-10);
    }
}

TEST(SolveGame, ZeroCostGivesZeroControls) {
    const Lattice lat(make_grid(1.0, 3), 1, 1);
    const auto cand = solve_game(zero_cost_game(), lat, game_cfg());
    for (int k = 0; k <= 3; ++k)
        for (std::size_t i = 0; i < lat.node_size(k); ++i) {
            EXPECT_EQ(cand.u1.value(k, i), 0.0);
            EXPECT_EQ(cand.u2.value(k, i), 0.0);
        }
}

TEST(SolveGame, SymmetricPlayersShareControls) {
    auto g = derived_scalar_game();
    g.R2 = g.R1;
    g.Q2 = g.Q1;
    g.P1(0, 0) = g.P2(0, 0) = 0.3;
    const Lattice lat(make_grid(1.0, 3), 1, 1);
    const auto cand = solve_game(g, lat, game_cfg());
    for (int k = 0; k <= 3; ++k)
        for (std::size_t i = 0; i < lat.node_size(k); ++i) EXPECT_NEAR(cand.u1.value(k, i), cand.u2.value(k, i), 1e-12);
}

TEST(VerifyNash, ZeroCostDifferenceIsControlEnergy) {
    const auto g = zero_cost_game();
    const Lattice lat(make_grid(1.0, 3), 1, 1);
    const auto cand = solve_game(g, lat, game_cfg());
    const auto noise = sample_noise(lat.grid(), 1, 1, 2000, 3);
    const auto rep = verify_nash(g, cand, {{"const", ControlPath::constant(lat.grid(), 0.25)}}, lat, noise);
    for (const auto& e : rep.entries) {
        if (e.deviation == "own control") {
            EXPECT_EQ(e.exact_difference, 0.0);
            EXPECT_EQ(e.difference.mean, 0.0);
        } else {
            // 1/2 sum_{k<N} v^2 dt; the lattice has no node-N control cost
            EXPECT_NEAR(e.exact_difference, 0.5 * 0.0625, 1e-15);
            EXPECT_NEAR(e.difference.mean, 0.5 * 0.0625, 1e-15);
        }
    }
    EXPECT_TRUE(rep.pass);
}

TEST(VerifyNash, DerivedGameBattery) {
    const auto g = derived_scalar_game();
    const Lattice lat(make_grid(1.0, 3), 1, 1);
    const auto cand = solve_game(g, lat, game_cfg());
    const auto noise = sample_noise(lat.grid(), 1, 1, 20000, 7);
    const auto rep = verify_nash(g, cand, standard_deviations(lat.grid()), lat, noise);
    EXPECT_EQ(rep.entries.size(), 2u * (standard_deviations(lat.grid()).size() + 1));
    for (const auto& e : rep.entries) {
        EXPECT_TRUE(e.pass) << e.player << " " << e.deviation << " " << e.difference.mean;
        EXPECT_GE(e.exact_difference, -1e-10) << e.player << " " << e.deviation;
        // the first-order term equals the duality form exactly on the lattice
        EXPECT_NEAR(e.first_order.mean, e.duality.mean, 1e-9) << e.player << " " << e.deviation;
        if (e.deviation == "own control") EXPECT_EQ(e.exact_difference, 0.0);
    }
    EXPECT_TRUE(rep.pass);
}

TEST(VerifyNash, PlayerTwoIsIndifferent) {
    // player 2 bears only control cost, so the best reply is zero and any deviation costs 1/2 E int v^2
    const auto g = derived_scalar_game();
    const Lattice lat(make_grid(1.0, 2), 1, 1);
    const auto cand = solve_game(g, lat, game_cfg());
    const auto noise = sample_noise(lat.grid(), 1, 1, 500, 2);
    const auto rep = verify_nash(g, cand, {{"const", ControlPath::constant(lat.grid(), -0.5)}}, lat, noise);
    for (const auto& e : rep.entries)
        if (e.player == 2 && e.deviation == "const") EXPECT_NEAR(e.exact_difference, 0.5 * 0.25, 1e-12);
}
