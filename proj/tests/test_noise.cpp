#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>

#include "fbdsde/lattice.hpp"

using namespace fbdsde;

TEST(TimeGrid, UniformNodes) {
    const auto g = make_grid(1.0, 4);
    const std::vector<double> want = {0.0, 0.25, 0.5, 0.75, 1.0};
    EXPECT_EQ(g.nodes(), want);
    EXPECT_EQ(make_grid(1.0, 1).nodes(), (std::vector<double>{0.0, 1.0}));
}

TEST(TimeGrid, RejectsBadInput) {
    EXPECT_THROW(make_grid(0.0, 4), DomainError);
    EXPECT_THROW(make_grid(-1.0, 4), DomainError);
    EXPECT_THROW(make_grid(1.0, 0), DomainError);
    EXPECT_THROW(make_grid(1e-13, 1), DomainError);
}

TEST(SampleNoise, SameSeedSameArrays) {
    const auto g = make_grid(1.0, 5);
    const auto a = sample_noise(g, 2, 1, 100, 42), b = sample_noise(g, 2, 1, 100, 42);
    EXPECT_TRUE(std::ranges::equal(a.raw_dW(), b.raw_dW()));
    EXPECT_TRUE(std::ranges::equal(a.raw_dB(), b.raw_dB()));
    const auto c = sample_noise(g, 2, 1, 100, 43);
    EXPECT_FALSE(std::ranges::equal(a.raw_dW(), c.raw_dW()));
}

TEST(SampleNoise, VarianceOfUnitStep) {
    const std::size_t M = 100000;
    const auto n = sample_noise(make_grid(1.0, 1), 1, 1, M, 3);
    double s = 0.0, ss = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        s += n.dW(m, 0);
        ss += n.dW(m, 0) * n.dW(m, 0);
    }
    const double mean = s / M, var = ss / M - mean * mean;
    EXPECT_LT(std::abs(var - 1.0), 3.0 * std::sqrt(2.0 / M));
}

TEST(SampleNoise, DriversUncorrelated) {
    const std::size_t M = 100000;
    const auto n = sample_noise(make_grid(1.0, 1), 1, 1, M, 5);
    double sw = 0, sb = 0, sww = 0, sbb = 0, swb = 0;
    for (std::size_t m = 0; m < M; ++m) {
        const double w = n.dW(m, 0), b = n.dB(m, 0);
        sw += w;
        sb += b;
        sww += w * w;
        sbb += b * b;
        swb += w * b;
    }
    const double cov = swb / M - sw / M * sb / M;
    const double corr = cov / std::sqrt((sww / M - sw * sw / M / M) * (sbb / M - sb * sb / M / M));
    EXPECT_LT(std::abs(corr), 3.0 / std::sqrt(double(M)));
}

TEST(SampleNoise, AntitheticPairs) {
    const auto n = sample_noise(make_grid(1.0, 3), 1, 1, 10, 9, {true});
    for (std::size_t m = 0; m < 10; m += 2)
        for (int k = 0; k < 3; ++k) {
            EXPECT_EQ(n.dW(m + 1, k), -n.dW(m, k));
            EXPECT_EQ(n.dB(m + 1, k), -n.dB(m, k));
        }
    EXPECT_THROW(sample_noise(make_grid(1.0, 3), 1, 1, 0, 1), DomainError);
}

TEST(Lattice, AtomCountsAndBudget) {
    const Lattice one(make_grid(1.0, 1), 1, 1);
    EXPECT_EQ(one.atom_count(), 4u);
    EXPECT_DOUBLE_EQ(one.weight(), 0.25);
    EXPECT_EQ(build_lattice(make_grid(1.0, 3), 1, 1).atom_count(), 64u);
    EXPECT_THROW(build_lattice(make_grid(1.0, 13), 1, 1), BudgetError);
}

TEST(Lattice, IncrementMoments) {
    const Lattice lat(make_grid(2.0, 3), 1, 2);
    for (int k = 0; k < 3; ++k) {
        std::vector<double> w(lat.atom_count()), w2(lat.atom_count()), b2(lat.atom_count());
        for (std::size_t a = 0; a < lat.atom_count(); ++a) {
            w[a] = lat.dW(a, k);
            w2[a] = lat.dW(a, k) * lat.dW(a, k);
            b2[a] = lat.dB(a, k, 1) * lat.dB(a, k, 0);
        }
        EXPECT_NEAR(lat.mean(w), 0.0, 1e-15);
        EXPECT_NEAR(lat.mean(w2), lat.dt(), 1e-14);
        EXPECT_NEAR(lat.mean(b2), 0.0, 1e-15);
    }
}

class CondExpect : public ::testing::Test {
protected:
    Lattice lat{make_grid(1.0, 3), 1, 1};
    std::vector<double> field(auto fn) const {
        std::vector<double> v(lat.atom_count());
        for (std::size_t a = 0; a < v.size(); ++a) v[a] = fn(a);
        return v;
    }
};

TEST_F(CondExpect, Constant) {
    const auto v = field([](std::size_t) { return 2.5; });
    for (int k = 0; k <= 3; ++k)
        for (double x : lat.cond_expect(v, {k})) EXPECT_DOUBLE_EQ(x, 2.5);
}

TEST_F(CondExpect, UnobservedForwardIncrementVanishes) {
    for (int k = 0; k < 3; ++k) {
        const auto v = field([&](std::size_t a) { return lat.dW(a, k); });
        for (double x : lat.cond_expect(v, {k})) EXPECT_EQ(x, 0.0);
    }
}

TEST_F(CondExpect, ObservedBackwardIncrementKept) {
    for (int k = 0; k < 3; ++k) {
        const auto v = field([&](std::size_t a) { return lat.dB(a, k); });
        const auto e = lat.cond_expect(v, {k});
        for (std::size_t a = 0; a < v.size(); ++a) EXPECT_EQ(e[a], v[a]);
    }
}

TEST_F(CondExpect, TowerAndOrthogonality) {
    const auto v = field([&](std::size_t a) { return std::sin(double(a)) + lat.dW(a, 0) * lat.dB(a, 2); });
    for (int k = 0; k <= 3; ++k) {
        const auto e = lat.cond_expect(v, {k});
        const auto ee = lat.cond_expect(e, {k});
        for (std::size_t a = 0; a < e.size(); ++a) EXPECT_NEAR(ee[a], e[a], 1e-15);
        if (k < 3) {
            std::vector<double> prod(e.size());
            for (std::size_t a = 0; a < e.size(); ++a) prod[a] = e[a] * lat.dW(a, k);
            EXPECT_NEAR(lat.mean(prod), 0.0, 1e-15);
        }
    }
}

TEST_F(CondExpect, FutureBackwardDependenceSurvives) {
    // measurable at k+1 and depends on B_{k+1}: conditioning at k keeps it
    const int k = 0;
    const auto v = field([&](std::size_t a) { return lat.dB(a, k + 1) * (1.0 + lat.dW(a, 0)); });
    const auto e = lat.cond_expect(v, {k});
    for (std::size_t a = 0; a < v.size(); ++a) EXPECT_NEAR(e[a], lat.dB(a, k + 1), 1e-15);
}

TEST_F(CondExpect, FiltrationNeitherIncreasingNorDecreasing) {
    // dW_0 is known at 1 but not at 0; dB_0 is known at 0 but not at 1
    const auto w = field([&](std::size_t a) { return lat.dW(a, 0); });
    const auto b = field([&](std::size_t a) { return lat.dB(a, 0); });
    EXPECT_EQ(lat.cond_expect(w, {1}), w);
    EXPECT_NE(lat.cond_expect(w, {0}), w);
    EXPECT_EQ(lat.cond_expect(b, {0}), b);
    EXPECT_NE(lat.cond_expect(b, {1}), b);
}

TEST_F(CondExpect, CompressExpandRoundTrip) {
    const auto v = field([&](std::size_t a) { return lat.dW(a, 0) + 3.0 * lat.dB(a, 2); });
    for (int k = 0; k <= 3; ++k) {
        const auto e = lat.cond_expect(v, {k});
        const auto back = lat.expand(k, lat.compress(k, e));
        for (std::size_t a = 0; a < e.size(); ++a) EXPECT_NEAR(back[a], e[a], 1e-14);
    }
    EXPECT_THROW(lat.cond_expect(std::vector<double>(3), {0}), DomainError);
}

TEST(Lattice, SecondMomentsMatchGaussian) {
    const Lattice lat(make_grid(1.0, 2), 1, 1);
    const auto bundle = lattice_bundle(lat);
    double cross = 0.0, sq = 0.0;
    for (std::size_t a = 0; a < lat.atom_count(); ++a) {
        const double w = bundle.dW(a, 0) + bundle.dW(a, 1), b = bundle.dB(a, 0) + bundle.dB(a, 1);
        cross += w * b;
        sq += w * w;
    }
    EXPECT_NEAR(cross * lat.weight(), 0.0, 1e-15);
    EXPECT_NEAR(sq * lat.weight(), 1.0, 1e-15);
    for (std::size_t a = 0; a < lat.atom_count(); ++a) EXPECT_EQ(lat.atom_of_path(bundle, a), a);
}
