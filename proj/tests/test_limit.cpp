#include <cmath>

#include <gtest/gtest.h>

#include "bumpforge/energy.hpp"
#include "bumpforge/limit.hpp"

using namespace bumpforge;

TEST(GroundState, SechProfile1D) {
    const Domain d(1, 12.0, 481);
    const auto pk = solve_ground_state(1.0, 3.0, d);
    double worst = 0.0;
    for (std::size_t j = 0; j < pk.profile.w.size(); ++j) {
        const double r = pk.profile.radius(j);
        worst = std::max(worst, std::abs(pk.profile.w[j] - std::sqrt(2.0) / std::cosh(r)));
    }
    EXPECT_LT(worst, 1e-6);
    EXPECT_NEAR(pk.peak, std::sqrt(2.0), 1e-6);
    EXPECT_NEAR(pk.m_inf, 4.0 / 3.0, 1e-4);
}

TEST(GroundState, ScalingSymmetry) {
    // w_a(r) = a^{1/(p-1)} w_1(sqrt(a) r)
    for (int dim : {1, 2}) {
        const Domain d(dim, 10.0, 401);
        const auto w1 = solve_ground_state(1.0, 3.0, d);
        const auto w4 = solve_ground_state(4.0, 3.0, d);
        for (double r : {0.0, 0.3, 0.8, 1.7, 2.5}) {
            const double expect = 2.0 * w1.profile.value(2.0 * r);
            EXPECT_NEAR(w4.profile.value(r), expect, 1e-6 * expect) << "N=" << dim << " r=" << r;
        }
    }
}

TEST(GroundState, PeakStableUnderStepHalving2D) {
    const auto a = solve_ground_state(1.0, 3.0, Domain(2, 10.0, 513));
    const auto b = solve_ground_state(1.0, 3.0, Domain(2, 10.0, 1025));
    EXPECT_NEAR(a.peak, b.peak, 1e-6);
}

TEST(GroundState, PositiveDecreasing) {
    const auto pk = solve_ground_state(1.5, 3.0, Domain(2, 10.0, 129));
    for (std::size_t j = 1; j < pk.profile.w.size(); ++j) {
        EXPECT_GE(pk.profile.w[j], 0.0);
        if (pk.profile.w[j] > 0.0) EXPECT_LT(pk.profile.w[j], pk.profile.w[j - 1]);
    }
    EXPECT_GT(pk.m_inf, 0.0);
}

TEST(GroundState, RadialResidual) {
    for (int dim : {1, 2}) {
        const auto pk = solve_ground_state(1.0, 3.0, Domain(dim, 10.0, 513));
        EXPECT_LT(radial_ode_residual(pk.profile, 8.0), 1e-8) << "N=" << dim;
    }
}

TEST(GroundState, BadInput) {
    EXPECT_THROW(solve_ground_state(0.0, 3.0, Domain(1, 5.0, 33)), ConfigError);
    EXPECT_THROW(solve_ground_state(1.0, 1.0, Domain(1, 5.0, 33)), ConfigError);
}

TEST(MInfinity, ScalingLaw) {
    // m(a) = a^{(p+1)/(p-1) - N/2} m(1)
    for (int dim : {1, 2}) {
        for (double p : {3.0, 5.0}) {
            const Domain d(dim, 12.0, 481);
            const double m1 = solve_ground_state(1.0, p, d).m_inf;
            for (double a : {0.5, 2.0, 4.0}) {
                const double ma = solve_ground_state(a, p, d).m_inf;
                const double expect = std::pow(a, (p + 1) / (p - 1) - 0.5 * dim) * m1;
                EXPECT_NEAR(ma / expect, 1.0, 1e-3) << "N=" << dim << " p=" << p << " a=" << a;
            }
        }
    }
}

TEST(MInfinity, MatchesGridEnergy) {
    // quadrature of I_inf on the sampled w converges to m_inf
    double prev = 1.0;
    for (int m : {65, 129, 257}) {
        const Domain d(2, 10.0, m);
        const auto pk = solve_ground_state(1.0, 3.0, d);
        const double err = std::abs(action_I_inf(pk.w_grid, 1.0, 3.0).total - pk.m_inf);
        EXPECT_LT(err, 0.7 * prev);
        prev = err;
    }
    EXPECT_LT(prev / 5.85, 2e-3);
}

TEST(DecayFit, RatesAndPowers) {
    const auto p1 = solve_ground_state(1.0, 3.0, Domain(1, 16.0, 257));
    const auto [s1, k1] = decay_fit(p1);
    EXPECT_NEAR(s1, 1.0, 0.05);
    EXPECT_NEAR(k1, 0.0, 0.1);
    const auto p4 = solve_ground_state(4.0, 3.0, Domain(1, 8.0, 257));
    EXPECT_NEAR(decay_fit(p4).first, 2.0, 0.1);
    const auto p2 = solve_ground_state(1.0, 3.0, Domain(2, 16.0, 257));
    EXPECT_NEAR(decay_fit(p2).second, 0.5, 0.1);
    EXPECT_THROW(decay_fit(p2, 4.0, 4.05), FitError);
}

TEST(Kernel, TranslationModesRefine) {
    double prev = 1.0;
    for (int m : {65, 129, 257}) {
        const auto pk = solve_ground_state(1.0, 3.0, Domain(2, 10.0, m));
        const double r0 = kernel_residual(pk, 0);
        EXPECT_NEAR(r0, kernel_residual(pk, 1), 1e-12);
        EXPECT_LT(r0, 0.5 * prev);
        prev = r0;
    }
}

TEST(Kernel, WIsNotInKernel) {
    const auto pk = solve_ground_state(1.0, 3.0, Domain(2, 10.0, 129));
    EXPECT_NEAR(linearized_residual(pk, pk.w_grid), 2.0, 0.05);
    EXPECT_THROW(kernel_residual(pk, 2), ConfigError);
}

TEST(Translate, EnergyIndependentOfShift) {
    const Domain d(2, 12.0, 193);
    const auto pk = solve_ground_state(1.0, 3.0, d);
    const double e0 = action_I_inf(pk.w_grid, 1.0, 3.0).total;
    const auto moved = pk.translated({2.5, -1.25}, d);
    EXPECT_NEAR(action_I_inf(moved, 1.0, 3.0).total, e0, 1e-6 * e0);
}
