#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bumpforge/maxmin.hpp"

using namespace bumpforge;

namespace {

struct Case {
    Domain dom;
    CoefficientPair pair;
    LimitPack pack;
    Problem pb;
    ThresholdSet th;
    Case(const Domain& d, const CoefficientPair& pr)
        : dom(d), pair(pr), pack(solve_ground_state(pr.a_inf, 3.0, d)), pb(make_problem(pr, d, 3.0, 2.0)),
          th(make_thresholds(pr, pack, 3.0, 2.0)) {}
};

CoefficientPair e1_pair(double C) {
    CoefficientPair pr;
    pr.a_inf = 2.0;
    pr.alpha = {AlphaKind::exponential, 1.0, 1.0, 1.0};
    pr.b = {BKind::rational, C, 1.0, 1.0, 1.0};
    pr.a0 = 1.0;
    pr.eta = 0.5;
    return pr;
}

InnerSolveResult solve_at(const Case& s, const BumpLayout& lay) {
    return minimize_on_S(s.pb, lay, translate_guess(lay, s.pack, s.pb, s.th), s.th);
}

} // namespace

TEST(Inner, SingleBumpLimitProblem) {
    const Case s(Domain(2, 6.5, 129), limit_pair(2.0));
    const BumpLayout lay{{{0.0, 0.0}}, s.th.R};
    const auto r = solve_at(s, lay);
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.mu / s.pack.m_inf, 1.0, 0.02);
    EXPECT_GT(r.mu, 0.0);
    double sup = 0.0;
    for (std::size_t i = 0; i < s.dom.size(); ++i) sup = std::max(sup, std::abs(r.u[i] - s.pack.w_grid[i]));
    EXPECT_LE(sup, 0.02 * s.pack.peak);
    EXPECT_LE(norm(r.residuals.barycenters[0]), s.dom.spacing());
    EXPECT_TRUE(r.residuals.satisfied(InnerOptions{}.residual_tol));
    for (double e : r.bump_energy) EXPECT_GT(e, 0.0);
}

TEST(Inner, TranslationCovariance) {
    const Case s(Domain(2, 8.0, 161), limit_pair(2.0));
    const double mu0 = solve_at(s, BumpLayout{{{0.0, 0.0}}, s.th.R}).mu;
    const double mu1 = solve_at(s, BumpLayout{{{0.5, -0.3}}, s.th.R}).mu;
    EXPECT_NEAR(mu1, mu0, 1e-3 * mu0);
}

TEST(Inner, TwoFarBumps) {
    const Case s(Domain(2, 16.5, 129), limit_pair(2.0));
    const double R = s.th.R;
    const auto r = solve_at(s, BumpLayout{{{-3.0 * R, 0.0}, {3.0 * R, 0.0}}, R});
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.mu / (2.0 * s.pack.m_inf), 1.0, 0.03);
}

TEST(Inner, MonotoneHistoryAndSubmergedOptimality) {
    const Case s(Domain(2, 8.0, 129), e1_pair(0.1));
    const BumpLayout lay{{{0.5, 0.25}}, s.th.R};
    const auto r = solve_at(s, lay);
    ASSERT_TRUE(r.converged);
    for (std::size_t j = 1; j < r.energy_history.size(); ++j)
        EXPECT_LE(r.energy_history[j], r.energy_history[j - 1] + 1e-12 * std::abs(r.energy_history[j - 1]));

    // pointwise residual of the equation on the free submerged nodes
    std::vector<double> g(s.dom.size());
    grad_I(s.pb, r.u.values(), g);
    const auto sp = split(r.u, s.th.delta);
    double worst = 0.0;
    for (std::size_t i = 0; i < s.dom.size(); ++i) {
        if (s.dom.on_boundary(i)) continue;
        if (sp.high[i] > 0.0) {
            EXPECT_EQ(sp.low[i], s.th.delta);
            continue;
        }
        if (!(r.u[i] > 0.0 && r.u[i] < s.th.delta) || distance(s.dom.point(i), lay.centers[0]) < lay.radius) continue;
        worst = std::max(worst, std::abs(g[i]) / s.dom.weight(i));
    }
    EXPECT_LE(worst, InnerOptions{}.residual_tol);
}

TEST(Inner, NotConvergedOnTinyBudget) {
    const Case s(Domain(2, 8.0, 65), e1_pair(0.1));
    InnerOptions o;
    o.max_iterations = 1;
    const BumpLayout lay{{{0.5, 0.25}}, s.th.R};
    EXPECT_THROW(minimize_on_S(s.pb, lay, translate_guess(lay, s.pack, s.pb, s.th), s.th, o), NotConverged);
    o.require_convergence = false;
    EXPECT_FALSE(minimize_on_S(s.pb, lay, translate_guess(lay, s.pack, s.pb, s.th), s.th, o).converged);
}

TEST(Multipliers, ManufacturedResidual) {
    const Domain d(2, 6.0, 97);
    const Point c{0.5, -0.25};
    const Point v{0.37, -1.2};
    std::vector<double> part(d.size(), 0.0), res(d.size(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Point x = d.point(i);
        part[i] = std::max(0.0, 1.0 - distance(x, c) / 1.5) * (1.0 + 0.3 * x[0]);
        res[i] = part[i] * (v[0] * (x[0] - c[0]) + v[1] * (x[1] - c[1]));
    }
    const auto fit = fit_multipliers(d, res, part, c, 2.0);
    EXPECT_NEAR(fit.lambda[0], v[0], 1e-8);
    EXPECT_NEAR(fit.lambda[1], v[1], 1e-8);
    EXPECT_LT(fit.residual, 1e-8);
    EXPECT_THROW(fit_multipliers(d, res, std::vector<double>(d.size(), 0.0), c, 2.0), SolverError);
}

TEST(Multipliers, SymmetricStateAndConsistency) {
    const Case s(Domain(2, 6.5, 129), limit_pair(2.0));
    const BumpLayout lay{{{0.0, 0.0}}, s.th.R};
    const auto sym = extract_multipliers(s.pack.w_grid, lay, s.pb, s.th);
    EXPECT_LT(norm(sym[0].lambda), 1e-10);

    const auto r = solve_at(s, lay);
    EXPECT_LE(r.max_multiplier(), 10.0 * InnerOptions{}.residual_tol);
    const auto again = extract_multipliers(r.u, lay, s.pb, s.th);
    EXPECT_EQ(again[0].lambda[0], r.multipliers[0].lambda[0]);
    EXPECT_EQ(again[0].lambda[1], r.multipliers[0].lambda[1]);
    EXPECT_EQ(again[0].residual, r.multipliers[0].residual);
}

TEST(Glue, FarCandidateAddsOneGroundLevel) {
    const Case s(Domain(2, 21.0, 257), limit_pair(2.0));
    const double R = s.th.R;
    const BumpLayout lay{{{-4.0 * R, 0.0}}, R};
    const auto r = solve_at(s, lay);
    const auto g = glue_candidate(r.u, lay, {4.0 * R, 0.0}, s.pack, s.pb, s.th);
    const double e = action_I(s.pb, g.u.values()).total;
    EXPECT_NEAR(e / (r.mu + s.pack.m_inf), 1.0, 0.03);
    EXPECT_THROW(glue_candidate(r.u, lay, {-3.0 * R, 0.0}, s.pack, s.pb, s.th), ConfigError);
}

TEST(Ladder, Examples) {
    const double m = 1.0;
    const std::vector<double> good{m + 0.1, 2 * m + 0.15};
    const auto ok = ladder_check(good, m, 0.01);
    EXPECT_TRUE(ok[0].pass);
    EXPECT_TRUE(ok[1].pass);
    EXPECT_NEAR(ok[1].margin, 0.05, 1e-12);
    const std::vector<double> bad{m + 0.1, 2 * m + 0.1 - 0.2};
    EXPECT_FALSE(ladder_check(bad, m, 0.01)[1].pass);
    EXPECT_THROW(ladder_check(std::vector<double>{}, m, 0.01), ConfigError);
    std::vector<MaxMinReport> gap(1);
    gap[0].k = 2;
    EXPECT_THROW(ladder_check(gap, m, 0.01), ConfigError);
}

TEST(Outer, FlatForLimitPair) {
    const Case s(Domain(2, 10.0, 97), limit_pair(2.0));
    OuterOptions o;
    o.radial_starts = 2;
    o.random_starts = 1;
    o.quadratic_refinement = false;
    const auto rep = outer_maximize(1, s.pb, s.pair, s.th, s.pack, o);
    EXPECT_TRUE(rep.flat);
    for (const auto& st : rep.starts)
        if (st.converged) EXPECT_NEAR(st.mu / s.pack.m_inf, 1.0, 0.02);
    EXPECT_THROW(outer_maximize(0, s.pb, s.pair, s.th, s.pack, o), ConfigError);
}

TEST(Outer, PairMatchesBruteForceScan1D) {
    // N = 1, k = 2: scan every admissible pair on a lattice of step R/2
    auto pair = e1_pair(0.1);
    const Case s(Domain(1, 24.0, 385), pair);
    OuterOptions o;
    o.radial_starts = 2;
    o.random_starts = 2;
    const auto rep = outer_maximize(2, s.pb, s.pair, s.th, s.pack, o);
    ASSERT_EQ(rep.layout.size(), 2u);
    EXPECT_GE(rep.layout.min_separation(), 2.0 * s.th.R * (1.0 - 1e-12));

    const double W = rep.region_half_width;
    const double step = std::round(0.5 * s.th.R / s.dom.spacing()) * s.dom.spacing();
    double best = -std::numeric_limits<double>::infinity();
    for (double x1 = -std::floor(W / step) * step; x1 <= W; x1 += step)
        for (double x2 = x1 + 2.0 * s.th.R; x2 <= W; x2 += step) {
            const Point a{x1, 0.0}, b{std::round(x2 / s.dom.spacing()) * s.dom.spacing(), 0.0};
            if (distance(a, b) < 2.0 * s.th.R) continue;
            const BumpLayout lay{{a, b}, s.th.R};
            InnerOptions io;
            io.require_convergence = false;
            const auto r = minimize_on_S(s.pb, lay, translate_guess(lay, s.pack, s.pb, s.th), s.th, io);
            if (r.converged) best = std::max(best, r.mu);
        }
    ASSERT_TRUE(std::isfinite(best));
    EXPECT_GE(rep.mu, best - 1e-6 * std::abs(best));
}
