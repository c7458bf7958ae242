// One line per acceptance criterion; exit status is the number of failures.
// Usage: acceptance <path-to-bumpforge-cli>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "bumpforge/config.hpp"
#include "bumpforge/diagnostics.hpp"

using namespace bumpforge;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool pass, const std::string& what) {
    std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", what.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

template <class... A>
std::string fmt(const char* f, A... a) {
    char buf[1024];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

RunConfig load(const std::string& name) {
    std::ifstream is(std::string(BUMPFORGE_SOURCE_DIR) + "/configs/" + name);
    if (!is) throw ConfigError("missing config " + name);
    return parse_config(is);
}

std::vector<double> random_field(const Domain& dom, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(dom.size(), 0.0);
    const double L = dom.half_width();
    for (int g = 0; g < 3; ++g) {
        const Point c{(2 * u(rng) - 1) * 0.6 * L, dom.dim() == 2 ? (2 * u(rng) - 1) * 0.6 * L : 0.0};
        const double amp = scale * (0.2 + u(rng));
        const double width = 0.1 * L + 0.3 * L * u(rng);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double d = distance(dom.point(i), c);
            v[i] += amp * std::exp(-d * d / (width * width));
        }
    }
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = dom.on_boundary(i) ? 0.0 : v[i] * (0.9 + 0.2 * u(rng));
    return v;
}

void c1() {
    const auto t0 = Clock::now();
    const Domain d(1, 12.0, 481);
    const auto pk = solve_ground_state(1.0, 3.0, d);
    double sup = 0.0;
    for (std::size_t j = 0; j < pk.profile.w.size(); ++j)
        sup = std::max(sup, std::abs(pk.profile.w[j] - std::sqrt(2.0) / std::cosh(pk.profile.radius(j))));
    const double dt = seconds_since(t0);
    report(1, sup <= 1e-6 && std::abs(pk.m_inf - 4.0 / 3.0) <= 1e-4 && dt < 1.0,
           fmt("limit oracle: sup|w - sqrt2 sech| = %.2e, m_inf = %.7f, %.3f s", sup, pk.m_inf, dt));
}

void c2() {
    const auto [s1, k1] = decay_fit(solve_ground_state(1.0, 3.0, Domain(1, 16.0, 257)));
    const auto [s4, k4] = decay_fit(solve_ground_state(4.0, 3.0, Domain(1, 8.0, 257)));
    const auto [s2d, k2d] = decay_fit(solve_ground_state(1.0, 3.0, Domain(2, 16.0, 257)));
    const bool pass = std::abs(s1 - 1.0) <= 0.05 && std::abs(s4 - 2.0) <= 0.1 && std::abs(k2d - 0.5) <= 0.1;
    report(2, pass, fmt("decay: rate %.4f (a=1), %.4f (a=4), N=2 power %.4f (rate %.4f)", s1, s4, k2d, s2d));
}

void c3() {
    double worst = 0.0;
    for (int dim : {1, 2}) {
        const Domain d(dim, 12.0, 481);
        const double m1 = solve_ground_state(1.0, 3.0, d).m_inf;
        for (double a : {0.5, 2.0, 4.0}) {
            const double expect = std::pow(a, 4.0 / 2.0 - 0.5 * dim);
            worst = std::max(worst, std::abs(solve_ground_state(a, 3.0, d).m_inf / m1 / expect - 1.0));
        }
    }
    report(3, worst <= 1e-3, fmt("scaling law: worst relative deviation %.2e over N in {1,2}, a in {0.5,2,4}", worst));
}

void c4() {
    auto pair = load("e1.cfg").pair;
    std::mt19937_64 rng(2024);
    const double delta = 0.25;
    double worst = 0.0;
    for (int dim : {1, 2}) {
        const Domain d(dim, 6.0, dim == 1 ? 201 : 61);
        const auto pb = make_problem(pair, d, 3.0, 2.0);
        for (int rep = 0; rep < 100; ++rep) {
            const auto sp = split(GridField(d, random_field(d, rng, 1.5)), delta);
            std::vector<double> u(d.size());
            for (std::size_t i = 0; i < u.size(); ++i) u[i] = sp.low[i] + sp.high[i];
            const auto e = action_I(pb, u);
            const double rhs = action_I(pb, sp.low.values()).total + action_J(pb, sp.high.values(), delta, sp.low.values()).total;
            worst = std::max(worst, std::abs(e.total - rhs) / e.magnitude());
            const auto ei = action_I_inf(u, d, pair.a_inf, 3.0);
            const double ri = action_I_inf(sp.low.values(), d, pair.a_inf, 3.0).total +
                              action_J_inf(sp.high.values(), d, pair.a_inf, 3.0, delta, sp.low.values()).total;
            worst = std::max(worst, std::abs(ei.total - ri) / ei.magnitude());
        }
    }
    report(4, worst <= 1e-10, fmt("splitting identities: worst relative gap %.2e on 200 fields per identity", worst));
}

void c5() {
    auto pair = load("e1.cfg").pair;
    pair.b.amplitude = 0.2;
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    // brute force on random tents
    double scan_err = 0.0;
    {
        const Domain d(2, 8.0, 65);
        const auto pk = solve_ground_state(pair.a_inf, 3.0, d);
        const auto pb = make_problem(pair, d, 3.0, 2.0);
        const auto th = make_thresholds(pair, pk, 3.0, 2.0);
        for (int rep = 0; rep < 5; ++rep) {
            const Point c{2 * u(rng) - 1, 2 * u(rng) - 1};
            const double height = th.delta * (1.5 + 3 * u(rng));
            const double width = 0.5 * th.R * (0.3 + 0.6 * u(rng));
            std::vector<double> v(d.size(), 0.0);
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double r = distance(d.point(i), c);
                v[i] = std::min(th.delta, 0.3 * std::exp(-0.5 * r)) + std::max(0.0, height * (1.0 - r / width));
            }
            const GridField f(d, v);
            const double t = theta_project(f, BumpLayout{{c}, th.R}, kAllBumps, pb, th).t;
            const auto sp = split(f, th.delta);
            const int n = 10000;
            const double tmax = 3.0 * t;
            std::vector<double> g(n + 1), x(d.size());
            for (int k = 0; k <= n; ++k) {
                for (std::size_t i = 0; i < x.size(); ++i) x[i] = sp.low[i] + tmax * k / n * sp.high[i];
                g[std::size_t(k)] = action_I(pb, x).total;
            }
            int best = 1;
            for (int k = 1; k < n; ++k)
                if (g[std::size_t(k)] > g[std::size_t(best)]) best = k;
            const double gm = g[std::size_t(best - 1)], g0 = g[std::size_t(best)], gp = g[std::size_t(best + 1)];
            const double ts = tmax / n * (best + 0.5 * (gm - gp) / (gm - 2 * g0 + gp));
            scan_err = std::max(scan_err, std::abs(ts - t));
        }
    }

    double theta_w = 0.0;
    {
        const Domain d(2, 20.0, 257);
        const auto pk = solve_ground_state(2.0, 3.0, d);
        const auto th = make_thresholds(limit_pair(2.0), pk, 3.0, 2.0);
        theta_w = theta_project(pk.w_grid, BumpLayout{{{0.0, 0.0}}, th.R}, kAllBumps, make_limit_problem(2.0, d, 3.0), th).t;
    }

    double scale_err = 0.0;
    bool d3_ok = true;
    {
        const Domain d(2, 12.0, 97);
        const auto pk = solve_ground_state(pair.a_inf, 3.0, d);
        const auto pb = make_problem(pair, d, 3.0, 2.0);
        const auto th = make_thresholds(pair, pk, 3.0, 2.0);
        const Point c{0.5, -0.75};
        const auto w = pk.translated(c, d);
        const BumpLayout lay{{c}, th.R};
        const double t0 = theta_project(w, lay, kAllBumps, pb, th).t;
        const auto sp = split(w, th.delta);
        for (double s : {0.5, 2.0, 5.0}) {
            std::vector<double> v(d.size());
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = sp.low[i] + s * sp.high[i];
            scale_err = std::max(scale_err, std::abs(theta_project(GridField(d, v), lay, kAllBumps, pb, th).t * s - t0) / t0);
        }

        auto strong = pair;
        strong.b.amplitude = 0.9 * th.B1;
        const auto pbs = make_problem(strong, d, 3.0, 2.0);
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<double> v(d.size(), 0.0), low(d.size(), th.delta);
            const Point cc{4 * u(rng) - 2, 4 * u(rng) - 2};
            for (std::size_t i = 0; i < v.size(); ++i)
                v[i] = std::max(0.0, (0.2 + u(rng)) * (1.0 - distance(d.point(i), cc) / 1.5));
            const auto f = make_fiber(pbs, v, low, th.delta);
            for (int k = 0; k <= 200; ++k) d3_ok = d3_ok && f.d3g(0.05 * k) < 0.0;
        }
    }
    report(5, scan_err <= 1e-4 && std::abs(theta_w - 1.0) <= 1e-2 && scale_err <= 1e-8 && d3_ok,
           fmt("theta: scan gap %.2e, theta(w) = %.5f, scale law %.2e, g''' < 0 at 0.9 B1: %s", scan_err, theta_w,
               scale_err, d3_ok ? "yes" : "no"));
}

void c6() {
    const auto pair = load("e1.cfg").pair;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    const Domain d(2, 5.0, 41);
    const auto pb = make_problem(pair, d, 3.0, 2.0);
    std::vector<double> g(d.size());
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        auto u = random_field(d, rng, 1.0);
        std::vector<double> v(d.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = d.on_boundary(i) ? 0.0 : noise(rng);
        for (std::size_t i = 0; i < u.size(); ++i)
            if (!d.on_boundary(i)) u[i] += 0.1;
        const double eps = 1e-5;
        std::vector<double> up(u), dn(u);
        for (std::size_t i = 0; i < u.size(); ++i) {
            up[i] += eps * v[i];
            dn[i] -= eps * v[i];
        }
        const double fd = (action_I(pb, up).total - action_I(pb, dn).total) / (2 * eps);
        grad_I(pb, u, g);
        const double an = pairing(d, g, v);
        worst = std::max(worst, std::abs(fd - an) / std::abs(an));
    }
    report(6, worst <= 1e-5, fmt("gradient: worst relative finite-difference gap %.2e on 50 pairs", worst));
}

/// Returns |mu_1 - m_inf| of the single-bump solve: the measured
/// discretization error used by criterion 8.
double c7() {
    auto cfg = load("limit.cfg");
    const Domain d1 = cfg.domain();
    const auto pk1 = solve_ground_state(cfg.pair.a_inf, cfg.p, d1);
    const auto pb1 = make_problem(cfg.pair, d1, cfg.p, cfg.q);
    const auto th1 = resolve_thresholds(cfg, pk1);
    const BumpLayout one{{{0.0, 0.0}}, th1.R};
    auto t0 = Clock::now();
    const auto r1 = minimize_on_S(pb1, one, translate_guess(one, pk1, pb1, th1), th1, cfg.inner);
    const double dt1 = seconds_since(t0);

    cfg.half_width = 16.5;
    const Domain d2 = cfg.domain();
    const auto pk2 = solve_ground_state(cfg.pair.a_inf, cfg.p, d2);
    const auto pb2 = make_problem(cfg.pair, d2, cfg.p, cfg.q);
    const auto th2 = resolve_thresholds(cfg, pk2);
    const BumpLayout two{{{-3.0 * th2.R, 0.0}, {3.0 * th2.R, 0.0}}, th2.R};
    t0 = Clock::now();
    const auto r2 = minimize_on_S(pb2, two, translate_guess(two, pk2, pb2, th2), th2, cfg.inner);
    const double dt2 = seconds_since(t0);

    const double e1 = r1.mu / pk1.m_inf - 1.0, e2 = r2.mu / (2.0 * pk2.m_inf) - 1.0;
    report(7, r1.converged && r2.converged && std::abs(e1) <= 0.02 && std::abs(e2) <= 0.03 && dt1 < 30 && dt2 < 30,
           fmt("mu recovery (129^2): k=1 rel err %+.4f (%.2f s), k=2 at 6R rel err %+.4f (%.2f s)", e1, dt1, e2, dt2));
    return std::abs(r1.mu - pk1.m_inf);
}

void c8(double tol) {
    auto cfg = load("e1.cfg");
    cfg.half_width = 16.0;
    const auto t0 = Clock::now();
    std::vector<double> mu;
    std::vector<bool> conv;
    double m_inf = 0.0;
    for (int k : {1, 2}) {
        cfg.nodes = 257;
        const Domain dc = cfg.domain();
        const auto pkc = solve_ground_state(cfg.pair.a_inf, cfg.p, dc);
        const auto pbc = make_problem(cfg.pair, dc, cfg.p, cfg.q);
        const auto coarse = outer_maximize(k, pbc, cfg.pair, resolve_thresholds(cfg, pkc), pkc, cfg.outer);

        cfg.nodes = 513;
        const Domain df = cfg.domain();
        const auto pkf = solve_ground_state(cfg.pair.a_inf, cfg.p, df);
        const auto pbf = make_problem(cfg.pair, df, cfg.p, cfg.q);
        OuterOptions fine = cfg.outer;
        fine.radial_starts = 0;
        fine.random_starts = 0;
        fine.seeds = {coarse.layout.centers};
        fine.initial_step = 2.0 * df.spacing();
        const auto rep = outer_maximize(k, pbf, cfg.pair, resolve_thresholds(cfg, pkf), pkf, fine);
        mu.push_back(rep.mu);
        conv.push_back(rep.best.converged);
        m_inf = pkf.m_inf;
    }
    const auto rungs = ladder_check(mu, m_inf, tol);
    report(8, rungs[0].pass && rungs[1].pass && conv[0] && conv[1],
           fmt("ladder (E1, C=0.1, 513^2): mu1 - m_inf = %.4f, mu2 - mu1 - m_inf = %+.4f, tol %.4f, %.0f s", rungs[0].margin,
               rungs[1].margin, tol, seconds_since(t0)));
}

void c9() {
    auto cfg = load("e1.cfg");
    cfg.nodes = 257;
    const Domain d = cfg.domain();
    const auto pk = solve_ground_state(cfg.pair.a_inf, cfg.p, d);
    const ScanSetup setup{cfg.pair, d, cfg.p, cfg.q, 2, cfg.outer};
    const std::vector<double> amps{0.2, 0.1, 0.05, 0.025};
    const auto t0 = Clock::now();
    const auto rep = b_scan(setup, amps, pk);
    std::ostringstream rows;
    bool all = true;
    for (const auto& r : rep.rows) {
        rows << fmt(" C=%g:|l|=%.2e,sep=%.2f", r.C, r.max_lambda, r.min_separation);
        all = all && r.converged;
    }
    report(9, all && rep.lambda_trend.pass && rep.separation_trend.pass,
           fmt("b-scan (k=2, 257^2): lambda violations %d (major %d), separation violations %d (major %d), %.0f s;",
               rep.lambda_trend.violations, rep.lambda_trend.major, rep.separation_trend.violations,
               rep.separation_trend.major, seconds_since(t0)) +
               rows.str());
}

void c10() {
    const std::vector<double> sizes{20.0, 30.0};
    {
        auto pair = load("e1.cfg").pair;
        pair.b.amplitude = 0.05;
        const auto t0 = Clock::now();
        const auto v = ground_state_probe(pair, 2, sizes);
        const double dt = seconds_since(t0);
        double margin = v.levels.front().margin;
        for (const auto& l : v.levels) margin = std::min(margin, l.margin);
        report(10, v.verdict == Verdict::exists && margin > 0.0 && dt < 300,
               fmt("probe E1 (C=0.05): %s, smallest margin %.4f, center shift %.3f, %.1f s", to_string(v.verdict), margin,
                   v.center_shift, dt));
    }
    {
        const auto pair = load("e2.cfg").pair;
        const auto t0 = Clock::now();
        const auto v = ground_state_probe(pair, 2, sizes);
        const double dt = seconds_since(t0);
        const auto& a = v.levels.front().center;
        const auto& b = v.levels.back().center;
        report(10, v.verdict == Verdict::escape && dt < 300,
               fmt("probe E2 (n=16): %s, drift %.3f, |center| %.2f -> %.2f, %.1f s", to_string(v.verdict), v.drift, norm(a),
                   norm(b), dt));
    }
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void c11(const std::string& cli) {
    const std::string dir = "acceptance_determinism";
    std::filesystem::create_directories(dir);
    bool same = true;
    std::size_t bytes = 0;
    for (int run = 0; run < 2; ++run) {
        const std::string tag = dir + "/run" + std::to_string(run);
        const std::string cmd = cli + " maxmin --k 1 --config " + std::string(BUMPFORGE_SOURCE_DIR) +
                                "/configs/e1.cfg --L 10 --M 81 --seed 7 --set outer.random_starts=2 --out " + tag +
                                ".json --field " + tag + ".csv > /dev/null 2>&1";
        if (std::system(cmd.c_str()) != 0) same = false;
    }
    for (const char* ext : {".json", ".csv"}) {
        const auto a = slurp(dir + "/run0" + ext), b = slurp(dir + "/run1" + ext);
        same = same && !a.empty() && a == b;
        bytes += a.size();
    }
    report(11, same, fmt("determinism: two CLI maxmin runs, JSON and field CSV byte-identical (%zu bytes compared)", bytes));
}

void guarded(int id, const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        report(id, false, std::string("threw: ") + e.what());
    }
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <bumpforge-cli>\n";
        return 64;
    }
    guarded(1, c1);
    guarded(2, c2);
    guarded(3, c3);
    guarded(4, c4);
    guarded(5, c5);
    guarded(6, c6);
    double tol = 0.0;
    guarded(7, [&] { tol = c7(); });
    guarded(8, [&] {
        if (!(tol > 0.0)) throw Error("criterion 7 gave no discretization error");
        c8(tol);
    });
    guarded(9, c9);
    guarded(10, c10);
    guarded(11, [&] { c11(argv[1]); });
    std::printf("acceptance: %d failing criteria\n", failures);
    return failures == 0 ? 0 : 1;
}
