#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "bumpforge/decomp.hpp"
#include "bumpforge/energy.hpp"
#include "bumpforge/limit.hpp"
#include "bumpforge/maxmin.hpp"
#include "bumpforge/spectral.hpp"

namespace bumpforge {

// ---------------------------------------------------------------------------
// Decay of the submerged part.

struct DecayCheck {
    double rate = 0.0;
    double threshold = 0.0; ///< eta_s
    std::size_t samples = 0;
    bool pass = false;
};

/// Fits log u + (N-1)/2 log|x - x_i| = c - rate * dist(x, supp u^delta) over
/// 2 <= dist sqrt(a0) <= 6, nodes at least two decay lengths from the box
/// faces. x_i is the nearest center; the log term removes the radial
/// algebraic factor of the tail.
inline DecayCheck decay_check(const GridField& u, const BumpLayout& layout, const ThresholdSet& th, double a0) {
    const Domain& dom = u.domain();
    const double ell = 1.0 / std::sqrt(a0);
    std::vector<std::size_t> rim;
    const int m = dom.nodes();
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!(u[i] > th.delta)) continue;
        bool edge = false;
        for (int ax = 0; ax < dom.dim() && !edge; ++ax) {
            const int k = dom.axis_index(i, ax);
            const std::size_t st = dom.stride(ax);
            if ((k > 0 && !(u[i - st] > th.delta)) || (k < m - 1 && !(u[i + st] > th.delta))) edge = true;
        }
        if (edge) rim.push_back(i);
    }
    if (rim.empty()) throw FitError("decay_check: no emerging support");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!(u[i] > 1e-200) || u[i] > th.delta) continue;
        const Point x = dom.point(i);
        if (dom.inner_margin(x) < 2.0 * ell) continue;
        double dist = std::numeric_limits<double>::infinity();
        for (std::size_t j : rim) dist = std::min(dist, distance(x, dom.point(j)));
        if (dist < 2.0 * ell || dist > 6.0 * ell) continue;
        double rc = std::numeric_limits<double>::infinity();
        for (const auto& c : layout.centers) rc = std::min(rc, distance(x, c));
        xs.push_back(dist);
        ys.push_back(std::log(u[i]) + 0.5 * (dom.dim() - 1) * std::log(rc));
    }
    if (xs.size() < 10) throw FitError("decay_check: fewer than 10 nodes in the fit window");
    const double n = double(xs.size());
    const double sx = pairwise_sum(xs), sy = pairwise_sum(ys);
    const double sxx = pairwise_sum(xs.size(), [&](std::size_t i) { return xs[i] * xs[i]; });
    const double sxy = pairwise_sum(xs.size(), [&](std::size_t i) { return xs[i] * ys[i]; });
    const double den = n * sxx - sx * sx;
    DecayCheck out;
    out.samples = xs.size();
    out.threshold = th.eta_s;
    out.rate = den > 0.0 ? -(n * sxy - sx * sy) / den : 0.0;
    out.pass = out.rate >= th.eta_s;
    return out;
}

inline DecayCheck decay_check(const InnerSolveResult& res, const BumpLayout& layout, const ThresholdSet& th,
                              double a0) {
    return decay_check(res.u, layout, th, a0);
}

// ---------------------------------------------------------------------------
// Shape against w.

struct ShapeEntry {
    double distance = 0.0;      ///< sup_{|x| < r} |u(x + x_i) - w(x)|
    bool support_inside = false; ///< supp u_i^delta within B_{R-h}(x_i)
};

inline std::vector<ShapeEntry> shape_distance(const GridField& u, const BumpLayout& layout, const LimitPack& pack,
                                              double r, const ThresholdSet& th) {
    const Domain& dom = u.domain();
    for (const auto& c : layout.centers)
        if (r > dom.inner_margin(c)) throw ConfigError("shape_distance: radius reaches past the box");
    const auto sp = split(u, th.delta);
    const auto parts = detail::emerging_parts(dom, sp.high.values(), layout, 0.0);
    std::vector<ShapeEntry> out;
    for (std::size_t j = 0; j < layout.size(); ++j) {
        ShapeEntry e;
        double reach = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double d = distance(dom.point(i), layout.centers[j]);
            if (d < r) e.distance = std::max(e.distance, std::abs(u[i] - pack.profile.value(d)));
            if (parts[j][i] > 0.0) reach = std::max(reach, d);
        }
        e.support_inside = reach < layout.radius - dom.spacing();
        out.push_back(e);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Amplitude scans.

struct ScanRow {
    double C = 0.0;
    double mu = 0.0;
    double max_lambda = 0.0;
    double min_separation = 0.0; ///< k = 1: distance of the bump from the origin
    double shape = 0.0;          ///< largest per-bump shape distance
    double decay_rate = 0.0;
    bool converged = false;
    BumpLayout layout;
};

struct TrendStat {
    int violations = 0; ///< steps against the expected direction
    int major = 0;      ///< of those, steps larger than 5% in relative terms
    bool pass = false;  ///< no major step and at most one minor one
};

struct ScanReport {
    std::vector<ScanRow> rows;
    TrendStat lambda_trend;     ///< max|lambda| non-increasing as C decreases
    TrendStat separation_trend; ///< min separation non-decreasing as C decreases
};

/// Trend over a sequence ordered by decreasing C. `decreasing` selects the
/// expected direction of the values.
inline TrendStat trend(std::span<const double> values, bool decreasing) {
    TrendStat t;
    for (std::size_t i = 1; i < values.size(); ++i) {
        const double prev = values[i - 1], cur = values[i];
        const bool against = decreasing ? cur > prev : cur < prev;
        if (!against) continue;
        ++t.violations;
        const double rel = std::abs(cur - prev) / std::max(std::abs(prev), 1e-300);
        if (rel > 0.05) ++t.major;
    }
    t.pass = t.major == 0 && t.violations <= 1;
    return t;
}

struct ScanSetup {
    CoefficientPair family; ///< b amplitude is overwritten by each C
    Domain domain;
    double p = 3.0, q = 2.0;
    int k = 2;
    OuterOptions outer;
};

inline ScanReport b_scan(const ScanSetup& setup, std::span<const double> amplitudes, const LimitPack& pack) {
    if (amplitudes.size() < 4) throw ConfigError("b_scan: need at least four amplitudes");
    for (std::size_t i = 1; i < amplitudes.size(); ++i)
        if (!(amplitudes[i] < amplitudes[i - 1])) throw ConfigError("b_scan: amplitudes must be strictly descending");
    for (double c : amplitudes)
        if (!(c > 0.0)) throw ConfigError("b_scan: amplitudes must be positive");
    ScanReport rep;
    std::vector<double> lam, sep;
    for (double c : amplitudes) {
        CoefficientPair pair = setup.family;
        pair.b.amplitude = c;
        const auto pb = make_problem(pair, setup.domain, setup.p, setup.q);
        const auto th = make_thresholds(pair, pack, setup.p, setup.q);
        if (!(pair.b_sup() < th.B1)) throw ConfigError("b_scan: amplitude not below B1");
        ScanRow row;
        row.C = c;
        try {
            auto out = outer_maximize(setup.k, pb, pair, th, pack, setup.outer);
            row.mu = out.mu;
            row.max_lambda = out.best.max_multiplier();
            row.min_separation = out.layout.size() > 1 ? out.layout.min_separation() : norm(out.layout.centers[0]);
            double r = std::numeric_limits<double>::infinity();
            for (const auto& x : out.layout.centers) r = std::min(r, setup.domain.inner_margin(x));
            for (const auto& e : shape_distance(out.best.u, out.layout, pack, std::min(r, out.layout.radius), th))
                row.shape = std::max(row.shape, e.distance);
            row.decay_rate = decay_check(out.best, out.layout, th, pair.a0).rate;
            row.converged = out.best.converged;
            row.layout = out.layout;
        } catch (const Error&) {
            row.converged = false;
        }
        rep.rows.push_back(row);
        if (row.converged) {
            lam.push_back(row.max_lambda);
            sep.push_back(row.min_separation);
        }
    }
    rep.lambda_trend = trend(lam, true);
    rep.separation_trend = trend(sep, false);
    return rep;
}

// ---------------------------------------------------------------------------
// Nehari projection t_u.

struct NehariResult {
    double t = 1.0;
    int sign_changes = 0;
    bool certified = false;
};

/// The unique t > 0 with d/dt I(t u) = 0. For b = 0 this is
/// (||u||^2 / |u|_{p+1}^{p+1})^{1/(p-1)}; otherwise the positive root of
/// A + q B t^{q-1} - C t^{p-1} (A = ||u||^2, B = int b |u|^{q+1}/(q+1) * (q+1)/q).
inline NehariResult nehari_project(const Problem& pb, std::span<const double> u) {
    const auto e = action_I(pb, u);
    const double A = e.kinetic + e.potential;
    const double B = e.competing * (pb.q + 1.0); // int b |u|^{q+1}
    const double C = e.focusing * (pb.p + 1.0);  // int |u|^{p+1}
    if (!(C > 0.0)) throw EmptyBump("nehari_project: field is identically zero");
    auto phi = [&](double t) { return A + B * power(t, pb.q - 1.0) - C * power(t, pb.p - 1.0); };
    NehariResult r;
    if (B == 0.0) {
        r.t = std::pow(A / C, 1.0 / (pb.p - 1.0));
        r.sign_changes = 1;
        r.certified = true;
        return r;
    }
    double lo = 0.0, hi = std::pow(A / C, 1.0 / (pb.p - 1.0));
    int grow = 0;
    while (phi(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++grow > 200) throw SolverError("nehari_project: no bracket");
    }
    const double top = hi;
    for (int it = 0; it < 300 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (phi(mid) > 0.0 ? lo : hi) = mid;
    }
    r.t = 0.5 * (lo + hi);
    double prev = phi(top / 64.0);
    r.sign_changes = prev > 0.0 ? 0 : 1;
    for (int k = 2; k <= 64; ++k) {
        const double cur = phi(top * k / 64.0);
        if ((prev > 0.0) != (cur > 0.0)) ++r.sign_changes;
        prev = cur;
    }
    r.certified = r.sign_changes == 1;
    return r;
}

inline NehariResult nehari_project(const GridField& u, const GridField& a, const GridField& b, double p, double q) {
    return nehari_project(Problem{a, b, p, q}, u.values());
}

// ---------------------------------------------------------------------------
// Ground-state probes.

struct NehariDescent {
    GridField u{Domain(1, 1.0, 33)};
    double energy = 0.0;
    Point center{0.0, 0.0};
    int iterations = 0;
    bool converged = false;
};

namespace detail {

/// u^{p+1}-weighted centroid.
inline Point mass_center(const Domain& dom, std::span<const double> u, double p) {
    double den = 0.0;
    Point num{0.0, 0.0};
    den = pairwise_sum(u.size(), [&](std::size_t i) { return power(u[i], p + 1.0); });
    for (int ax = 0; ax < dom.dim(); ++ax)
        num[std::size_t(ax)] = pairwise_sum(u.size(), [&](std::size_t i) {
            return power(u[i], p + 1.0) * dom.point(i)[std::size_t(ax)];
        });
    return (1.0 / den) * num;
}

inline std::vector<double> scaled(std::span<const double> u, double t) {
    std::vector<double> v(u.begin(), u.end());
    for (double& x : v) x *= t;
    return v;
}

} // namespace detail

/// Minimizes u -> I(t_u u) over u >= 0: preconditioned quasi-Newton steps
/// followed by the Nehari projection, Armijo on the projected energy.
inline NehariDescent nehari_descent(const Problem& pb, const GridField& init, int budget, double tol = 1e-7) {
    const Domain& dom = pb.domain();
    const std::size_t n = dom.size();
    const double a_ref = pb.a.max();
    ShiftedPoisson poisson(dom, a_ref);
    std::vector<double> u(init.values().begin(), init.values().end());
    for (std::size_t i = 0; i < n; ++i) u[i] = dom.on_boundary(i) ? 0.0 : std::max(0.0, u[i]);
    u = detail::scaled(u, nehari_project(pb, u).t);
    double energy = action_I(pb, u).total;
    std::vector<double> grad(n);
    grad_I(pb, u, grad);
    std::deque<std::pair<std::vector<double>, std::vector<double>>> pairs;
    NehariDescent out;
    auto norm_p = [&](std::span<const double> v) {
        std::vector<double> lap(n);
        laplacian(dom, v, lap);
        return pairwise_sum(n, [&](std::size_t i) { return v[i] * (a_ref * v[i] - lap[i]); });
    };
    double last_decrease = std::numeric_limits<double>::infinity();
    for (int it = 0; it < budget; ++it) {
        std::vector<char> free(n, 0);
        for (std::size_t i = 0; i < n; ++i) free[i] = !dom.on_boundary(i) && !(u[i] <= 0.0 && grad[i] > 0.0);
        detail::TangentMetric metric(poisson, free, {});
        std::vector<double> g = grad;
        metric.mask(g);
        const auto qg = metric.apply(g);
        const double gqg = std::max(0.0, detail::dot(g, qg));
        if (std::sqrt(gqg / norm_p(u)) <= tol && last_decrease <= 1e-12) {
            out.converged = true;
            break;
        }
        std::vector<double> q = g;
        std::vector<double> alphas(pairs.size());
        for (std::size_t k = pairs.size(); k-- > 0;) {
            const auto& [s, y] = pairs[k];
            alphas[k] = detail::dot(s, q) / detail::dot(y, s);
            for (std::size_t i = 0; i < n; ++i) q[i] -= alphas[k] * y[i];
        }
        double gamma = 1.0;
        if (!pairs.empty()) {
            const auto& [s, y] = pairs.back();
            const double yqy = detail::dot(y, metric.apply(y));
            if (yqy > 0.0) gamma = detail::dot(s, y) / yqy;
        }
        auto r = metric.apply(q);
        for (double& x : r) x *= gamma;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const auto& [s, y] = pairs[k];
            const double beta = detail::dot(y, r) / detail::dot(y, s);
            for (std::size_t i = 0; i < n; ++i) r[i] += (alphas[k] - beta) * s[i];
        }
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = free[i] ? -r[i] : 0.0;
        if (!(detail::dot(g, d) < 0.0)) {
            pairs.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -qg[i];
        }
        bool accepted = false;
        std::vector<double> trial;
        double trial_energy = 0.0;
        double alpha = 1.0;
        for (int ls = 0; ls < 40 && !accepted; ++ls, alpha *= 0.5) {
            std::vector<double> raw(u);
            double predicted = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (free[i]) raw[i] = std::max(0.0, u[i] + alpha * d[i]);
                predicted += grad[i] * (raw[i] - u[i]);
            }
            predicted *= dom.cell_volume();
            try {
                trial = detail::scaled(raw, nehari_project(pb, raw).t);
            } catch (const Error&) {
                continue;
            }
            trial_energy = action_I(pb, trial).total;
            accepted = trial_energy <= energy + 1e-4 * std::min(predicted, 0.0) && trial_energy <= energy;
        }
        ++out.iterations;
        if (!accepted) {
            if (!pairs.empty()) {
                pairs.clear();
                continue;
            }
            break;
        }
        std::vector<double> new_grad(n);
        grad_I(pb, trial, new_grad);
        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = free[i] ? trial[i] - u[i] : 0.0;
            y[i] = free[i] ? new_grad[i] - grad[i] : 0.0;
        }
        const double sy = detail::dot(s, y);
        if (sy > 1e-12 * std::sqrt(detail::dot(s, s) * detail::dot(y, y))) {
            pairs.emplace_back(std::move(s), std::move(y));
            if (pairs.size() > 8) pairs.pop_front();
        }
        last_decrease = (energy - trial_energy) / std::abs(trial_energy);
        u = std::move(trial);
        grad = std::move(new_grad);
        energy = trial_energy;
    }
    out.energy = energy;
    out.center = detail::mass_center(dom, u, pb.p);
    out.u = GridField(dom, std::move(u));
    return out;
}

enum class Verdict { exists, escape, indeterminate };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::exists:
        return "exists";
    case Verdict::escape:
        return "escape";
    case Verdict::indeterminate:
        return "indeterminate";
    }
    return "indeterminate";
}

struct ProbeLevel {
    double half_width = 0.0;
    double m_candidate = 0.0; ///< lowest Nehari energy over the starts
    double reference = 0.0;   ///< projected w at the search margin
    double margin = 0.0;      ///< reference - m_candidate
    Point center{0.0, 0.0};   ///< of the lowest-energy minimizer
    double spread = 0.0;      ///< max - min energy over the starts
    std::vector<double> start_energy;
    std::vector<Point> start_center;
};

struct GroundStateVerdict {
    Verdict verdict = Verdict::indeterminate;
    std::vector<ProbeLevel> levels;
    double drift = 0.0;       ///< change of |center| per unit change of L, first to last box
    double center_shift = 0.0; ///< |center(last) - center(first)|
    bool escape = false;
    bool flat = false;
};

struct ProbeOptions {
    double spacing = 0.25;    ///< grid spacing used for every box
    int budget = 4000;        ///< descent iterations per start
    double tolerance = 1e-3;  ///< relative margin needed for "exists"
    double stable_shift = 1.0; ///< allowed center motion across boxes, in decay lengths
    double escape_ratio = 0.5; ///< |center| growth per unit L that counts as escape
    double flat_tol = 1e-5;    ///< relative energy spread over starts below which the landscape is flat
    double p = 3.0, q = 2.0;
    bool require_decisive = false;
};

/// Nehari minimization on growing boxes from centered, off-center and
/// near-margin starts.
inline GroundStateVerdict ground_state_probe(const CoefficientPair& pair, int dim, std::span<const double> half_widths,
                                             const ProbeOptions& opts = {}) {
    if (half_widths.size() < 2) throw ConfigError("ground_state_probe: need at least two box sizes");
    GroundStateVerdict out;
    const double ell = 1.0 / std::sqrt(pair.a0);
    const Point dir = pair.cone.zeta();
    for (double L : half_widths) {
        int m = int(std::lround(2.0 * L / opts.spacing)) + 1;
        if (m % 2 == 0) ++m;
        const Domain dom(dim, L, m);
        const auto pb = make_problem(pair, dom, opts.p, opts.q);
        const auto pack = solve_ground_state(pair.a_inf, opts.p, dom);
        const double delta = choose_delta(pair.a0, opts.p, opts.q, pair.eta);
        const double R = choose_R(pack, delta);
        const double W = L - R - 4.0 * ell;
        if (!(W > 0.0)) throw ConfigError("ground_state_probe: box too small");
        ProbeLevel lvl;
        lvl.half_width = L;
        const Point far = detail::snap(dom, W * (dim == 2 ? dir : Point{1.0, 0.0}));
        {
            auto w = pack.translated(far, dom);
            const double t = nehari_project(pb, w.values()).t;
            lvl.reference = action_I(pb, detail::scaled(w.values(), t)).total;
        }
        const std::vector<Point> starts = {Point{0.0, 0.0}, detail::snap(dom, 0.5 * far), far};
        double best = std::numeric_limits<double>::infinity();
        double worst = -best;
        for (const auto& s : starts) {
            const auto res = nehari_descent(pb, pack.translated(s, dom), opts.budget);
            lvl.start_energy.push_back(res.energy);
            lvl.start_center.push_back(res.center);
            worst = std::max(worst, res.energy);
            if (res.energy < best) {
                best = res.energy;
                lvl.center = res.center;
            }
        }
        lvl.m_candidate = best;
        lvl.margin = lvl.reference - best;
        lvl.spread = worst - best;
        out.levels.push_back(lvl);
    }
    const auto& first = out.levels.front();
    const auto& last = out.levels.back();
    out.center_shift = distance(last.center, first.center);
    out.drift = (norm(last.center) - norm(first.center)) / (last.half_width - first.half_width);
    out.flat = true;
    for (const auto& l : out.levels) out.flat = out.flat && l.spread <= opts.flat_tol * std::abs(l.m_candidate);
    out.escape = !out.flat && out.drift >= opts.escape_ratio;
    bool below = true;
    for (const auto& l : out.levels) below = below && l.margin > opts.tolerance * std::abs(l.reference);
    if (out.flat)
        out.verdict = Verdict::indeterminate;
    else if (out.escape)
        out.verdict = Verdict::escape;
    else if (below && out.center_shift <= opts.stable_shift * ell)
        out.verdict = Verdict::exists;
    else
        out.verdict = Verdict::indeterminate;
    if (opts.require_decisive && out.verdict == Verdict::indeterminate)
        throw IndeterminateVerdict("ground_state_probe: neither a stable minimizer nor escape was observed");
    return out;
}

} // namespace bumpforge
