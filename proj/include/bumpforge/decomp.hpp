#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "bumpforge/energy.hpp"
#include "bumpforge/field.hpp"
#include "bumpforge/limit.hpp"

namespace bumpforge {

/// delta, R, B1 and eta_s. Gates every constrained operation.
struct ThresholdSet {
    double delta = 0.25;
    double R = 1.0;
    double B1 = 0.0;
    double eta_s = 0.0;
};

namespace detail {

/// The four smallness conditions on delta, each with the delta-dependent side
/// inflated by `slack`.
inline bool delta_conditions_hold(double delta, double a0, double p, double eta, double slack) {
    const double dp1 = std::pow(delta, p - 1.0);
    return delta > 0.0 && delta < 1.0 &&                      //
           a0 >= slack * p * dp1 &&                           // (i)
           0.5 * a0 >= slack * dp1 / (p + 1.0) &&             // (ii)
           a0 - eta * eta >= slack * dp1 &&                   // (iii)
           a0 * delta >= slack * std::pow(2.0, p - 1.0) * delta * dp1; // (iv)
}

} // namespace detail

/// Largest delta = 2^-m (m >= 2) meeting the four conditions with 10% slack.
inline double choose_delta(double a0, double p, double q, double eta) {
    if (!(a0 > 0.0)) throw ConfigError("choose_delta: a0 must be positive");
    if (!(eta >= 0.0) || !(eta < std::sqrt(a0))) throw ConfigError("choose_delta: eta must lie in [0, sqrt(a0))");
    if (!(q > 1.0) || !(p > q)) throw ConfigError("choose_delta: exponents must satisfy 1 < q < p");
    for (int m = 2; m < 200; ++m) {
        const double delta = std::ldexp(1.0, -m);
        if (detail::delta_conditions_hold(delta, a0, p, eta, 1.1)) return delta;
    }
    throw ConfigError("choose_delta: no admissible dyadic delta");
}

/// R = 2 r_delta, r_delta the first radius where w drops below delta, rounded
/// up to a multiple of the grid spacing.
inline double choose_R(const LimitPack& pack, double delta) {
    const auto& prof = pack.profile;
    if (!(delta > 0.0) || !(delta < prof.w.front())) throw ConfigError("choose_R: delta must lie in (0, w(0))");
    std::size_t j = 0;
    while (j < prof.w.size() && prof.w[j] >= delta) ++j;
    if (j == prof.w.size()) throw ConfigError("choose_R: profile never drops below delta");
    // linear interpolation of the crossing between nodes j-1 and j
    const double w0 = prof.w[j - 1], w1 = prof.w[j];
    const double r = prof.radius(j - 1) + prof.step * (w0 - delta) / (w0 - w1);
    const double h = pack.domain.spacing();
    return h * std::ceil(2.0 * r / h - 1e-9);
}

/// B1 = p(p-1) delta^{p-q} / (q(q-1)): for |b| < B1,
/// q(q-1) b (delta+s)^{q-2} < p(p-1) (delta+s)^{p-2} for every s >= 0.
inline double b1_threshold(double delta, double p, double q) {
    if (!(q > 1.0)) throw ConfigError("b1_threshold: q must exceed 1");
    if (!(p > q)) throw ConfigError("b1_threshold: p must exceed q");
    return p * (p - 1.0) * std::pow(delta, p - q) / (q * (q - 1.0));
}

/// Midpoint of (eta, sqrt(a0 - delta^{p-1})).
inline double default_eta_s(double a0, double eta, double delta, double p) {
    return 0.5 * (eta + std::sqrt(a0 - std::pow(delta, p - 1.0)));
}

inline ThresholdSet make_thresholds(const CoefficientPair& pair, const LimitPack& pack, double p, double q) {
    ThresholdSet t;
    t.delta = choose_delta(pair.a0, p, q, pair.eta);
    t.R = choose_R(pack, t.delta);
    t.B1 = b1_threshold(t.delta, p, q);
    t.eta_s = default_eta_s(pair.a0, pair.eta, t.delta, p);
    return t;
}

/// True when all four smallness conditions hold (no slack) for a0, eta.
inline bool thresholds_admissible(const ThresholdSet& t, double a0, double p, double eta) {
    return detail::delta_conditions_hold(t.delta, a0, p, eta, 1.0) && t.R > 0.0 && t.B1 > 0.0 && t.eta_s > eta &&
           t.eta_s < std::sqrt(a0 - std::pow(t.delta, p - 1.0));
}

// ---------------------------------------------------------------------------
// Submerged / emerging split.

struct DeltaSplit {
    GridField low;  ///< min(u, delta)
    GridField high; ///< max(0, u - delta)
};

inline DeltaSplit split(const GridField& u, double delta) {
    std::vector<double> lo(u.size()), hi(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] < 0.0) throw DomainError("split: field takes a negative value");
        lo[i] = std::min(u[i], delta);
        if (!(u[i] > delta)) continue;
        // nudge so that low + high reproduces u bit for bit
        double x = u[i] - delta;
        for (int k = 0; k < 8 && delta + x != u[i]; ++k)
            x = std::nextafter(x, delta + x < u[i] ? std::numeric_limits<double>::infinity() : 0.0);
        hi[i] = x;
    }
    return {GridField(u.domain(), std::move(lo)), GridField(u.domain(), std::move(hi))};
}

/// Bump centers; membership in K_k needs pairwise distances >= 2R.
struct BumpLayout {
    std::vector<Point> centers;
    double radius = 1.0;

    std::size_t size() const { return centers.size(); }

    double min_separation() const {
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < centers.size(); ++i)
            for (std::size_t j = i + 1; j < centers.size(); ++j) d = std::min(d, distance(centers[i], centers[j]));
        return d;
    }

    /// Separated, and every ball at least `margin` inside the box.
    bool admissible(const Domain& dom, double margin) const {
        if (centers.empty()) return false;
        if (centers.size() > 1 && min_separation() < 2.0 * radius * (1.0 - 1e-12)) return false;
        for (const auto& c : centers) {
            if (dom.dim() == 1 && c[1] != 0.0) return false;
            if (dom.inner_margin(c) < radius + margin) return false;
        }
        return true;
    }
};

inline void validate_layout(const BumpLayout& layout, const Domain& dom, double margin) {
    if (!layout.admissible(dom, margin)) {
        std::ostringstream os;
        os << "bump layout violates separation >= 2R or the box margin (R=" << layout.radius << ", margin=" << margin
           << ")";
        throw ConfigError(os.str());
    }
}

struct EmergingSet {
    std::vector<GridField> parts;
};

namespace detail {

/// Connected components of {f > 0} under the stencil's nearest-neighbour
/// connectivity, in order of their smallest node index.
inline std::vector<std::vector<std::size_t>> support_components(const Domain& dom, std::span<const double> f) {
    std::vector<int> label(f.size(), -1);
    std::vector<std::vector<std::size_t>> comps;
    std::vector<std::size_t> stack;
    const int m = dom.nodes();
    for (std::size_t s = 0; s < f.size(); ++s) {
        if (!(f[s] > 0.0) || label[s] >= 0) continue;
        const int id = int(comps.size());
        comps.emplace_back();
        stack.push_back(s);
        label[s] = id;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            comps[std::size_t(id)].push_back(i);
            for (int ax = 0; ax < dom.dim(); ++ax) {
                const int k = dom.axis_index(i, ax);
                const std::size_t st = dom.stride(ax);
                if (k > 0 && f[i - st] > 0.0 && label[i - st] < 0) {
                    label[i - st] = id;
                    stack.push_back(i - st);
                }
                if (k < m - 1 && f[i + st] > 0.0 && label[i + st] < 0) {
                    label[i + st] = id;
                    stack.push_back(i + st);
                }
            }
        }
        std::sort(comps.back().begin(), comps.back().end());
    }
    return comps;
}

/// Splits `high` into one part per center. Throws EmergingOutsideBalls when
/// more than `tol` of mass lies outside the assigned balls and EmptyBump when
/// a center receives nothing.
inline std::vector<std::vector<double>> emerging_parts(const Domain& dom, std::span<const double> high,
                                                        const BumpLayout& layout, double tol) {
    const std::size_t k = layout.size();
    std::vector<std::vector<double>> parts(k, std::vector<double>(high.size(), 0.0));
    double outside = 0.0;
    for (const auto& comp : support_components(dom, high)) {
        // nearest ball to the component's mass centroid; ties to the lowest index
        double mass = 0.0;
        Point c{0.0, 0.0};
        for (std::size_t i : comp) {
            const Point x = dom.point(i);
            mass += high[i];
            c = c + high[i] * x;
        }
        c = (1.0 / mass) * c;
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j)
            if (distance(c, layout.centers[j]) < distance(c, layout.centers[best])) best = j;
        for (std::size_t i : comp) {
            parts[best][i] = high[i];
            if (distance(dom.point(i), layout.centers[best]) >= layout.radius) outside += dom.weight(i) * high[i];
        }
    }
    if (outside > tol) {
        std::ostringstream os;
        os << "emerging mass " << outside << " lies outside the balls B_R(x_i)";
        throw EmergingOutsideBalls(os.str());
    }
    for (std::size_t j = 0; j < k; ++j)
        if (std::none_of(parts[j].begin(), parts[j].end(), [](double v) { return v > 0.0; }))
            throw EmptyBump("no emerging part around center " + std::to_string(j));
    return parts;
}

inline Point barycenter(const Domain& dom, std::span<const double> part, const Point& center) {
    double den = 0.0;
    Point num{0.0, 0.0};
    // supports are small; the fixed index order keeps the sums deterministic
    den = pairwise_sum(part.size(), [&](std::size_t i) { return part[i] > 0.0 ? dom.weight(i) * part[i] * part[i] : 0.0; });
    for (int ax = 0; ax < dom.dim(); ++ax)
        num[std::size_t(ax)] = pairwise_sum(part.size(), [&](std::size_t i) {
            return part[i] > 0.0 ? dom.weight(i) * part[i] * part[i] * (dom.point(i)[std::size_t(ax)] - center[std::size_t(ax)])
                                 : 0.0;
        });
    if (!(den > 0.0)) throw EmptyBump("barycenter of an identically zero part");
    return (1.0 / den) * num;
}

} // namespace detail

inline EmergingSet emerging_parts(const GridField& high, const BumpLayout& layout, double tol) {
    EmergingSet out;
    for (auto& v : detail::emerging_parts(high.domain(), high.values(), layout, tol))
        out.parts.emplace_back(high.domain(), std::move(v));
    return out;
}

/// int part^2 (x - center) / int part^2.
inline Point barycenter(const GridField& part, const Point& center) {
    return detail::barycenter(part.domain(), part.values(), center);
}

// ---------------------------------------------------------------------------
// Line-search maximizer theta along t -> I(s + t v).

/// g'(t) = t (K(v) + int a v^2) + delta int a v + Gamma
///         + int_S b (delta+tv)^q v - int_S (delta+tv)^p v
/// where Gamma is the grid interface coupling with the submerged field.
struct Fiber {
    double quadratic = 0.0; ///< K(v) + int a v^2
    double linear = 0.0;    ///< delta int a v + Gamma
    double delta = 0.0;
    double p = 3.0, q = 2.0;
    std::vector<double> wv; ///< weight * v on supp v
    std::vector<double> v;
    std::vector<double> b;

    double dg(double t) const {
        double s = pairwise_sum(v.size(), [&](std::size_t i) {
            const double x = delta + t * v[i];
            return wv[i] * ((b[i] == 0.0 ? 0.0 : b[i] * power(x, q)) - power(x, p));
        });
        return t * quadratic + linear + s;
    }

    double d2g(double t) const {
        double s = pairwise_sum(v.size(), [&](std::size_t i) {
            const double x = delta + t * v[i];
            return wv[i] * v[i] * ((b[i] == 0.0 ? 0.0 : q * b[i] * power(x, q - 1.0)) - p * power(x, p - 1.0));
        });
        return quadratic + s;
    }

    double d3g(double t) const {
        return pairwise_sum(v.size(), [&](std::size_t i) {
            const double x = delta + t * v[i];
            const double v2 = v[i] * v[i];
            return wv[i] * v2 *
                   ((b[i] == 0.0 ? 0.0 : q * (q - 1.0) * b[i] * power(x, q - 2.0)) - p * (p - 1.0) * power(x, p - 2.0));
        });
    }
};

/// Fiber of the part v resting on the submerged field s (s = delta on supp v).
inline Fiber make_fiber(const Problem& pb, std::span<const double> v, std::span<const double> submerged,
                        double delta) {
    const Domain& dom = pb.domain();
    const auto a = pb.a.values();
    const auto b = pb.b.values();
    Fiber f;
    f.delta = delta;
    f.p = pb.p;
    f.q = pb.q;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0)) continue;
        f.wv.push_back(dom.weight(i) * v[i]);
        f.v.push_back(v[i]);
        f.b.push_back(b[i]);
    }
    if (f.v.empty()) throw EmptyBump("theta: emerging part is identically zero");
    const double pot = pairwise_sum(v.size(), [&](std::size_t i) { return v[i] > 0.0 ? dom.weight(i) * a[i] * v[i] * v[i] : 0.0; });
    const double lin = pairwise_sum(v.size(), [&](std::size_t i) { return v[i] > 0.0 ? dom.weight(i) * a[i] * v[i] : 0.0; });
    f.quadratic = gradient_energy(dom, v) + pot;
    f.linear = delta * lin + interface_coupling(dom, v, submerged, delta);
    return f;
}

struct ThetaResult {
    double t = 1.0;
    double curvature = 0.0; ///< g''(t) (negative at a certified maximum)
    int sign_changes = 0;   ///< of g' over 64 samples of the bracket
    bool certified = false;
};

/// Unique positive root of the concave g': doubling bracket, then Newton
/// safeguarded by bisection.
inline ThetaResult solve_theta(const Fiber& f) {
    if (!(f.dg(0.0) > 0.0)) throw SolverError("theta: g'(0) is not positive");
    double lo = 0.0, hi = 1.0;
    int grow = 0;
    while (f.dg(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++grow > 200) throw SolverError("theta: no bracket for the maximizer");
    }
    const double bracket_hi = hi;
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double g1 = f.dg(t);
        if (g1 > 0.0)
            lo = t;
        else
            hi = t;
        const double g2 = f.d2g(t);
        double next = g2 < 0.0 ? t - g1 / g2 : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - t) <= 1e-15 * std::max(1.0, t) || hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) {
            t = next;
            break;
        }
        t = next;
    }
    ThetaResult r;
    r.t = t;
    r.curvature = f.d2g(t);
    double prev = f.dg(0.0);
    for (int k = 1; k <= 64; ++k) {
        const double cur = f.dg(bracket_hi * k / 64.0);
        if ((prev > 0.0) != (cur > 0.0)) ++r.sign_changes;
        prev = cur;
    }
    r.certified = r.curvature < 0.0 && r.sign_changes == 1;
    return r;
}

inline void require_small_b(const Problem& pb, const ThresholdSet& th) {
    if (!(pb.b_sup() < th.B1)) {
        std::ostringstream os;
        os << "|b|_inf = " << pb.b_sup() << " is not below B1 = " << th.B1;
        throw ThresholdViolated(os.str());
    }
}

/// Which emerging part a theta projection acts on.
inline constexpr int kAllBumps = -1;

/// theta(u) for bump = kAllBumps (the whole emerging part) or theta_j(u).
inline ThetaResult theta_project(const GridField& u, const BumpLayout& layout, int bump, const Problem& pb,
                                 const ThresholdSet& th) {
    require_small_b(pb, th);
    const auto sp = split(u, th.delta);
    if (bump == kAllBumps) {
        if (!(sp.high.max() > 0.0)) throw EmptyBump("theta: no emerging part");
        return solve_theta(make_fiber(pb, sp.high.values(), sp.low.values(), th.delta));
    }
    if (bump < 0 || std::size_t(bump) >= layout.size()) throw ConfigError("theta: bump index out of range");
    const auto parts = detail::emerging_parts(u.domain(), sp.high.values(), layout, 0.0);
    return solve_theta(make_fiber(pb, parts[std::size_t(bump)], sp.low.values(), th.delta));
}

// ---------------------------------------------------------------------------
// Recentring and projection onto S_{x_1..x_k}.

namespace detail {

/// Moves `part` so its barycenter about `center` vanishes: a whole-cell shift
/// for the bulk of the offset, then an exponential tilt v e^{c.(x - center)}
/// whose c is the unique minimizer of the convex log sum v^2 e^{2c.y}.
inline void recenter(const Domain& dom, std::vector<double>& part, const Point& center, double radius) {
    const double h = dom.spacing();
    Point beta = barycenter(dom, part, center);
    int shift[2] = {0, 0};
    for (int ax = 0; ax < dom.dim(); ++ax) shift[ax] = -int(std::lround(beta[std::size_t(ax)] / h));
    if (shift[0] != 0 || shift[1] != 0) {
        std::vector<double> moved(part.size(), 0.0);
        const int m = dom.nodes();
        for (std::size_t i = 0; i < part.size(); ++i) {
            if (!(part[i] > 0.0)) continue;
            const int ix = dom.axis_index(i, 0) + shift[0];
            const int iy = dom.dim() == 2 ? dom.axis_index(i, 1) + shift[1] : 0;
            if (ix <= 0 || ix >= m - 1 || (dom.dim() == 2 && (iy <= 0 || iy >= m - 1)))
                throw EmergingOutsideBalls("recentring moves an emerging part off the grid");
            moved[dom.index(ix, iy)] = part[i];
        }
        part.swap(moved);
    }
    std::vector<std::size_t> sup;
    for (std::size_t i = 0; i < part.size(); ++i)
        if (part[i] > 0.0) {
            sup.push_back(i);
            if (distance(dom.point(i), center) >= radius)
                throw EmergingOutsideBalls("recentring pushes an emerging part outside B_R");
        }
    const int n = dom.dim();
    double c[2] = {0.0, 0.0};
    auto moments = [&](const double* cc, double& z, double g[2], double hess[2][2]) {
        z = 0.0;
        g[0] = g[1] = 0.0;
        hess[0][0] = hess[0][1] = hess[1][0] = hess[1][1] = 0.0;
        for (std::size_t i : sup) {
            const Point y = dom.point(i) - center;
            const double e = part[i] * part[i] * std::exp(2.0 * (cc[0] * y[0] + cc[1] * y[1]));
            z += e;
            for (int a = 0; a < n; ++a) {
                g[a] += e * y[std::size_t(a)];
                for (int b = 0; b < n; ++b) hess[a][b] += e * y[std::size_t(a)] * y[std::size_t(b)];
            }
        }
        for (int a = 0; a < n; ++a) g[a] /= z;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) hess[a][b] = hess[a][b] / z - g[a] * g[b];
    };
    for (int it = 0; it < 100; ++it) {
        double z, g[2], hs[2][2];
        moments(c, z, g, hs);
        const double gn = std::hypot(g[0], g[1]);
        if (gn <= 1e-13 * radius) break;
        // Newton on the convex log-partition (gradient = mean, Hessian = covariance)
        double step[2];
        if (n == 1) {
            if (!(hs[0][0] > 0.0)) throw EmergingOutsideBalls("recentring: degenerate emerging part");
            step[0] = g[0] / hs[0][0] / 2.0;
            step[1] = 0.0;
        } else {
            const double det = hs[0][0] * hs[1][1] - hs[0][1] * hs[1][0];
            if (!(det > 0.0)) throw EmergingOutsideBalls("recentring: degenerate emerging part");
            step[0] = (hs[1][1] * g[0] - hs[0][1] * g[1]) / det / 2.0;
            step[1] = (-hs[1][0] * g[0] + hs[0][0] * g[1]) / det / 2.0;
        }
        // damp until the mean shrinks
        double scale = 1.0;
        for (int bt = 0; bt < 60; ++bt) {
            double trial[2] = {c[0] - scale * step[0], c[1] - scale * step[1]};
            double z2, g2[2], h2[2][2];
            moments(trial, z2, g2, h2);
            if (std::hypot(g2[0], g2[1]) < gn) {
                c[0] = trial[0];
                c[1] = trial[1];
                break;
            }
            scale *= 0.5;
            if (bt == 59) throw EmergingOutsideBalls("recentring: barycenter cannot be moved to the center");
        }
    }
    if (c[0] != 0.0 || c[1] != 0.0)
        for (std::size_t i : sup) {
            const Point y = dom.point(i) - center;
            part[i] *= std::exp(c[0] * y[0] + c[1] * y[1]);
        }
}

/// Nehari residual I'(u)[v] = sum grad_I(u) v h^N, relative to K(v) + int a v^2.
inline double relative_nehari(const Problem& pb, std::span<const double> grad, std::span<const double> v) {
    const Domain& dom = pb.domain();
    const auto a = pb.a.values();
    const double scale = gradient_energy(dom, v) +
                         pairwise_sum(v.size(), [&](std::size_t i) { return dom.weight(i) * a[i] * v[i] * v[i]; });
    return pairing(dom, grad, v) / scale;
}

} // namespace detail

/// Per-bump constraint residuals of a field emerging around a layout.
struct ConstraintResiduals {
    std::vector<double> nehari;     ///< I'(u)[u_i^delta] / (K(u_i^delta) + int a (u_i^delta)^2)
    std::vector<Point> barycenters; ///< beta_{x_i}(u)
    double radius = 1.0;

    /// Membership test for S_{x_1..x_k} within tau (barycenters relative to R).
    bool satisfied(double tau) const {
        for (double r : nehari)
            if (!(std::abs(r) <= tau)) return false;
        for (const auto& b : barycenters)
            if (!(norm(b) <= tau * radius)) return false;
        return true;
    }

    double max_nehari() const {
        double m = 0.0;
        for (double r : nehari) m = std::max(m, std::abs(r));
        return m;
    }
    double max_barycenter() const {
        double m = 0.0;
        for (const auto& b : barycenters) m = std::max(m, norm(b));
        return m;
    }
};

inline ConstraintResiduals constraint_residuals(const GridField& u, const BumpLayout& layout, const Problem& pb,
                                                const ThresholdSet& th) {
    const Domain& dom = u.domain();
    const auto sp = split(u, th.delta);
    const auto parts = detail::emerging_parts(dom, sp.high.values(), layout, 0.0);
    std::vector<double> grad(u.size());
    grad_I(pb, u.values(), grad);
    ConstraintResiduals res;
    res.radius = layout.radius;
    for (std::size_t j = 0; j < parts.size(); ++j) {
        res.nehari.push_back(detail::relative_nehari(pb, grad, parts[j]));
        res.barycenters.push_back(detail::barycenter(dom, parts[j], layout.centers[j]));
    }
    return res;
}

struct Projection {
    GridField u;
    ConstraintResiduals residuals;
    std::vector<ThetaResult> thetas;
};

namespace detail {

/// Recentre every part, raise the submerged field to delta on the new
/// supports, then scale each part by its theta_i. Works in place.
inline std::vector<ThetaResult> project_in_place(const Problem& pb, const BumpLayout& layout, const ThresholdSet& th,
                                                 std::vector<double>& low, std::vector<std::vector<double>>& parts) {
    const Domain& dom = pb.domain();
    for (std::size_t j = 0; j < parts.size(); ++j) {
        recenter(dom, parts[j], layout.centers[j], layout.radius);
        for (std::size_t i = 0; i < low.size(); ++i)
            if (parts[j][i] > 0.0) low[i] = th.delta;
    }
    std::vector<ThetaResult> thetas;
    for (auto& part : parts) {
        const auto tr = solve_theta(make_fiber(pb, part, low, th.delta));
        for (double& x : part) x *= tr.t;
        thetas.push_back(tr);
    }
    return thetas;
}

} // namespace detail

/// Projection of u onto S_{x_1..x_k}: recentre each emerging part, then apply
/// theta_i to it.
inline Projection project_to_S(const GridField& u, const BumpLayout& layout, const Problem& pb,
                               const ThresholdSet& th) {
    require_small_b(pb, th);
    const Domain& dom = u.domain();
    const auto sp = split(u, th.delta);
    auto parts = detail::emerging_parts(dom, sp.high.values(), layout, 0.0);
    std::vector<double> low(sp.low.values().begin(), sp.low.values().end());
    auto thetas = detail::project_in_place(pb, layout, th, low, parts);
    std::vector<double> out = low;
    for (const auto& part : parts)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += part[i];
    GridField projected(dom, std::move(out));
    auto res = constraint_residuals(projected, layout, pb, th);
    return {std::move(projected), std::move(res), std::move(thetas)};
}

/// A member of S_{x_1..x_k} built from radial caps phi(|x - x_i|) with
/// max phi = 2 delta, phi supported in B_{R/2}: the non-emptiness witness.
inline Projection cap_member(const Domain& dom, const BumpLayout& layout, const Problem& pb, const ThresholdSet& th) {
    std::vector<double> u(dom.size(), 0.0);
    for (const auto& c : layout.centers)
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double r = distance(dom.point(i), c) / (0.5 * layout.radius);
            if (r < 1.0) u[i] += 2.0 * th.delta * std::cos(0.5 * std::numbers::pi * r) * std::cos(0.5 * std::numbers::pi * r);
        }
    return project_to_S(GridField(dom, std::move(u)), layout, pb, th);
}

} // namespace bumpforge
