#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "bumpforge/energy.hpp"
#include "bumpforge/field.hpp"

namespace bumpforge {

/// Radial samples of the ground state w of -Lap w + a_inf w = w^p.
struct RadialProfile {
    int dim = 1;
    double a_inf = 1.0;
    double p = 3.0;
    double step = 0.0;        ///< radial node spacing
    std::vector<double> w;    ///< w(j * step)
    std::vector<double> dw;   ///< w'(j * step)
    double matching_radius = 0.0; ///< shooting is used below, the linear tail above
    double sigma = 0.0;       ///< fitted exponential decay rate
    double kappa = 0.0;       ///< fitted algebraic power
    double prefactor = 0.0;   ///< fitted d0

    double radius(std::size_t j) const { return double(j) * step; }
    double max_radius() const { return radius(w.size() - 1); }

    /// Cubic Lagrange interpolation in r, with the even extension near 0.
    double value(double r) const {
        r = std::abs(r);
        if (r >= max_radius()) return 0.0;
        const double s = r / step;
        const long j = long(std::floor(s));
        const double t = s - double(j);
        auto at = [&](long k) {
            k = std::abs(k);
            return k < long(w.size()) ? w[std::size_t(k)] : 0.0;
        };
        const double f0 = at(j - 1), f1 = at(j), f2 = at(j + 1), f3 = at(j + 2);
        const double v = f0 * (-t * (t - 1) * (t - 2) / 6.0) + f1 * ((t + 1) * (t - 1) * (t - 2) / 2.0) +
                         f2 * (-(t + 1) * t * (t - 2) / 2.0) + f3 * ((t + 1) * t * (t - 1) / 6.0);
        return v < 1e-300 ? 0.0 : v;
    }
};

/// The limit ground state, its grid sampling and its energy.
struct LimitPack {
    RadialProfile profile;
    Domain domain;
    GridField w_grid;
    double m_inf = 0.0;
    double peak = 0.0;

    double a_inf() const { return profile.a_inf; }
    double p() const { return profile.p; }

    /// w(. - y) sampled on the pack's domain, zero on the boundary.
    GridField translated(const Point& y) const { return translated(y, domain); }

    GridField translated(const Point& y, const Domain& dom) const {
        std::vector<double> v(dom.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = dom.on_boundary(i) ? 0.0 : profile.value(distance(dom.point(i), y));
        return GridField(dom, std::move(v));
    }
};

namespace detail {

enum class ShotOutcome { too_low, too_high };

struct Shot {
    ShotOutcome outcome;
    std::vector<long double> w, dw; ///< trajectory up to the event
};

/// Integrates w'' = a w - w^p - (N-1)/r w' from w(0) = w0, w'(0) = 0 with
/// classical RK4 until w crosses 0 (too high), w turns upward (too low), or
/// r_end is reached, where the sign of the growing mode decides.
inline Shot shoot(int dim, long double a, long double p, long double w0, long double step, long double r_end,
                  bool keep) {
    auto rhs = [&](long double r, long double w, long double dw) {
        const long double nl = w > 0 ? std::pow(w, p) : -std::pow(-w, p);
        if (r == 0.0L) return (a * w - nl) / dim;
        return a * w - nl - (dim - 1) * dw / r;
    };
    Shot s;
    long double w = w0, dw = 0.0L, r = 0.0L;
    if (keep) {
        s.w.push_back(w);
        s.dw.push_back(dw);
    }
    const long n = long(std::ceil(r_end / step));
    for (long k = 0; k < n; ++k) {
        const long double k1w = dw, k1d = rhs(r, w, dw);
        const long double k2w = dw + 0.5L * step * k1d, k2d = rhs(r + 0.5L * step, w + 0.5L * step * k1w, k2w);
        const long double k3w = dw + 0.5L * step * k2d, k3d = rhs(r + 0.5L * step, w + 0.5L * step * k2w, k3w);
        const long double k4w = dw + step * k3d, k4d = rhs(r + step, w + step * k3w, k4w);
        w += step / 6.0L * (k1w + 2 * k2w + 2 * k3w + k4w);
        dw += step / 6.0L * (k1d + 2 * k2d + 2 * k3d + k4d);
        r = (k + 1) * step;
        if (keep) {
            s.w.push_back(w);
            s.dw.push_back(dw);
        }
        if (w < 0.0L) {
            s.outcome = ShotOutcome::too_high;
            return s;
        }
        if (dw > 0.0L) {
            s.outcome = ShotOutcome::too_low;
            return s;
        }
    }
    const long double growing = dw / w + std::sqrt(a) + (dim - 1) / (2.0L * r);
    s.outcome = growing > 0 ? ShotOutcome::too_low : ShotOutcome::too_high;
    return s;
}

/// Decaying solution of the linearized radial equation, up to a constant:
/// exp(-sqrt(a) r) for N = 1 and K_0(sqrt(a) r) for N = 2. Returns (T, T').
inline std::pair<double, double> linear_tail(int dim, double a, double r) {
    const double k = std::sqrt(a);
    if (dim == 1) {
        const double e = std::exp(-k * r);
        return {e, -k * e};
    }
    const double z = k * r;
    if (z > 700.0) return {0.0, 0.0};
    return {std::cyl_bessel_k(0.0, z), -k * std::cyl_bessel_k(1.0, z)};
}

inline double profile_energy(const RadialProfile& prof) {
    const double a = prof.a_inf, p = prof.p;
    const std::size_t n = prof.w.size();
    auto integrand = [&](std::size_t j) {
        const double r = prof.radius(j);
        const double w = prof.w[j], dw = prof.dw[j];
        const double density = 0.5 * (dw * dw + a * w * w) - std::pow(w, p + 1.0) / (p + 1.0);
        return prof.dim == 1 ? 2.0 * density : 2.0 * std::numbers::pi * r * density;
    };
    // composite Simpson over an even number of intervals, trapezoid for a leftover one
    const std::size_t intervals = n - 1;
    const std::size_t even = intervals - intervals % 2;
    double s = pairwise_sum(even / 2, [&](std::size_t k) {
        const std::size_t j = 2 * k;
        return integrand(j) + 4.0 * integrand(j + 1) + integrand(j + 2);
    });
    s *= prof.step / 3.0;
    if (even < intervals) s += 0.5 * prof.step * (integrand(n - 2) + integrand(n - 1));
    return s;
}

} // namespace detail

/// Fits log w(r) = log d0 - kappa log r - sigma r on the radial nodes in
/// [r_lo, r_hi]. Returns (sigma, kappa); throws FitError on fewer than 10 nodes.
inline std::pair<double, double> decay_fit(const RadialProfile& prof, double r_lo, double r_hi,
                                           double* prefactor = nullptr) {
    // normal equations in the basis (1, -log r, -r)
    double m[3][3] = {};
    double rhs[3] = {};
    int count = 0;
    for (std::size_t j = 1; j < prof.w.size(); ++j) {
        const double r = prof.radius(j);
        if (r < r_lo || r > r_hi || !(prof.w[j] > 1e-300)) continue;
        const double basis[3] = {1.0, -std::log(r), -r};
        const double y = std::log(prof.w[j]);
        for (int a = 0; a < 3; ++a) {
            rhs[a] += basis[a] * y;
            for (int b = 0; b < 3; ++b) m[a][b] += basis[a] * basis[b];
        }
        ++count;
    }
    if (count < 10) throw FitError("decay fit window holds fewer than 10 nodes");
    // Gaussian elimination with partial pivoting on the 3x3 system
    int perm[3] = {0, 1, 2};
    for (int c = 0; c < 3; ++c) {
        int piv = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(m[perm[r]][c]) > std::abs(m[perm[piv]][c])) piv = r;
        std::swap(perm[c], perm[piv]);
        const double d = m[perm[c]][c];
        if (std::abs(d) < 1e-300) throw FitError("decay fit is singular");
        for (int r = c + 1; r < 3; ++r) {
            const double f = m[perm[r]][c] / d;
            for (int k = c; k < 3; ++k) m[perm[r]][k] -= f * m[perm[c]][k];
            rhs[perm[r]] -= f * rhs[perm[c]];
        }
    }
    double x[3];
    for (int c = 2; c >= 0; --c) {
        double s = rhs[perm[c]];
        for (int k = c + 1; k < 3; ++k) s -= m[perm[c]][k] * x[k];
        x[c] = s / m[perm[c]][c];
    }
    if (prefactor) *prefactor = std::exp(x[0]);
    return {x[2], x[1]};
}

inline std::pair<double, double> decay_fit(const LimitPack& pack, double r_lo, double r_hi) {
    return decay_fit(pack.profile, r_lo, r_hi);
}

/// Default fit window [0.5 L, 0.8 L].
inline std::pair<double, double> decay_fit(const LimitPack& pack) {
    const double L = pack.domain.half_width();
    return decay_fit(pack.profile, 0.5 * L, 0.8 * L);
}

/// I_inf(w) by radial quadrature.
inline double m_infinity(const LimitPack& pack) { return detail::profile_energy(pack.profile); }

/// Radial shooting for the positive ground state on the domain's scale: step
/// h/4, outcome classified by r = 2L, bisection on w(0) carried to extended
/// precision (well below 1e-12). Beyond the radius where the two bracketing
/// shots separate, the profile continues as the decaying linear tail.
inline LimitPack solve_ground_state(double a_inf, double p, const Domain& dom) {
    if (!(a_inf > 0.0)) throw ConfigError("a_inf must be positive");
    if (!(p > 1.0)) throw ConfigError("p must exceed 1");
    const int dim = dom.dim();
    const long double a = a_inf, pl = p;
    const long double step = dom.spacing() / 4.0;
    const long double r_end = 2.0 * dom.half_width();

    // bracket: just above the constant equilibrium is too low
    long double lo = std::pow(a, 1.0L / (pl - 1.0L)) * (1.0L + 1e-6L);
    if (detail::shoot(dim, a, pl, lo, step, r_end, false).outcome != detail::ShotOutcome::too_low)
        throw SolverError("ground-state shooting: lower bracket is not an undershoot");
    long double hi = 2.0L * lo;
    int grow = 0;
    while (detail::shoot(dim, a, pl, hi, step, r_end, false).outcome != detail::ShotOutcome::too_high) {
        lo = hi;
        hi *= 2.0L;
        if (++grow > 60) throw SolverError("ground-state shooting: no overshooting height found");
    }
    for (int it = 0; it < 400; ++it) {
        const long double mid = 0.5L * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (detail::shoot(dim, a, pl, mid, step, r_end, false).outcome == detail::ShotOutcome::too_low)
            lo = mid;
        else
            hi = mid;
    }
    if (!(hi - lo <= 1e-12L * hi)) throw SolverError("ground-state bisection did not resolve w(0)");

    const auto sl = detail::shoot(dim, a, pl, lo, step, r_end, true);
    const auto sh = detail::shoot(dim, a, pl, hi, step, r_end, true);
    const std::size_t common = std::min(sl.w.size(), sh.w.size());

    RadialProfile prof;
    prof.dim = dim;
    prof.a_inf = a_inf;
    prof.p = p;
    prof.step = double(step);
    const std::size_t n = std::size_t(std::ceil(r_end / step)) + 1;
    prof.w.resize(n);
    prof.dw.resize(n);

    // trusted while the bracketing shots agree to 1e-9 relative
    std::size_t match = 1;
    while (match + 1 < common) {
        const long double mid = 0.5L * (sl.w[match] + sh.w[match]);
        if (std::abs(sl.w[match] - sh.w[match]) > 1e-9L * mid || sl.dw[match] >= 0 || sh.dw[match] >= 0) break;
        ++match;
    }
    match = std::max<std::size_t>(match - 1, 1);
    for (std::size_t j = 0; j <= match; ++j) {
        prof.w[j] = double(0.5L * (sl.w[j] + sh.w[j]));
        prof.dw[j] = double(0.5L * (sl.dw[j] + sh.dw[j]));
    }
    prof.matching_radius = prof.radius(match);
    const auto [t_m, dt_m] = detail::linear_tail(dim, a_inf, prof.matching_radius);
    for (std::size_t j = match + 1; j < n; ++j) {
        const auto [t, dt] = detail::linear_tail(dim, a_inf, prof.radius(j));
        const double v = t_m > 0 ? prof.w[match] * t / t_m : 0.0;
        prof.w[j] = v < 1e-300 ? 0.0 : v;
        prof.dw[j] = t_m > 0 && v >= 1e-300 ? prof.w[match] * dt / t_m : 0.0;
    }
    for (std::size_t j = 1; j < n; ++j)
        if (prof.w[j] > 0.0 && !(prof.w[j] < prof.w[j - 1]))
            throw SolverError("ground-state profile is not strictly decreasing");

    LimitPack pack{prof, dom, GridField(dom), 0.0, prof.w[0]};
    pack.w_grid = pack.translated(Point{0.0, 0.0});
    pack.m_inf = detail::profile_energy(pack.profile);
    const double L = dom.half_width();
    try {
        auto [sigma, kappa] = decay_fit(pack.profile, 0.5 * L, 0.8 * L, &pack.profile.prefactor);
        pack.profile.sigma = sigma;
        pack.profile.kappa = kappa;
    } catch (const FitError&) {
        pack.profile.sigma = std::sqrt(a_inf);
        pack.profile.kappa = 0.5 * (dim - 1);
    }
    return pack;
}

/// Sup over 2 < r < r_max of |w'' + (N-1)/r w' - a w + w^p|, by centered
/// differences of the radial samples.
inline double radial_ode_residual(const RadialProfile& prof, double r_max) {
    double worst = 0.0;
    const double hr = prof.step;
    for (std::size_t j = 2; j + 2 < prof.w.size(); ++j) {
        const double r = prof.radius(j);
        if (r <= 2.0) continue;
        if (r > r_max) break;
        // fourth-order centered second derivative
        const double d2 = (-prof.w[j + 2] + 16 * prof.w[j + 1] - 30 * prof.w[j] + 16 * prof.w[j - 1] - prof.w[j - 2]) /
                          (12 * hr * hr);
        const double res = d2 + (prof.dim - 1) / r * prof.dw[j] - prof.a_inf * prof.w[j] + std::pow(prof.w[j], prof.p);
        worst = std::max(worst, std::abs(res));
    }
    return worst;
}

/// || (-Lap + a_inf - p w^{p-1}) f || / || (-Lap + a_inf) f || over interior
/// nodes: ~0 for f in the kernel of the linearization, p - 1 for f = w.
inline double linearized_residual(const LimitPack& pack, const GridField& f) {
    const Domain& dom = f.domain();
    std::vector<double> lap(f.size());
    laplacian(dom, f.values(), lap);
    const double a = pack.a_inf(), p = pack.p();
    const auto w = pack.w_grid.values();
    const auto fv = f.values();
    const double num = pairwise_sum(f.size(), [&](std::size_t i) {
        if (dom.on_boundary(i)) return 0.0;
        const double r = -lap[i] + a * fv[i] - p * std::pow(w[i], p - 1.0) * fv[i];
        return r * r;
    });
    const double den = pairwise_sum(f.size(), [&](std::size_t i) {
        if (dom.on_boundary(i)) return 0.0;
        const double r = -lap[i] + a * fv[i];
        return r * r;
    });
    return std::sqrt(num / den);
}

/// Relative residual of the linearization applied to the centered difference
/// d w / d x_axis: the discrete check that the translation modes span the kernel.
inline double kernel_residual(const LimitPack& pack, int axis) {
    const Domain& dom = pack.domain;
    if (axis < 0 || axis >= dom.dim()) throw ConfigError("kernel_residual: axis index out of range");
    const auto w = pack.w_grid.values();
    const std::size_t st = dom.stride(axis);
    const double h = dom.spacing();
    std::vector<double> d(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i)
        if (!dom.on_boundary(i)) d[i] = (w[i + st] - w[i - st]) / (2.0 * h);
    return linearized_residual(pack, GridField(dom, std::move(d)));
}

} // namespace bumpforge
