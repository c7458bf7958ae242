#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bumpforge/decomp.hpp"
#include "bumpforge/energy.hpp"
#include "bumpforge/limit.hpp"
#include "bumpforge/spectral.hpp"

namespace bumpforge {

struct InnerOptions {
    double energy_tol = 1e-11;      ///< relative energy decrease per step
    double stationarity_tol = 1e-6; ///< preconditioned gradient norm relative to the state's norm
    double residual_tol = 1e-6;     ///< tau_S
    int max_iterations = 3000;
    int block_iterations = 20; ///< steps per block and sweep in the block scheme
    int memory = 8;            ///< quasi-Newton pairs
    double armijo = 1e-4;
    bool block_scheme = false; ///< alternate submerged / emerging blocks instead of stepping both at once
    bool require_convergence = true;
};

struct MultiplierFit {
    Point lambda{0.0, 0.0};
    double residual = 0.0; ///< L2 norm of what the fit leaves on the ball
};

struct InnerSolveResult {
    GridField u{Domain(1, 1.0, 33)};
    double mu = 0.0;
    std::vector<MultiplierFit> multipliers;
    ConstraintResiduals residuals;
    std::vector<double> bump_energy; ///< J(u_i^delta) with its submerged context
    std::vector<double> energy_history;
    double stationarity = 0.0;
    double submerged_residual = 0.0; ///< sup of the equation's residual on free nodes with 0 < u < delta off the balls
    int iterations = 0;
    bool converged = false;

    double max_multiplier() const {
        double m = 0.0;
        for (const auto& f : multipliers) m = std::max(m, norm(f.lambda));
        return m;
    }
};

// ---------------------------------------------------------------------------
// Multipliers.

/// Least-squares fit of `residual` on B_R(center) against part (x - center)_m.
inline MultiplierFit fit_multipliers(const Domain& dom, std::span<const double> residual, std::span<const double> part,
                                     const Point& center, double radius) {
    const int n = dom.dim();
    double g[2][2] = {{0, 0}, {0, 0}}, rhs[2] = {0, 0};
    std::vector<std::size_t> ball;
    for (std::size_t i = 0; i < residual.size(); ++i)
        if (!dom.on_boundary(i) && distance(dom.point(i), center) < radius) ball.push_back(i);
    auto basis = [&](std::size_t i, int m) { return part[i] * (dom.point(i)[std::size_t(m)] - center[std::size_t(m)]); };
    for (int a = 0; a < n; ++a) {
        rhs[a] = pairwise_sum(ball.size(), [&](std::size_t j) { return basis(ball[j], a) * residual[ball[j]]; });
        for (int b = 0; b < n; ++b)
            g[a][b] = pairwise_sum(ball.size(), [&](std::size_t j) { return basis(ball[j], a) * basis(ball[j], b); });
    }
    MultiplierFit fit;
    if (n == 1) {
        if (!(g[0][0] > 1e-300)) throw SolverError("multiplier fit: degenerate emerging part");
        fit.lambda[0] = rhs[0] / g[0][0];
    } else {
        const double det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        const double tr = g[0][0] + g[1][1];
        if (!(det > 1e-14 * tr * tr) || !(tr > 1e-300)) throw SolverError("multiplier fit: singular normal matrix");
        fit.lambda[0] = (g[1][1] * rhs[0] - g[0][1] * rhs[1]) / det;
        fit.lambda[1] = (-g[1][0] * rhs[0] + g[0][0] * rhs[1]) / det;
    }
    const double res2 = pairwise_sum(ball.size(), [&](std::size_t j) {
        const std::size_t i = ball[j];
        double r = residual[i];
        for (int a = 0; a < n; ++a) r -= fit.lambda[std::size_t(a)] * basis(i, a);
        return r * r;
    });
    fit.residual = std::sqrt(res2 * dom.cell_volume());
    return fit;
}

inline MultiplierFit fit_multipliers(const GridField& residual, const GridField& part, const Point& center,
                                     double radius) {
    return fit_multipliers(residual.domain(), residual.values(), part.values(), center, radius);
}

/// lambda_i with grad I(u) ~ sum_i lambda_i . (x - x_i) u_i^delta on each ball.
inline std::vector<MultiplierFit> extract_multipliers(const GridField& u, const BumpLayout& layout, const Problem& pb,
                                                      const ThresholdSet& th) {
    const Domain& dom = u.domain();
    std::vector<double> grad(u.size());
    grad_I(pb, u.values(), grad);
    const auto sp = split(u, th.delta);
    const auto parts = detail::emerging_parts(dom, sp.high.values(), layout, 0.0);
    std::vector<MultiplierFit> out;
    for (std::size_t j = 0; j < parts.size(); ++j)
        out.push_back(fit_multipliers(dom, grad, parts[j], layout.centers[j], layout.radius));
    return out;
}

// ---------------------------------------------------------------------------
// Inner minimization of I over S_{x_1..x_k}.

namespace detail {

struct Projected {
    std::vector<double> u;
    std::vector<std::vector<double>> parts;
    double energy = 0.0;
};

inline Projected project_state(const Problem& pb, const BumpLayout& layout, const ThresholdSet& th,
                               std::span<const double> raw) {
    const std::size_t n = raw.size();
    std::vector<double> low(n), high(n);
    for (std::size_t i = 0; i < n; ++i) {
        low[i] = std::min(raw[i], th.delta);
        high[i] = raw[i] > th.delta ? raw[i] - th.delta : 0.0;
    }
    Projected out;
    out.parts = emerging_parts(pb.domain(), high, layout, 0.0);
    project_in_place(pb, layout, th, low, out.parts);
    out.u = std::move(low);
    for (const auto& part : out.parts)
        for (std::size_t i = 0; i < n; ++i) out.u[i] += part[i];
    out.energy = action_I(pb, out.u).total;
    return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    return pairwise_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

/// Small dense symmetric solve by Gaussian elimination with partial pivoting.
inline std::vector<double> dense_solve(std::vector<double> a, std::vector<double> b, std::size_t n) {
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
        if (!(std::abs(a[piv * n + c]) > 0.0)) throw SolverError("singular barycenter system");
        if (piv != c) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
            std::swap(b[c], b[piv]);
        }
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r * n + c] / a[c * n + c];
            for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t c = n; c-- > 0;) {
        double s = b[c];
        for (std::size_t k = c + 1; k < n; ++k) s -= a[c * n + k] * x[k];
        x[c] = s / a[c * n + c];
    }
    return x;
}

/// Preconditioner Q = Z P^{-1} Z restricted to the tangent of the barycenter
/// constraints: Q x = y - PE G^{-1} E^T y with y = Z P^{-1} Z x.
class TangentMetric {
public:
    TangentMetric(const ShiftedPoisson& poisson, std::vector<char> free, std::vector<std::vector<double>> e)
        : poisson_(poisson), free_(std::move(free)), e_(std::move(e)) {
        const std::size_t c = e_.size();
        for (auto& col : e_) pe_.push_back(raw(col));
        gram_.resize(c * c);
        for (std::size_t a = 0; a < c; ++a)
            for (std::size_t b = 0; b < c; ++b) gram_[a * c + b] = dot(e_[a], pe_[b]);
    }

    const std::vector<char>& free() const { return free_; }

    void mask(std::vector<double>& x) const {
        for (std::size_t i = 0; i < x.size(); ++i)
            if (!free_[i]) x[i] = 0.0;
    }

    std::vector<double> apply(std::span<const double> x) const {
        auto y = raw(x);
        project(y);
        return y;
    }

    /// Removes the P-orthogonal component violating E^T d = 0.
    void project(std::vector<double>& d) const {
        const std::size_t c = e_.size();
        if (c == 0) return;
        std::vector<double> rhs(c);
        for (std::size_t a = 0; a < c; ++a) rhs[a] = dot(e_[a], d);
        const auto coef = dense_solve(gram_, rhs, c);
        for (std::size_t a = 0; a < c; ++a)
            for (std::size_t i = 0; i < d.size(); ++i) d[i] -= coef[a] * pe_[a][i];
    }

private:
    std::vector<double> raw(std::span<const double> x) const {
        std::vector<double> in(x.begin(), x.end()), out(x.size());
        mask(in);
        poisson_.solve(in, out);
        mask(out);
        return out;
    }

    const ShiftedPoisson& poisson_;
    std::vector<char> free_;
    std::vector<std::vector<double>> e_;
    std::vector<std::vector<double>> pe_;
    std::vector<double> gram_;
};

enum class Block { both, submerged, emerging };

} // namespace detail

/// Minimizes I over S_{x_1..x_k} starting from `init` (projected first).
/// Every iterate lies in S: a preconditioned quasi-Newton step on the free
/// nodes (clipped to 0 <= u, u <= delta outside the balls), recentring of each
/// emerging part and theta_i rescaling, accepted under an Armijo rule on I.
inline InnerSolveResult minimize_on_S(const Problem& pb, const BumpLayout& layout, const GridField& init,
                                      const ThresholdSet& th, const InnerOptions& opts = {}) {
    require_small_b(pb, th);
    const Domain& dom = pb.domain();
    const std::size_t n = dom.size();
    const double a_ref = pb.a.max();
    ShiftedPoisson poisson(dom, a_ref);

    std::vector<double> upper(n), ball_of(n, -1.0);
    std::vector<int> owner(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        upper[i] = th.delta;
        for (std::size_t j = 0; j < layout.size(); ++j)
            if (distance(dom.point(i), layout.centers[j]) < layout.radius) {
                upper[i] = std::numeric_limits<double>::infinity();
                owner[i] = int(j);
            }
        if (dom.on_boundary(i)) upper[i] = 0.0;
    }

    std::vector<double> start(init.values().begin(), init.values().end());
    for (std::size_t i = 0; i < n; ++i) start[i] = std::clamp(start[i], 0.0, upper[i]);
    auto state = detail::project_state(pb, layout, th, start);

    auto norm_p = [&](std::span<const double> u) {
        std::vector<double> lap(n);
        laplacian(dom, u, lap);
        return pairwise_sum(n, [&](std::size_t i) { return u[i] * (a_ref * u[i] - lap[i]); });
    };

    auto submerged_residual = [&](std::span<const double> u, std::span<const double> g) {
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (!dom.on_boundary(i) && owner[i] < 0 && u[i] > 0.0 && u[i] < th.delta)
                worst = std::max(worst, std::abs(g[i]) / dom.weight(i));
        return worst;
    };

    InnerSolveResult res;
    res.energy_history.push_back(state.energy);

    std::vector<double> grad(n);
    grad_I(pb, state.u, grad);
    std::deque<std::pair<std::vector<double>, std::vector<double>>> pairs;
    double last_decrease = std::numeric_limits<double>::infinity();
    detail::Block block = opts.block_scheme ? detail::Block::submerged : detail::Block::both;
    int block_steps = 0;
    int stalled_blocks = 0;

    for (int it = 0; it < opts.max_iterations; ++it) {
        std::vector<char> free(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (dom.on_boundary(i)) continue;
            const double u = state.u[i];
            if (u <= 0.0 && grad[i] > 0.0) continue;
            if (u >= upper[i] && grad[i] < 0.0) continue;
            if (block == detail::Block::submerged && u > th.delta) continue;
            if (block == detail::Block::emerging && (owner[i] < 0 || u < th.delta)) continue;
            free[i] = 1;
        }
        std::vector<std::vector<double>> e;
        if (block != detail::Block::submerged)
            for (std::size_t j = 0; j < layout.size(); ++j)
                for (int ax = 0; ax < dom.dim(); ++ax) {
                    std::vector<double> col(n, 0.0);
                    for (std::size_t i = 0; i < n; ++i)
                        if (state.parts[j][i] > 0.0)
                            col[i] = state.parts[j][i] * (dom.point(i)[std::size_t(ax)] - layout.centers[j][std::size_t(ax)]);
                    e.push_back(std::move(col));
                }
        detail::TangentMetric metric(poisson, std::move(free), std::move(e));

        std::vector<double> g = grad;
        metric.mask(g);
        const auto qg = metric.apply(g);
        const double gqg = std::max(0.0, detail::dot(g, qg));
        const double stationarity = std::sqrt(gqg / norm_p(state.u));
        if (block == detail::Block::both) res.stationarity = stationarity;

        if (block == detail::Block::both && stationarity <= opts.stationarity_tol &&
            last_decrease <= opts.energy_tol && submerged_residual(state.u, grad) <= opts.residual_tol) {
            res.converged = true;
            break;
        }

        // two-loop recursion with H0 = gamma Q
        std::vector<double> q = g;
        std::vector<double> alphas(pairs.size());
        for (std::size_t k = pairs.size(); k-- > 0;) {
            const auto& [s, y] = pairs[k];
            const double rho = 1.0 / detail::dot(y, s);
            alphas[k] = rho * detail::dot(s, q);
            for (std::size_t i = 0; i < n; ++i) q[i] -= alphas[k] * y[i];
        }
        double gamma = 1.0;
        if (!pairs.empty()) {
            const auto& [s, y] = pairs.back();
            const auto qy = metric.apply(y);
            const double yqy = detail::dot(y, qy);
            if (yqy > 0.0) gamma = detail::dot(s, y) / yqy;
        }
        auto r = metric.apply(q);
        for (double& x : r) x *= gamma;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const auto& [s, y] = pairs[k];
            const double rho = 1.0 / detail::dot(y, s);
            const double beta = rho * detail::dot(y, r);
            for (std::size_t i = 0; i < n; ++i) r[i] += (alphas[k] - beta) * s[i];
        }
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = -r[i];
        metric.mask(d);
        metric.project(d);
        metric.mask(d);
        double slope = detail::dot(g, d);
        if (!(slope < 0.0)) {
            pairs.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -qg[i];
            slope = -gqg;
        }

        bool accepted = false;
        detail::Projected trial;
        if (slope < 0.0) {
            double alpha = 1.0;
            if (pairs.empty()) {
                double dmax = 0.0;
                for (double x : d) dmax = std::max(dmax, std::abs(x));
                alpha = std::min(1.0, th.delta / std::max(dmax, 1e-300));
            }
            for (int ls = 0; ls < 40 && !accepted; ++ls, alpha *= 0.5) {
                std::vector<double> raw(state.u);
                for (std::size_t i = 0; i < n; ++i)
                    if (metric.free()[i]) raw[i] = std::clamp(state.u[i] + alpha * d[i], 0.0, upper[i]);
                double predicted = 0.0;
                for (std::size_t i = 0; i < n; ++i) predicted += grad[i] * (raw[i] - state.u[i]);
                predicted *= dom.cell_volume();
                try {
                    trial = detail::project_state(pb, layout, th, raw);
                } catch (const EmergingOutsideBalls&) {
                    continue;
                } catch (const EmptyBump&) {
                    continue;
                } catch (const SolverError&) {
                    continue;
                }
                if (trial.energy <= state.energy + opts.armijo * std::min(predicted, 0.0) &&
                    trial.energy <= state.energy)
                    accepted = true;
            }
        }

        ++res.iterations;
        if (!accepted) {
            if (!pairs.empty()) {
                pairs.clear();
                continue;
            }
            if (block != detail::Block::both) {
                // this block is stuck; hand over to the other one
                block = block == detail::Block::submerged ? detail::Block::emerging : detail::Block::submerged;
                block_steps = 0;
                if (++stalled_blocks >= 2) block = detail::Block::both;
                continue;
            }
            res.stationarity = stationarity;
            res.converged = stationarity <= 10.0 * opts.stationarity_tol;
            break;
        }
        stalled_blocks = 0;

        std::vector<double> new_grad(n);
        grad_I(pb, trial.u, new_grad);
        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = trial.u[i] - state.u[i];
            y[i] = new_grad[i] - grad[i];
        }
        metric.mask(s);
        metric.mask(y);
        const double sy = detail::dot(s, y);
        if (sy > 1e-12 * std::sqrt(detail::dot(s, s) * detail::dot(y, y))) {
            pairs.emplace_back(std::move(s), std::move(y));
            if (int(pairs.size()) > opts.memory) pairs.pop_front();
        }
        last_decrease = (state.energy - trial.energy) / std::max(std::abs(trial.energy), 1e-300);
        state = std::move(trial);
        grad = std::move(new_grad);
        res.energy_history.push_back(state.energy);

        for (std::size_t j = 0; j < state.parts.size(); ++j) {
            const double top = *std::max_element(state.parts[j].begin(), state.parts[j].end());
            if (top < 0.1 * th.delta) throw BumpCollapse("emerging part " + std::to_string(j) + " fell below delta/10");
        }

        if (block != detail::Block::both && ++block_steps >= opts.block_iterations) {
            block = block == detail::Block::submerged ? detail::Block::emerging : detail::Block::submerged;
            block_steps = 0;
            pairs.clear();
            if (last_decrease <= opts.energy_tol) block = detail::Block::both;
        }
        if (block != detail::Block::both && block_steps == 0 && block == detail::Block::submerged &&
            last_decrease <= opts.energy_tol)
            block = detail::Block::both;
    }

    res.u = GridField(dom, state.u);
    res.mu = state.energy;
    res.residuals = constraint_residuals(res.u, layout, pb, th);
    res.multipliers = extract_multipliers(res.u, layout, pb, th);
    std::vector<double> low(n);
    for (std::size_t i = 0; i < n; ++i) low[i] = std::min(state.u[i], th.delta);
    for (const auto& part : state.parts) res.bump_energy.push_back(action_J(pb, part, th.delta, low).total);
    res.submerged_residual = submerged_residual(state.u, grad);
    res.converged = res.converged && res.residuals.satisfied(opts.residual_tol) &&
                    res.submerged_residual <= opts.residual_tol;
    if (!res.converged && opts.require_convergence) {
        std::ostringstream os;
        os << "inner solve stopped after " << res.iterations << " steps with stationarity " << res.stationarity;
        throw NotConverged(os.str());
    }
    return res;
}

// ---------------------------------------------------------------------------
// Gluing and warm starts.

namespace detail {

inline void check_separation(const BumpLayout& layout, const Point& c) {
    for (const auto& x : layout.centers)
        if (distance(x, c) < 2.0 * layout.radius * (1.0 - 1e-12)) {
            std::ostringstream os;
            os << "new center lies " << distance(x, c) << " from an existing one (< 2R = " << 2.0 * layout.radius << ")";
            throw ConfigError(os.str());
        }
}

/// Single theta-projected translate of w around c.
inline std::vector<double> projected_translate(const LimitPack& pack, const Problem& pb, const ThresholdSet& th,
                                               const Point& c, double radius) {
    const auto w = pack.translated(c, pb.domain());
    auto pr = project_to_S(w, BumpLayout{{c}, radius}, pb, th);
    return {pr.u.values().begin(), pr.u.values().end()};
}

/// Starting field for `to` built from a state on `from`: parts of moved bumps
/// are cut down to delta and a projected translate of w is glued at the new
/// position with a pointwise max.
inline GridField warm_start(const GridField& u, const BumpLayout& from, const BumpLayout& to, const LimitPack& pack,
                            const Problem& pb, const ThresholdSet& th) {
    const Domain& dom = u.domain();
    std::vector<double> v(u.values().begin(), u.values().end());
    for (std::size_t j = 0; j < to.size(); ++j) {
        if (j < from.size() && from.centers[j] == to.centers[j]) continue;
        if (j < from.size())
            for (std::size_t i = 0; i < v.size(); ++i)
                if (distance(dom.point(i), from.centers[j]) < from.radius) v[i] = std::min(v[i], th.delta);
        const auto w = projected_translate(pack, pb, th, to.centers[j], to.radius);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(v[i], w[i]);
    }
    return GridField(dom, std::move(v));
}

} // namespace detail

/// u v (theta-projected w at new_center), projected onto S of the extended
/// layout.
inline Projection glue_candidate(const GridField& u, const BumpLayout& layout, const Point& new_center,
                                 const LimitPack& pack, const Problem& pb, const ThresholdSet& th) {
    detail::check_separation(layout, new_center);
    const auto w = detail::projected_translate(pack, pb, th, new_center, layout.radius);
    std::vector<double> v(u.values().begin(), u.values().end());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(v[i], w[i]);
    BumpLayout ext = layout;
    ext.centers.push_back(new_center);
    return project_to_S(GridField(u.domain(), std::move(v)), ext, pb, th);
}

/// Pointwise max of the projected translates of w, one per center.
inline GridField translate_guess(const BumpLayout& layout, const LimitPack& pack, const Problem& pb,
                                 const ThresholdSet& th) {
    std::vector<double> v(pb.domain().size(), 0.0);
    for (const auto& c : layout.centers) {
        const auto w = detail::projected_translate(pack, pb, th, c, layout.radius);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(v[i], w[i]);
    }
    return GridField(pb.domain(), std::move(v));
}

// ---------------------------------------------------------------------------
// Outer maximization of mu over K_k.

struct OuterOptions {
    int radial_starts = 3;      ///< graded radii along zeta-bar
    int random_starts = 2;
    std::uint64_t seed = 1;
    double initial_step = 0.0;  ///< 0: R/2 snapped to the grid
    double min_step = 0.0;      ///< 0: one grid spacing
    int max_evaluations = 600;
    double flat_tol = 1e-3;     ///< relative spread of all sampled mu below which the landscape is flat
    bool quadratic_refinement = true;
    double decay_margin = 4.0;  ///< extra box margin beyond R, in decay lengths 1/sqrt(a0)
    std::vector<std::vector<Point>> seeds; ///< extra start layouts tried first, e.g. a coarser grid's optimum
    InnerOptions inner;
};

struct StartRecord {
    std::string provenance;
    BumpLayout start;
    BumpLayout best;
    double mu = -std::numeric_limits<double>::infinity();
    int evaluations = 0;
    bool converged = false;
};

struct MaxMinReport {
    int k = 0;
    BumpLayout layout;
    double mu = 0.0;
    InnerSolveResult best;
    std::string provenance;
    std::vector<StartRecord> starts;
    bool flat = false;
    double spread = 0.0;          ///< max - min over every successful evaluation
    double region_half_width = 0; ///< centers searched in [-W, W]^N (truncation of K_k)
    int evaluations = 0;
    bool refined = false;
};

namespace detail {

struct Evaluator {
    const Problem& pb;
    const ThresholdSet& th;
    const LimitPack& pack;
    const InnerOptions& inner;
    double half_width;
    int count = 0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    bool admissible(const BumpLayout& layout) const {
        for (const auto& c : layout.centers) {
            if (std::abs(c[0]) > half_width + 1e-12) return false;
            if (pb.domain().dim() == 2 && std::abs(c[1]) > half_width + 1e-12) return false;
            if (pb.domain().dim() == 1 && c[1] != 0.0) return false;
        }
        return layout.size() < 2 || layout.min_separation() >= 2.0 * layout.radius * (1.0 - 1e-12);
    }

    std::optional<InnerSolveResult> operator()(const BumpLayout& layout, const GridField& init) {
        ++count;
        try {
            InnerOptions opts = inner;
            opts.require_convergence = false;
            auto r = minimize_on_S(pb, layout, init, th, opts);
            if (!r.converged) return std::nullopt;
            lo = std::min(lo, r.mu);
            hi = std::max(hi, r.mu);
            return r;
        } catch (const Error&) {
            return std::nullopt;
        }
    }
};

inline bool layout_less(const BumpLayout& a, const BumpLayout& b) {
    return std::lexicographical_compare(a.centers.begin(), a.centers.end(), b.centers.begin(), b.centers.end());
}

inline Point snap(const Domain& dom, const Point& p) {
    const double h = dom.spacing();
    Point q{h * std::round(p[0] / h), dom.dim() == 2 ? h * std::round(p[1] / h) : 0.0};
    return q;
}

} // namespace detail

/// Multi-start compass search for sup mu over layouts in K_k truncated to the
/// box minus a margin of R + decay_margin / sqrt(a0).
inline MaxMinReport outer_maximize(int k, const Problem& pb, const CoefficientPair& pair, const ThresholdSet& th,
                                   const LimitPack& pack, const OuterOptions& opts = {}) {
    if (k < 1) throw ConfigError("outer_maximize: k must be at least 1");
    require_small_b(pb, th);
    const Domain& dom = pb.domain();
    const int n = dom.dim();
    const double h = dom.spacing();
    const double R = th.R;
    MaxMinReport rep;
    rep.k = k;
    rep.region_half_width = dom.half_width() - R - opts.decay_margin / std::sqrt(pair.a0);
    if (!(rep.region_half_width >= 0.0)) throw ConfigError("outer_maximize: box too small for the search margin");
    detail::Evaluator eval{pb, th, pack, opts.inner, rep.region_half_width};
    const double step0 = opts.initial_step > 0.0 ? opts.initial_step : std::max(h, h * std::round(0.5 * R / h));
    const double step_min = opts.min_step > 0.0 ? opts.min_step : h;

    // start layouts
    std::vector<std::pair<std::string, BumpLayout>> starts;
    for (std::size_t s = 0; s < opts.seeds.size(); ++s) {
        if (int(opts.seeds[s].size()) != k) throw ConfigError("outer_maximize: seed layout has the wrong bump count");
        BumpLayout lay{{}, R};
        for (const auto& c : opts.seeds[s]) lay.centers.push_back(detail::snap(dom, c));
        if (eval.admissible(lay)) starts.emplace_back("seed-" + std::to_string(s), lay);
    }
    const Point zeta = n == 2 ? pair.cone.zeta() : Point{pair.cone.zeta()[0] >= 0.0 ? 1.0 : -1.0, 0.0};
    for (int s = 0; s < opts.radial_starts; ++s) {
        const double r = rep.region_half_width * (s + 1.0) / (opts.radial_starts + 1.0);
        BumpLayout lay{{}, R};
        if (k == 1) {
            lay.centers.push_back(detail::snap(dom, r * zeta));
        } else if (n == 1) {
            const double gap = std::max(2.2 * R, 2.0 * r / (k - 1));
            for (int j = 0; j < k; ++j) lay.centers.push_back(detail::snap(dom, Point{(j - 0.5 * (k - 1)) * gap, 0.0}));
        } else {
            const double rho = std::max(r, 1.1 * R / std::sin(std::numbers::pi / k));
            for (int j = 0; j < k; ++j) {
                const double phi = pair.cone.zeta_angle + 2.0 * std::numbers::pi * j / k;
                lay.centers.push_back(detail::snap(dom, rho * Point{std::cos(phi), std::sin(phi)}));
            }
        }
        if (eval.admissible(lay)) starts.emplace_back("radial-" + std::to_string(s), lay);
    }
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> coord(-rep.region_half_width, rep.region_half_width);
    for (int s = 0; s < opts.random_starts; ++s) {
        for (int attempt = 0; attempt < 10000; ++attempt) {
            BumpLayout lay{{}, R};
            for (int j = 0; j < k; ++j) {
                const double x = coord(rng);
                const double y = n == 2 ? coord(rng) : 0.0;
                lay.centers.push_back(detail::snap(dom, Point{x, y}));
            }
            if (eval.admissible(lay)) {
                starts.emplace_back("random-" + std::to_string(s), lay);
                break;
            }
        }
    }
    if (starts.empty()) throw SolverError("outer_maximize: no admissible start layout");

    std::optional<InnerSolveResult> best;
    BumpLayout best_layout;
    double best_step = step_min;
    for (const auto& [name, start] : starts) {
        if (eval.count >= opts.max_evaluations) break;
        StartRecord rec{name, start, start, -std::numeric_limits<double>::infinity(), 0, false};
        const int before = eval.count;
        auto cur = eval(start, translate_guess(start, pack, pb, th));
        if (!cur) {
            rec.evaluations = eval.count - before;
            rep.starts.push_back(rec);
            continue;
        }
        BumpLayout cur_layout = start;
        double step = step0;
        while (step >= step_min * (1.0 - 1e-9) && eval.count < opts.max_evaluations) {
            bool improved = false;
            for (int j = 0; j < k && !improved; ++j)
                for (int ax = 0; ax < n && !improved; ++ax)
                    for (int sgn : {1, -1}) {
                        BumpLayout trial = cur_layout;
                        trial.centers[std::size_t(j)][std::size_t(ax)] += sgn * step;
                        if (!eval.admissible(trial)) continue;
                        auto r = eval(trial, detail::warm_start(cur->u, cur_layout, trial, pack, pb, th));
                        if (r && r->mu > cur->mu) {
                            cur = std::move(r);
                            cur_layout = trial;
                            improved = true;
                            break;
                        }
                        if (eval.count >= opts.max_evaluations) break;
                    }
            if (!improved) step *= 0.5;
        }
        rec.best = cur_layout;
        rec.mu = cur->mu;
        rec.converged = true;
        rec.evaluations = eval.count - before;
        rep.starts.push_back(rec);
        if (!best || cur->mu > best->mu || (cur->mu == best->mu && detail::layout_less(cur_layout, best_layout))) {
            best = std::move(cur);
            best_layout = cur_layout;
            rep.provenance = name;
            best_step = std::max(step_min, 2.0 * step);
        }
    }
    if (!best) throw SolverError("outer_maximize: every start failed");

    if (opts.quadratic_refinement) {
        // separable parabola through the best point and its +-step neighbours
        BumpLayout target = best_layout;
        const double s = best_step;
        bool moved = false;
        for (int j = 0; j < k; ++j)
            for (int ax = 0; ax < n; ++ax) {
                double f[2];
                bool ok = true;
                for (int side = 0; side < 2 && ok; ++side) {
                    BumpLayout t = best_layout;
                    t.centers[std::size_t(j)][std::size_t(ax)] += side == 0 ? -s : s;
                    if (!eval.admissible(t)) {
                        ok = false;
                        break;
                    }
                    auto r = eval(t, detail::warm_start(best->u, best_layout, t, pack, pb, th));
                    if (!r) ok = false;
                    else f[side] = r->mu;
                }
                if (!ok) continue;
                const double curv = f[0] - 2.0 * best->mu + f[1];
                if (!(curv < 0.0)) continue;
                const double shift = std::clamp(0.5 * s * (f[0] - f[1]) / curv, -0.5 * s, 0.5 * s);
                target.centers[std::size_t(j)][std::size_t(ax)] += shift;
                moved = moved || shift != 0.0;
            }
        if (moved && eval.admissible(target)) {
            auto r = eval(target, detail::warm_start(best->u, best_layout, target, pack, pb, th));
            if (r && r->mu > best->mu) {
                best = std::move(r);
                best_layout = target;
                rep.refined = true;
            }
        }
    }

    rep.layout = best_layout;
    rep.mu = best->mu;
    rep.best = std::move(*best);
    rep.evaluations = eval.count;
    rep.spread = eval.hi - eval.lo;
    rep.flat = rep.spread <= opts.flat_tol * std::abs(rep.mu);
    return rep;
}

// ---------------------------------------------------------------------------
// Energy ladder.

struct Rung {
    int k = 0;
    double margin = 0.0; ///< mu_1 - m_inf, or mu_k - mu_{k-1} - m_inf
    bool pass = false;
};

/// Rung 1 passes when mu_1 > m_inf + tol, rung k > 1 when
/// mu_k > mu_{k-1} + m_inf - tol.
inline std::vector<Rung> ladder_check(std::span<const double> mu, double m_inf, double tol) {
    if (mu.empty()) throw ConfigError("ladder_check: no rungs");
    std::vector<Rung> out;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        Rung r;
        r.k = int(i) + 1;
        if (i == 0) {
            r.margin = mu[0] - m_inf;
            r.pass = r.margin > tol;
        } else {
            r.margin = mu[i] - mu[i - 1] - m_inf;
            r.pass = r.margin > -tol;
        }
        out.push_back(r);
    }
    return out;
}

inline std::vector<Rung> ladder_check(const std::vector<MaxMinReport>& reports, double m_inf, double tol) {
    if (reports.empty()) throw ConfigError("ladder_check: no reports");
    std::vector<double> mu;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (reports[i].k != int(i) + 1) throw ConfigError("ladder_check: missing rung k = " + std::to_string(i + 1));
        mu.push_back(reports[i].mu);
    }
    return ladder_check(mu, m_inf, tol);
}

} // namespace bumpforge
