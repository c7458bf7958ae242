#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "bumpforge/field.hpp"

namespace bumpforge {

/// x^e for x >= 0, with exact multiplication chains for small integer e.
inline double power(double x, double e) {
    if (e == 1.0) return x;
    if (e == 2.0) return x * x;
    if (e == 3.0) return x * x * x;
    if (e == 4.0) {
        const double x2 = x * x;
        return x2 * x2;
    }
    if (e == 5.0) {
        const double x2 = x * x;
        return x2 * x2 * x;
    }
    if (e == 6.0) {
        const double x3 = x * x * x;
        return x3 * x3;
    }
    if (e == 0.0) return 1.0;
    return x > 0.0 ? std::pow(x, e) : 0.0;
}

/// Sampled coefficients together with the exponents of
///   -Lap u + a u + b u^q - u^p = 0.
struct Problem {
    GridField a;
    GridField b;
    double p = 3.0;
    double q = 2.0;

    const Domain& domain() const { return a.domain(); }
    double b_sup() const { return b.max(); }
};

inline Problem make_problem(const CoefficientPair& pair, const Domain& dom, double p, double q) {
    if (!(q > 1.0) || !(p > q)) throw ConfigError("exponents must satisfy 1 < q < p");
    auto s = sample(pair, dom);
    return Problem{std::move(s.a), std::move(s.b), p, q};
}

/// Problem with a = a_inf and b = 0.
inline Problem make_limit_problem(double a_inf, const Domain& dom, double p) {
    return Problem{GridField::from_function(dom, [&](const Point&) { return a_inf; }), GridField(dom), p,
                   std::min(2.0, 0.5 * (1.0 + p))};
}

struct EnergyBreakdown {
    double kinetic = 0.0;   ///< int |grad u|^2
    double potential = 0.0; ///< int a u^2
    double competing = 0.0; ///< int b |u|^{q+1} / (q+1)
    double focusing = 0.0;  ///< int |u|^{p+1} / (p+1)
    double total = 0.0;

    /// Sum of term magnitudes; the natural scale for relative comparisons.
    double magnitude() const {
        return 0.5 * std::abs(kinetic) + 0.5 * std::abs(potential) + std::abs(competing) + std::abs(focusing);
    }
};

inline EnergyBreakdown action_I(const Problem& pb, std::span<const double> u) {
    const Domain& dom = pb.domain();
    const auto a = pb.a.values();
    const auto b = pb.b.values();
    EnergyBreakdown e;
    e.kinetic = gradient_energy(dom, u);
    e.potential = pairwise_sum(u.size(), [&](std::size_t i) { return dom.weight(i) * a[i] * u[i] * u[i]; });
    e.competing = pairwise_sum(u.size(), [&](std::size_t i) {
                      return b[i] == 0.0 ? 0.0 : dom.weight(i) * b[i] * power(std::abs(u[i]), pb.q + 1.0);
                  }) /
                  (pb.q + 1.0);
    e.focusing =
        pairwise_sum(u.size(), [&](std::size_t i) { return dom.weight(i) * power(std::abs(u[i]), pb.p + 1.0); }) /
        (pb.p + 1.0);
    e.total = 0.5 * e.kinetic + 0.5 * e.potential + e.competing - e.focusing;
    return e;
}

inline EnergyBreakdown action_I(const GridField& u, const GridField& a, const GridField& b, double p, double q) {
    return action_I(Problem{a, b, p, q}, u.values());
}

/// I_inf: a = a_inf, b = 0.
inline EnergyBreakdown action_I_inf(std::span<const double> u, const Domain& dom, double a_inf, double p) {
    EnergyBreakdown e;
    e.kinetic = gradient_energy(dom, u);
    e.potential = a_inf * pairwise_sum(u.size(), [&](std::size_t i) { return dom.weight(i) * u[i] * u[i]; });
    e.focusing =
        pairwise_sum(u.size(), [&](std::size_t i) { return dom.weight(i) * power(std::abs(u[i]), p + 1.0); }) /
        (p + 1.0);
    e.total = 0.5 * e.kinetic + 0.5 * e.potential - e.focusing;
    return e;
}

inline EnergyBreakdown action_I_inf(const GridField& u, double a_inf, double p) {
    return action_I_inf(u.values(), u.domain(), a_inf, p);
}

// ---------------------------------------------------------------------------
// J, the energy carried by an emerging part v above the level delta.

struct JBreakdown {
    double kinetic = 0.0;   ///< int |grad v|^2 (all edges touching supp v)
    double potential = 0.0; ///< int_S a v^2
    double linear = 0.0;    ///< delta int_S a v
    double competing = 0.0; ///< int_S b (delta+v)^{q+1} / (q+1)
    double focusing = 0.0;  ///< int_S (delta+v)^{p+1} / (p+1)
    double b_offset = 0.0;  ///< delta^{q+1}/(q+1) int_S b
    double measure = 0.0;   ///< delta^{p+1}/(p+1) |S|
    double interface = 0.0; ///< grid coupling with the submerged part, see action_J
    double total = 0.0;
};

/// Edges with exactly one endpoint in supp v contribute v_in (delta - s_out)
/// h^{N-2}. On a grid the level set {u = delta} falls between nodes, so the
/// continuum cross term int grad u_delta . grad u^delta (which vanishes) leaves
/// this O(h) remainder; it is zero when s = delta on the neighbours of supp v.
inline double interface_coupling(const Domain& dom, std::span<const double> v, std::span<const double> submerged,
                                 double delta) {
    const int m = dom.nodes();
    const double scale = std::pow(dom.spacing(), dom.dim() - 2);
    return scale * pairwise_sum(v.size(), [&](std::size_t i) {
        double s = 0.0;
        for (int ax = 0; ax < dom.dim(); ++ax) {
            if (dom.axis_index(i, ax) == m - 1) continue;
            const std::size_t j = i + dom.stride(ax);
            const bool in_i = v[i] > 0.0;
            const bool in_j = v[j] > 0.0;
            if (in_i && !in_j) s += v[i] * (delta - submerged[j]);
            if (in_j && !in_i) s += v[j] * (delta - submerged[i]);
        }
        return s;
    });
}

namespace detail {

inline JBreakdown j_terms(const Problem& pb, std::span<const double> v, double delta) {
    const Domain& dom = pb.domain();
    const auto a = pb.a.values();
    const auto b = pb.b.values();
    const double p = pb.p, q = pb.q;
    JBreakdown j;
    j.kinetic = gradient_energy(dom, v);
    auto over_support = [&](auto&& term) {
        return pairwise_sum(v.size(), [&](std::size_t i) { return v[i] > 0.0 ? dom.weight(i) * term(i) : 0.0; });
    };
    j.potential = over_support([&](std::size_t i) { return a[i] * v[i] * v[i]; });
    j.linear = delta * over_support([&](std::size_t i) { return a[i] * v[i]; });
    j.competing = over_support([&](std::size_t i) { return b[i] * power(delta + v[i], q + 1.0); }) / (q + 1.0);
    j.focusing = over_support([&](std::size_t i) { return power(delta + v[i], p + 1.0); }) / (p + 1.0);
    j.b_offset = power(delta, q + 1.0) / (q + 1.0) * over_support([&](std::size_t i) { return b[i]; });
    j.measure = power(delta, p + 1.0) / (p + 1.0) * over_support([](std::size_t) { return 1.0; });
    return j;
}

inline void j_total(JBreakdown& j) {
    j.total = 0.5 * j.kinetic + 0.5 * j.potential + j.linear + j.competing - j.focusing - j.b_offset + j.measure +
              j.interface;
}

} // namespace detail

/// The six-term J of an emerging part v (supp v = {v > 0}); the submerged
/// context is taken to equal delta next to supp v, so there is no interface
/// term. Additive over parts with disjoint, non-adjacent supports.
inline JBreakdown action_J(const Problem& pb, std::span<const double> v, double delta) {
    auto j = detail::j_terms(pb, v, delta);
    detail::j_total(j);
    return j;
}

/// J of v sitting on the submerged field s (s = delta on supp v). With this
/// context I(s + v) = I(s) + J(v; s) holds exactly on the grid.
inline JBreakdown action_J(const Problem& pb, std::span<const double> v, double delta, std::span<const double> submerged) {
    auto j = detail::j_terms(pb, v, delta);
    j.interface = interface_coupling(pb.domain(), v, submerged, delta);
    detail::j_total(j);
    return j;
}

inline JBreakdown action_J(const GridField& v, const GridField& a, const GridField& b, double p, double q,
                           double delta) {
    return action_J(Problem{a, b, p, q}, v.values(), delta);
}

/// J_inf: a = a_inf, b = 0.
inline JBreakdown action_J_inf(std::span<const double> v, const Domain& dom, double a_inf, double p, double delta,
                               std::span<const double> submerged = {}) {
    Problem pb = make_limit_problem(a_inf, dom, p);
    return submerged.empty() ? action_J(pb, v, delta) : action_J(pb, v, delta, submerged);
}

// ---------------------------------------------------------------------------
// Gradient.

/// Nodal residual -Lap u + a u + b u^q - u^p (0 on boundary nodes). For every
/// v vanishing on the boundary, d/de I(u + e v) = sum_i out_i v_i h^N exactly.
inline void grad_I(const Problem& pb, std::span<const double> u, std::span<double> out) {
    const Domain& dom = pb.domain();
    laplacian(dom, u, out);
    const auto a = pb.a.values();
    const auto b = pb.b.values();
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (dom.on_boundary(i)) {
            out[i] = 0.0;
            continue;
        }
        const double ui = std::max(u[i], 0.0);
        out[i] = -out[i] + a[i] * u[i] + (b[i] == 0.0 ? 0.0 : b[i] * power(ui, pb.q)) - power(ui, pb.p);
    }
}

inline GridField grad_I(const GridField& u, const GridField& a, const GridField& b, double p, double q) {
    std::vector<double> out(u.size());
    grad_I(Problem{a, b, p, q}, u.values(), out);
    return GridField(u.domain(), std::move(out));
}

/// sum_i f_i g_i h^N over interior nodes: the pairing that turns nodal
/// residuals into directional derivatives.
inline double pairing(const Domain& dom, std::span<const double> f, std::span<const double> g) {
    return dom.cell_volume() *
           pairwise_sum(f.size(), [&](std::size_t i) { return dom.on_boundary(i) ? 0.0 : f[i] * g[i]; });
}

/// I(u v v) + I(u ^ v) - I(u) - I(v). Every node-wise term cancels exactly;
/// what remains is the kinetic contribution of edges along which u - v
/// changes sign, sum (u_a - v_a)(u_b - v_b) h^{N-2} over those edges (<= 0).
inline double lattice_defect(const Domain& dom, std::span<const double> u, std::span<const double> v) {
    const int m = dom.nodes();
    const double scale = std::pow(dom.spacing(), dom.dim() - 2);
    return scale * pairwise_sum(u.size(), [&](std::size_t i) {
        double s = 0.0;
        for (int ax = 0; ax < dom.dim(); ++ax) {
            if (dom.axis_index(i, ax) == m - 1) continue;
            const std::size_t j = i + dom.stride(ax);
            const double prod = (u[i] - v[i]) * (u[j] - v[j]);
            if (prod < 0.0) s += prod;
        }
        return s;
    });
}

} // namespace bumpforge
