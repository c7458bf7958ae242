#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bumpforge/errors.hpp"
#include "bumpforge/reduce.hpp"

namespace bumpforge {

/// A point of R^N, N <= 2. The second coordinate is 0 when N = 1.
using Point = std::array<double, 2>;

inline double norm(const Point& p) { return std::hypot(p[0], p[1]); }
inline double distance(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }
inline Point operator-(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Point operator+(const Point& a, const Point& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Point operator*(double s, const Point& a) { return {s * a[0], s * a[1]}; }

/// The box [-L, L]^N sampled by M nodes per axis; the origin is a node.
class Domain {
public:
    Domain(int dim, double half_width, int nodes) : dim_(dim), half_width_(half_width), nodes_(nodes) {
        if (dim != 1 && dim != 2) throw ConfigError("domain dimension must be 1 or 2");
        if (!(half_width > 0.0) || !std::isfinite(half_width)) throw ConfigError("domain half-width must be positive");
        if (nodes < 33 || nodes % 2 == 0) throw ConfigError("nodes per axis must be odd and >= 33");
    }

    int dim() const { return dim_; }
    double half_width() const { return half_width_; }
    int nodes() const { return nodes_; }
    double spacing() const { return 2.0 * half_width_ / (nodes_ - 1); }
    double cell_volume() const { return std::pow(spacing(), dim_); }
    std::size_t size() const { return dim_ == 1 ? std::size_t(nodes_) : std::size_t(nodes_) * std::size_t(nodes_); }

    /// Flat-index stride along an axis.
    std::size_t stride(int axis) const { return axis == 0 ? 1 : std::size_t(nodes_); }

    int axis_index(std::size_t idx, int axis) const {
        return axis == 0 ? int(idx % std::size_t(nodes_)) : int(idx / std::size_t(nodes_));
    }

    double coordinate(int i) const { return -half_width_ + i * spacing(); }

    Point point(std::size_t idx) const {
        Point p{coordinate(axis_index(idx, 0)), 0.0};
        if (dim_ == 2) p[1] = coordinate(axis_index(idx, 1));
        return p;
    }

    std::size_t index(int ix, int iy = 0) const { return std::size_t(iy) * std::size_t(nodes_) + std::size_t(ix); }

    /// Index of the node nearest to p, clamped to the box.
    std::size_t nearest(const Point& p) const {
        auto snap = [&](double x) { return std::clamp(int(std::lround((x + half_width_) / spacing())), 0, nodes_ - 1); };
        return dim_ == 1 ? index(snap(p[0])) : index(snap(p[0]), snap(p[1]));
    }

    bool on_boundary(std::size_t idx) const {
        for (int ax = 0; ax < dim_; ++ax) {
            int i = axis_index(idx, ax);
            if (i == 0 || i == nodes_ - 1) return true;
        }
        return false;
    }

    /// Composite trapezoidal weight of a node.
    double weight(std::size_t idx) const {
        double w = cell_volume();
        for (int ax = 0; ax < dim_; ++ax) {
            int i = axis_index(idx, ax);
            if (i == 0 || i == nodes_ - 1) w *= 0.5;
        }
        return w;
    }

    /// Distance from p to the nearest face of the box (negative outside).
    double inner_margin(const Point& p) const {
        double m = half_width_ - std::abs(p[0]);
        if (dim_ == 2) m = std::min(m, half_width_ - std::abs(p[1]));
        return m;
    }

    friend bool operator==(const Domain&, const Domain&) = default;

private:
    int dim_;
    double half_width_;
    int nodes_;
};

/// Real values sampled at every node of a Domain. Immutable once built.
class GridField {
public:
    explicit GridField(const Domain& dom) : dom_(dom), values_(dom.size(), 0.0) {}

    GridField(const Domain& dom, std::vector<double> values) : dom_(dom), values_(std::move(values)) {
        if (values_.size() != dom_.size()) throw ConfigError("field size does not match domain");
        for (double v : values_)
            if (!std::isfinite(v)) throw DomainError("field contains a non-finite value");
    }

    static GridField from_function(const Domain& dom, const std::function<double(const Point&)>& f) {
        std::vector<double> v(dom.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(dom.point(i));
        return GridField(dom, std::move(v));
    }

    const Domain& domain() const { return dom_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const { return values_; }

    double max() const { return *std::max_element(values_.begin(), values_.end()); }
    double min() const { return *std::min_element(values_.begin(), values_.end()); }

    bool boundary_zero() const {
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (dom_.on_boundary(i) && values_[i] != 0.0) return false;
        return true;
    }

private:
    Domain dom_;
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Quadrature and stencils. The span overloads are the kernels used by the
// solvers; the GridField overloads are the public surface.

inline double integrate(const Domain& dom, std::span<const double> f) {
    return pairwise_sum(f.size(), [&](std::size_t i) { return dom.weight(i) * f[i]; });
}

inline double integrate(const GridField& f) { return integrate(f.domain(), f.values()); }

/// sum over grid edges of (f_a - f_b)(g_a - g_b) h^{N-2}: the discrete
/// counterpart of int grad f . grad g.
inline double gradient_form(const Domain& dom, std::span<const double> f, std::span<const double> g) {
    const int m = dom.nodes();
    const double scale = std::pow(dom.spacing(), dom.dim() - 2);
    return scale * pairwise_sum(f.size(), [&](std::size_t i) {
        double s = 0.0;
        for (int ax = 0; ax < dom.dim(); ++ax) {
            if (dom.axis_index(i, ax) == m - 1) continue;
            const std::size_t j = i + dom.stride(ax);
            s += (f[j] - f[i]) * (g[j] - g[i]);
        }
        return s;
    });
}

inline double gradient_energy(const Domain& dom, std::span<const double> f) { return gradient_form(dom, f, f); }

inline double weak_gradient_energy(const GridField& f) { return gradient_energy(f.domain(), f.values()); }

inline double gradient_form(const GridField& f, const GridField& g) {
    return gradient_form(f.domain(), f.values(), g.values());
}

/// (2N+1)-point Laplacian at interior nodes; boundary nodes are set to 0.
inline void laplacian(const Domain& dom, std::span<const double> f, std::span<double> out) {
    const double inv_h2 = 1.0 / (dom.spacing() * dom.spacing());
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (dom.on_boundary(i)) {
            out[i] = 0.0;
            continue;
        }
        double s = 0.0;
        for (int ax = 0; ax < dom.dim(); ++ax) {
            const std::size_t st = dom.stride(ax);
            s += f[i + st] + f[i - st] - 2.0 * f[i];
        }
        out[i] = s * inv_h2;
    }
}

inline GridField laplacian(const GridField& f) {
    std::vector<double> out(f.size());
    laplacian(f.domain(), f.values(), out);
    return GridField(f.domain(), std::move(out));
}

// ---------------------------------------------------------------------------
// Coefficient descriptors.

enum class AlphaKind { zero, exponential, well };
enum class BKind { zero, rational, exponential, compact };

/// alpha(x) = a_inf - a(x).
///   exponential: amplitude * exp(-rate |x|)
///   well:        amplitude on B_radius(0), mollified across one grid cell
struct AlphaDescriptor {
    AlphaKind kind = AlphaKind::zero;
    double amplitude = 0.0;
    double rate = 1.0;
    double radius = 1.0;
};

///   rational:    amplitude / (1 + |x|)^exponent
///   exponential: amplitude * exp(-rate |x|)
///   compact:     amplitude * (1 - |x|/radius)_+^2
struct BDescriptor {
    BKind kind = BKind::zero;
    double amplitude = 0.0;
    double exponent = 1.0;
    double rate = 1.0;
    double radius = 1.0;
};

/// Open cone {r theta : r > 0, theta in Theta}. For N = 2, Theta is the
/// angular interval (angle_lo, angle_hi) in radians; for N = 1 the angle 0 is
/// the +x direction and pi the -x direction.
struct Cone {
    bool full_space = true;
    double angle_lo = 0.0;
    double angle_hi = 0.0;
    double zeta_angle = 0.0; ///< direction of zeta-bar
    double ball_radius = 0.5; ///< d

    Point zeta() const { return {std::cos(zeta_angle), std::sin(zeta_angle)}; }

    bool contains_angle(double phi) const {
        if (full_space) return true;
        const double two_pi = 2.0 * std::numbers::pi;
        double rel = std::fmod(phi - angle_lo, two_pi);
        if (rel < 0) rel += two_pi;
        return rel <= std::fmod(angle_hi - angle_lo + two_pi, two_pi) + 1e-12;
    }
};

struct CoefficientPair {
    double a_inf = 1.0;
    AlphaDescriptor alpha;
    BDescriptor b;
    double a0 = 1.0;  ///< declared infimum of a
    double eta = 0.5; ///< decay exponent of the cone bound
    double h4_c = 1.0;
    Cone cone;

    /// alpha at radius r; mollifier_width is the grid spacing for wells.
    double alpha_at(double r, double mollifier_width) const {
        switch (alpha.kind) {
        case AlphaKind::zero:
            return 0.0;
        case AlphaKind::exponential:
            return alpha.amplitude * std::exp(-alpha.rate * r);
        case AlphaKind::well: {
            const double t = (r - alpha.radius) / mollifier_width;
            if (t <= -0.5) return alpha.amplitude;
            if (t >= 0.5) return 0.0;
            return alpha.amplitude * 0.5 * (1.0 - std::sin(std::numbers::pi * t));
        }
        }
        return 0.0;
    }

    double a_at(double r, double mollifier_width) const { return a_inf - alpha_at(r, mollifier_width); }

    double b_at(double r) const {
        switch (b.kind) {
        case BKind::zero:
            return 0.0;
        case BKind::rational:
            return b.amplitude / std::pow(1.0 + r, b.exponent);
        case BKind::exponential:
            return b.amplitude * std::exp(-b.rate * r);
        case BKind::compact: {
            const double s = std::max(0.0, 1.0 - r / b.radius);
            return b.amplitude * s * s;
        }
        }
        return 0.0;
    }

    /// sup of b over R^N; every family peaks at the origin.
    double b_sup() const { return std::max(0.0, b_at(0.0)); }

    /// Structural checks on the descriptors (not the hypotheses).
    void validate() const {
        auto finite = [](double x) { return std::isfinite(x); };
        if (!(a_inf > 0.0) || !finite(a_inf)) throw ConfigError("a_inf must be positive");
        if (!finite(alpha.amplitude)) throw ConfigError("alpha amplitude must be finite");
        if (alpha.kind == AlphaKind::exponential && !(alpha.rate > 0.0)) throw ConfigError("alpha rate must be positive");
        if (alpha.kind == AlphaKind::well && !(alpha.radius > 0.0)) throw ConfigError("well radius must be positive");
        if (!finite(b.amplitude)) throw ConfigError("b amplitude must be finite");
        if (b.kind == BKind::rational && !(b.exponent > 0.0)) throw ConfigError("b exponent must be positive");
        if (b.kind == BKind::exponential && !(b.rate > 0.0)) throw ConfigError("b rate must be positive");
        if (b.kind == BKind::compact && !(b.radius > 0.0)) throw ConfigError("b radius must be positive");
        if (!finite(a0) || !finite(eta) || !finite(h4_c)) throw ConfigError("a0, eta, c must be finite");
    }
};

/// Constant coefficients a = a_inf, b = 0: the limit problem.
inline CoefficientPair limit_pair(double a_inf) {
    CoefficientPair pair;
    pair.a_inf = a_inf;
    pair.a0 = a_inf;
    return pair;
}

struct SampledCoefficients {
    GridField a;
    GridField b;
};

inline SampledCoefficients sample(const CoefficientPair& pair, const Domain& dom) {
    pair.validate();
    if (pair.b.kind != BKind::zero && pair.b.amplitude < 0.0) throw ConfigError("b amplitude must be nonnegative");
    const double h = dom.spacing();
    auto a = GridField::from_function(dom, [&](const Point& x) { return pair.a_at(norm(x), h); });
    auto b = GridField::from_function(dom, [&](const Point& x) { return pair.b_at(norm(x)); });
    return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// Hypothesis validation.

struct HypothesisEntry {
    std::string name;
    bool pass = false;
    bool surrogate = false; ///< a finite stand-in for a limit statement
    std::string detail;
};

struct HypothesisReport {
    std::vector<HypothesisEntry> entries;

    bool all_pass() const {
        return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
    }

    const HypothesisEntry& at(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return e;
        throw ConfigError("no hypothesis entry named " + name);
    }
};

namespace detail {

/// Directions sampled for N = 1 (+x, -x) or N = 2 (a ring of rays).
inline std::vector<double> ray_angles(int dim, int count) {
    if (dim == 1) return {0.0, std::numbers::pi};
    std::vector<double> out;
    for (int k = 0; k < count; ++k) out.push_back(2.0 * std::numbers::pi * k / count);
    return out;
}

} // namespace detail

/// Samples (h1)-(h4) on the box; failures are report entries, not errors.
inline HypothesisReport check_hypotheses(const CoefficientPair& pair, const Domain& dom, double tol) {
    pair.validate();
    const double h = dom.spacing();
    const double L = dom.half_width();
    constexpr int kShells = 8;
    constexpr int kRadii = 256;
    const auto angles = detail::ray_angles(dom.dim(), 64);

    HypothesisReport rep;
    std::ostringstream msg;

    // (h1): sup over each outer shell of |a - a_inf| and of b must shrink.
    {
        bool ok = true;
        double prev_a = std::numeric_limits<double>::infinity();
        double prev_b = prev_a;
        double first_a = 0, first_b = 0, last_a = 0, last_b = 0;
        for (int s = 0; s < kShells; ++s) {
            const double r = 0.5 * L + 0.5 * L * s / (kShells - 1);
            // every family is radial, so one sample per shell is exact
            const double da = std::abs(pair.a_at(r, h) - pair.a_inf);
            const double bv = std::abs(pair.b_at(r));
            if (da > prev_a + tol || bv > prev_b + tol) ok = false;
            if (s == 0) {
                first_a = da;
                first_b = bv;
            }
            last_a = da;
            last_b = bv;
            prev_a = da;
            prev_b = bv;
        }
        if (!(last_a < first_a || last_a <= tol)) ok = false;
        if (!(last_b < first_b || last_b <= tol)) ok = false;
        msg.str("");
        msg << "outer shells: |a-a_inf| " << first_a << " -> " << last_a << ", b " << first_b << " -> " << last_b;
        rep.entries.push_back({"h1", ok, true, msg.str()});
    }

    // (h2): a0 > 0, alpha >= 0, a0 <= inf a.
    {
        double min_a = std::numeric_limits<double>::infinity();
        double min_alpha = min_a;
        for (std::size_t i = 0; i < dom.size(); ++i) {
            const double r = norm(dom.point(i));
            min_a = std::min(min_a, pair.a_at(r, h));
            min_alpha = std::min(min_alpha, pair.alpha_at(r, h));
        }
        const bool ok = pair.a0 > 0.0 && min_alpha >= -tol && pair.a0 <= min_a + tol;
        msg.str("");
        msg << "a0=" << pair.a0 << " sampled min a=" << min_a << " min alpha=" << min_alpha;
        rep.entries.push_back({"h2", ok, false, msg.str()});
    }

    // (h3): b >= 0 and bounded.
    {
        double min_b = std::numeric_limits<double>::infinity();
        double max_b = -min_b;
        for (std::size_t i = 0; i < dom.size(); ++i) {
            const double v = pair.b_at(norm(dom.point(i)));
            min_b = std::min(min_b, v);
            max_b = std::max(max_b, v);
        }
        const bool ok = min_b >= -tol && std::isfinite(max_b);
        msg.str("");
        msg << "sampled b in [" << min_b << ", " << max_b << "]";
        rep.entries.push_back({"h3", ok, false, msg.str()});
    }

    // (h4): eta range, cone geometry, alpha bound on rays, b e^{eta r} growth.
    {
        const bool eta_ok = pair.eta > 0.0 && pair.a0 > 0.0 && pair.eta < std::sqrt(pair.a0);

        bool geometry_ok = pair.cone.ball_radius >= 0.5 && pair.cone.contains_angle(pair.cone.zeta_angle);
        if (!pair.cone.full_space) {
            // distance from zeta-bar to each bounding ray of the cone
            for (double edge : {pair.cone.angle_lo, pair.cone.angle_hi}) {
                const double diff = std::abs(std::remainder(pair.cone.zeta_angle - edge, 2.0 * std::numbers::pi));
                const double dist = diff >= std::numbers::pi / 2 ? 1.0 : std::sin(diff);
                if (dom.dim() == 2 && dist < pair.cone.ball_radius - 1e-12) geometry_ok = false;
            }
            if (dom.dim() == 1) geometry_ok = geometry_ok && pair.cone.ball_radius <= 1.0;
        }

        bool alpha_ok = true;
        bool growth_ok = true;
        double worst_alpha = 0.0;
        int rays = 0;
        for (double phi : angles) {
            if (!pair.cone.contains_angle(phi)) continue;
            ++rays;
            for (int j = 0; j <= kRadii; ++j) {
                const double r = L * j / kRadii;
                const double excess = pair.alpha_at(r, h) - pair.h4_c * std::exp(-pair.eta * r);
                worst_alpha = std::max(worst_alpha, excess);
                if (excess > tol) alpha_ok = false;
            }
            double prev = -std::numeric_limits<double>::infinity();
            for (int s = 0; s < kShells; ++s) {
                const double r = 0.5 * L + 0.5 * L * s / (kShells - 1);
                const double g = pair.b_at(r) * std::exp(pair.eta * r);
                if (!(g > prev)) growth_ok = false;
                prev = g;
            }
        }
        if (rays == 0) alpha_ok = growth_ok = false;
        msg.str("");
        msg << "eta " << (eta_ok ? "ok" : "out of (0, sqrt(a0))") << "; cone geometry " << (geometry_ok ? "ok" : "fails")
            << "; max alpha - c e^{-eta r} = " << worst_alpha << "; b e^{eta r} growth over outer shells "
            << (growth_ok ? "monotone" : "not monotone");
        rep.entries.push_back({"h4", eta_ok && geometry_ok && alpha_ok && growth_ok, true, msg.str()});
    }
    return rep;
}

// ---------------------------------------------------------------------------
// CSV field dump: first row "N,L,M", then row-major values (one grid row per
// line for N = 2).

inline void write_field_csv(std::ostream& os, const GridField& f) {
    const Domain& d = f.domain();
    os.precision(17);
    os << d.dim() << ',' << d.half_width() << ',' << d.nodes() << '\n';
    const int m = d.nodes();
    const int rows = d.dim() == 1 ? 1 : m;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < m; ++c) {
            if (c) os << ',';
            os << f[std::size_t(r) * std::size_t(m) + std::size_t(c)];
        }
        os << '\n';
    }
}

inline GridField read_field_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty field CSV");
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream head(line);
    int dim = 0, m = 0;
    double L = 0;
    if (!(head >> dim >> L >> m)) throw ConfigError("malformed field CSV header");
    Domain dom(dim, L, m);
    std::vector<double> v;
    v.reserve(dom.size());
    while (std::getline(is, line)) {
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double x;
        while (row >> x) v.push_back(x);
    }
    return GridField(dom, std::move(v));
}

} // namespace bumpforge
