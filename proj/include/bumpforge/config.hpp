#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "bumpforge/decomp.hpp"
#include "bumpforge/field.hpp"
#include "bumpforge/maxmin.hpp"

namespace bumpforge {

/// Everything a CLI run needs. Sections of the INI file map one to one onto
/// the groups below; unknown sections or keys are rejected.
struct RunConfig {
    CoefficientPair pair;
    int dim = 2;
    double half_width = 16.0;
    int nodes = 129;
    double p = 3.0;
    double q = 2.0;
    std::optional<double> delta; ///< threshold overrides
    std::optional<double> R;
    std::optional<double> eta_s;
    InnerOptions inner;
    OuterOptions outer;
    std::string json_path; ///< empty: stdout
    std::string csv_path;
    std::string field_path;

    Domain domain() const { return Domain(dim, half_width, nodes); }

    void validate() const {
        pair.validate();
        if (!(q > 1.0)) throw ConfigError("q must exceed 1");
        if (!(p > q)) throw ConfigError("p must exceed q");
        if (!std::isfinite(p)) throw ConfigError("p must be finite");
        (void)domain();
        if (delta && !(*delta > 0.0)) throw ConfigError("delta override must be positive");
        if (R && !(*R > 0.0)) throw ConfigError("R override must be positive");
        if (eta_s && !(*eta_s > 0.0)) throw ConfigError("eta_s override must be positive");
    }
};

namespace detail {

inline AlphaKind parse_alpha_kind(const std::string& s) {
    if (s == "zero") return AlphaKind::zero;
    if (s == "exponential") return AlphaKind::exponential;
    if (s == "well") return AlphaKind::well;
    throw ConfigError("unknown alpha kind '" + s + "'");
}

inline BKind parse_b_kind(const std::string& s) {
    if (s == "zero") return BKind::zero;
    if (s == "rational") return BKind::rational;
    if (s == "exponential") return BKind::exponential;
    if (s == "compact") return BKind::compact;
    throw ConfigError("unknown b kind '" + s + "'");
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("expected a boolean, got '" + s + "'");
}

inline double parse_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + s + "'");
    }
    if (used != s.size()) throw ConfigError("expected a number, got '" + s + "'");
    return v;
}

inline long long parse_int(const std::string& s) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("expected an integer, got '" + s + "'");
    }
    if (used != s.size()) throw ConfigError("expected an integer, got '" + s + "'");
    return v;
}

} // namespace detail

inline const char* to_string(AlphaKind k) {
    switch (k) {
    case AlphaKind::zero:
        return "zero";
    case AlphaKind::exponential:
        return "exponential";
    case AlphaKind::well:
        return "well";
    }
    return "zero";
}

inline const char* to_string(BKind k) {
    switch (k) {
    case BKind::zero:
        return "zero";
    case BKind::rational:
        return "rational";
    case BKind::exponential:
        return "exponential";
    case BKind::compact:
        return "compact";
    }
    return "zero";
}

/// Applies one section.key = value assignment.
inline void apply_setting(RunConfig& c, const std::string& section, const std::string& key, const std::string& v) {
    using namespace detail;
    auto& pr = c.pair;
    const std::string k = section + "." + key;
    if (k == "coefficients.a_inf") pr.a_inf = parse_double(v);
    else if (k == "coefficients.alpha") pr.alpha.kind = parse_alpha_kind(v);
    else if (k == "coefficients.alpha_amplitude") pr.alpha.amplitude = parse_double(v);
    else if (k == "coefficients.alpha_rate") pr.alpha.rate = parse_double(v);
    else if (k == "coefficients.alpha_radius") pr.alpha.radius = parse_double(v);
    else if (k == "coefficients.b") pr.b.kind = parse_b_kind(v);
    else if (k == "coefficients.b_amplitude") pr.b.amplitude = parse_double(v);
    else if (k == "coefficients.b_exponent") pr.b.exponent = parse_double(v);
    else if (k == "coefficients.b_rate") pr.b.rate = parse_double(v);
    else if (k == "coefficients.b_radius") pr.b.radius = parse_double(v);
    else if (k == "coefficients.a0") pr.a0 = parse_double(v);
    else if (k == "coefficients.eta") pr.eta = parse_double(v);
    else if (k == "coefficients.c") pr.h4_c = parse_double(v);
    else if (k == "cone.full") pr.cone.full_space = parse_bool(v);
    else if (k == "cone.angle_lo") pr.cone.angle_lo = parse_double(v);
    else if (k == "cone.angle_hi") pr.cone.angle_hi = parse_double(v);
    else if (k == "cone.zeta") pr.cone.zeta_angle = parse_double(v);
    else if (k == "cone.d") pr.cone.ball_radius = parse_double(v);
    else if (k == "domain.N") c.dim = int(parse_int(v));
    else if (k == "domain.L") c.half_width = parse_double(v);
    else if (k == "domain.M") c.nodes = int(parse_int(v));
    else if (k == "problem.p") c.p = parse_double(v);
    else if (k == "problem.q") c.q = parse_double(v);
    else if (k == "thresholds.delta") c.delta = parse_double(v);
    else if (k == "thresholds.R") c.R = parse_double(v);
    else if (k == "thresholds.eta_s") c.eta_s = parse_double(v);
    else if (k == "solver.energy_tol") c.inner.energy_tol = parse_double(v);
    else if (k == "solver.stationarity_tol") c.inner.stationarity_tol = parse_double(v);
    else if (k == "solver.residual_tol") c.inner.residual_tol = parse_double(v);
    else if (k == "solver.max_iterations") c.inner.max_iterations = int(parse_int(v));
    else if (k == "solver.memory") c.inner.memory = int(parse_int(v));
    else if (k == "solver.block_scheme") c.inner.block_scheme = parse_bool(v);
    else if (k == "outer.radial_starts") c.outer.radial_starts = int(parse_int(v));
    else if (k == "outer.random_starts") c.outer.random_starts = int(parse_int(v));
    else if (k == "outer.max_evaluations") c.outer.max_evaluations = int(parse_int(v));
    else if (k == "outer.flat_tol") c.outer.flat_tol = parse_double(v);
    else if (k == "outer.quadratic_refinement") c.outer.quadratic_refinement = parse_bool(v);
    else if (k == "outer.decay_margin") c.outer.decay_margin = parse_double(v);
    else if (k == "outer.initial_step") c.outer.initial_step = parse_double(v);
    else if (k == "run.seed") c.outer.seed = std::uint64_t(parse_int(v));
    else if (k == "output.json") c.json_path = v;
    else if (k == "output.csv") c.csv_path = v;
    else if (k == "output.field") c.field_path = v;
    else throw ConfigError("unknown setting '" + k + "'");
}

/// Reads an INI stream on top of `base`.
inline RunConfig parse_config(std::istream& is, RunConfig base = {}) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.message() + " at line " + std::to_string(e.line()));
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("setting '" + section + "' outside any section");
        for (const auto& [key, value] : body) apply_setting(base, section, key, value.data());
    }
    base.validate();
    return base;
}

inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
    std::istringstream is(text);
    return parse_config(is, std::move(base));
}

/// Canonical section -> key -> value listing of the resolved configuration.
/// Numbers are written with 17 significant digits so the dump round-trips.
inline std::map<std::string, std::map<std::string, std::string>> settings(const RunConfig& c) {
    auto num = [](double x) {
        std::ostringstream os;
        os.precision(17);
        os << x;
        return os.str();
    };
    auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
    const auto& pr = c.pair;
    std::map<std::string, std::map<std::string, std::string>> s;
    s["coefficients"] = {{"a_inf", num(pr.a_inf)},
                         {"alpha", to_string(pr.alpha.kind)},
                         {"alpha_amplitude", num(pr.alpha.amplitude)},
                         {"alpha_rate", num(pr.alpha.rate)},
                         {"alpha_radius", num(pr.alpha.radius)},
                         {"b", to_string(pr.b.kind)},
                         {"b_amplitude", num(pr.b.amplitude)},
                         {"b_exponent", num(pr.b.exponent)},
                         {"b_rate", num(pr.b.rate)},
                         {"b_radius", num(pr.b.radius)},
                         {"a0", num(pr.a0)},
                         {"eta", num(pr.eta)},
                         {"c", num(pr.h4_c)}};
    s["cone"] = {{"full", flag(pr.cone.full_space)},
                 {"angle_lo", num(pr.cone.angle_lo)},
                 {"angle_hi", num(pr.cone.angle_hi)},
                 {"zeta", num(pr.cone.zeta_angle)},
                 {"d", num(pr.cone.ball_radius)}};
    s["domain"] = {{"N", std::to_string(c.dim)}, {"L", num(c.half_width)}, {"M", std::to_string(c.nodes)}};
    s["problem"] = {{"p", num(c.p)}, {"q", num(c.q)}};
    if (c.delta) s["thresholds"]["delta"] = num(*c.delta);
    if (c.R) s["thresholds"]["R"] = num(*c.R);
    if (c.eta_s) s["thresholds"]["eta_s"] = num(*c.eta_s);
    s["solver"] = {{"energy_tol", num(c.inner.energy_tol)},
                   {"stationarity_tol", num(c.inner.stationarity_tol)},
                   {"residual_tol", num(c.inner.residual_tol)},
                   {"max_iterations", std::to_string(c.inner.max_iterations)},
                   {"memory", std::to_string(c.inner.memory)},
                   {"block_scheme", flag(c.inner.block_scheme)}};
    s["outer"] = {{"radial_starts", std::to_string(c.outer.radial_starts)},
                  {"random_starts", std::to_string(c.outer.random_starts)},
                  {"max_evaluations", std::to_string(c.outer.max_evaluations)},
                  {"flat_tol", num(c.outer.flat_tol)},
                  {"quadratic_refinement", flag(c.outer.quadratic_refinement)},
                  {"decay_margin", num(c.outer.decay_margin)},
                  {"initial_step", num(c.outer.initial_step)}};
    s["run"] = {{"seed", std::to_string(c.outer.seed)}};
    return s;
}

/// Default thresholds for the configured pair, with any overrides applied.
/// B1 follows delta; eta_s defaults from the (possibly overridden) delta.
inline ThresholdSet resolve_thresholds(const RunConfig& c, const LimitPack& pack) {
    ThresholdSet t;
    t.delta = c.delta ? *c.delta : choose_delta(c.pair.a0, c.p, c.q, c.pair.eta);
    t.R = c.R ? *c.R : choose_R(pack, t.delta);
    t.B1 = b1_threshold(t.delta, c.p, c.q);
    t.eta_s = c.eta_s ? *c.eta_s : default_eta_s(c.pair.a0, c.pair.eta, t.delta, c.p);
    if (!thresholds_admissible(t, c.pair.a0, c.p, c.pair.eta)) throw ConfigError("threshold overrides violate the smallness conditions");
    return t;
}

} // namespace bumpforge
