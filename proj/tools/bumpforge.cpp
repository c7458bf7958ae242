// Command-line front end. Exit codes: 0 ok, 1 solver failure, 2 hypothesis
// check failed, 64 usage or configuration error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bumpforge/config.hpp"
#include "bumpforge/diagnostics.hpp"

using json = nlohmann::ordered_json;
using namespace bumpforge;

namespace {

constexpr int kOk = 0;
constexpr int kSolver = 1;
constexpr int kHypotheses = 2;
constexpr int kUsage = 64;

struct Flags {
    std::string config;
    std::vector<std::string> set;
    std::string out, csv, field;
    std::string seed, dim, half_width, nodes, p, q, amplitude, a_inf;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "INI file");
    sub->add_option("--set", f.set, "section.key=value override (repeatable)");
    sub->add_option("--out", f.out, "JSON summary path (default stdout)");
    sub->add_option("--csv", f.csv, "CSV table path");
    sub->add_option("--field", f.field, "CSV field dump path");
    sub->add_option("--seed", f.seed, "random seed");
    sub->add_option("--N", f.dim, "dimension");
    sub->add_option("--L", f.half_width, "box half-width");
    sub->add_option("--M", f.nodes, "nodes per axis");
    sub->add_option("--p", f.p, "focusing exponent");
    sub->add_option("--q", f.q, "competing exponent");
    sub->add_option("--C", f.amplitude, "b amplitude");
}

RunConfig resolve(const Flags& f) {
    RunConfig c;
    if (!f.config.empty()) {
        std::ifstream is(f.config);
        if (!is) throw ConfigError("cannot open config '" + f.config + "'");
        c = parse_config(is);
    }
    auto put = [&](const char* section, const char* key, const std::string& v) {
        if (!v.empty()) apply_setting(c, section, key, v);
    };
    for (const auto& s : f.set) {
        const auto dot = s.find('.'), eq = s.find('=');
        if (dot == std::string::npos || eq == std::string::npos || dot > eq)
            throw ConfigError("--set expects section.key=value, got '" + s + "'");
        apply_setting(c, s.substr(0, dot), s.substr(dot + 1, eq - dot - 1), s.substr(eq + 1));
    }
    put("run", "seed", f.seed);
    put("domain", "N", f.dim);
    put("domain", "L", f.half_width);
    put("domain", "M", f.nodes);
    put("problem", "p", f.p);
    put("problem", "q", f.q);
    put("coefficients", "b_amplitude", f.amplitude);
    put("coefficients", "a_inf", f.a_inf);
    if (!f.out.empty()) c.json_path = f.out;
    if (!f.csv.empty()) c.csv_path = f.csv;
    if (!f.field.empty()) c.field_path = f.field;
    c.validate();
    return c;
}

/// Parallelism cap. Everything runs on one thread, so the value is only
/// validated.
void check_threads_env() {
    if (const char* v = std::getenv("BUMPFORGE_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(v, &end, 10);
        if (end == v || *end != '\0' || n < 1) throw ConfigError("BUMPFORGE_THREADS must be a positive integer");
    }
}

json point_json(const Point& x, int dim) { return dim == 1 ? json::array({x[0]}) : json::array({x[0], x[1]}); }

json thresholds_json(const ThresholdSet& t) {
    return {{"delta", t.delta}, {"R", t.R}, {"B1", t.B1}, {"eta_s", t.eta_s}};
}

json config_json(const RunConfig& c) {
    json j = json::object();
    for (const auto& [section, body] : settings(c)) {
        json s = json::object();
        for (const auto& [k, v] : body) s[k] = v;
        j[section] = s;
    }
    return j;
}

json energy_json(const EnergyBreakdown& e) {
    return {{"kinetic", e.kinetic}, {"potential", e.potential}, {"competing", e.competing},
            {"focusing", e.focusing}, {"total", e.total}};
}

json inner_json(const InnerSolveResult& r, const BumpLayout& layout, const Problem& pb) {
    const int dim = pb.domain().dim();
    json centers = json::array(), lambdas = json::array(), lres = json::array();
    for (const auto& c : layout.centers) centers.push_back(point_json(c, dim));
    for (const auto& m : r.multipliers) {
        lambdas.push_back(point_json(m.lambda, dim));
        lres.push_back(m.residual);
    }
    json bary = json::array();
    for (const auto& b : r.residuals.barycenters) bary.push_back(point_json(b, dim));
    return {{"k", layout.size()},
            {"centers", centers},
            {"radius", layout.radius},
            {"mu", r.mu},
            {"energy", energy_json(action_I(pb, r.u.values()))},
            {"bump_energy", r.bump_energy},
            {"lambdas", lambdas},
            {"lambda_fit_residual", lres},
            {"max_lambda", r.max_multiplier()},
            {"residuals", {{"nehari", r.residuals.nehari}, {"barycenters", bary}}},
            {"stationarity", r.stationarity},
            {"submerged_residual", r.submerged_residual},
            {"iterations", r.iterations},
            {"converged", r.converged}};
}

void emit(const RunConfig& c, const json& j) {
    const std::string text = j.dump(2) + "\n";
    if (c.json_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream os(c.json_path);
    if (!os) throw ConfigError("cannot write '" + c.json_path + "'");
    os << text;
}

void dump_field(const RunConfig& c, const GridField& u) {
    if (c.field_path.empty()) return;
    std::ofstream os(c.field_path);
    if (!os) throw ConfigError("cannot write '" + c.field_path + "'");
    write_field_csv(os, u);
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(detail::parse_double(item));
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

BumpLayout parse_centers(const std::string& s, int dim, double radius) {
    BumpLayout lay{{}, radius};
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) {
        const auto v = parse_list(item);
        if (int(v.size()) != dim) throw ConfigError("center '" + item + "' has the wrong number of coordinates");
        lay.centers.push_back(Point{v[0], dim == 2 ? v[1] : 0.0});
    }
    if (lay.centers.empty()) throw ConfigError("no centers given");
    return lay;
}

/// Shared setup of the solver subcommands.
struct Context {
    RunConfig cfg;
    Domain dom;
    LimitPack pack;
    Problem pb;
    ThresholdSet th;

    explicit Context(RunConfig c)
        : cfg(std::move(c)), dom(cfg.domain()), pack(solve_ground_state(cfg.pair.a_inf, cfg.p, dom)),
          pb(make_problem(cfg.pair, dom, cfg.p, cfg.q)), th(resolve_thresholds(cfg, pack)) {}

    json header(const char* command) const {
        return {{"command", command}, {"config", config_json(cfg)}, {"thresholds", thresholds_json(th)},
                {"m_inf", pack.m_inf}};
    }
};

int run_hypotheses(const Flags& f, double tol) {
    const auto cfg = resolve(f);
    const auto dom = cfg.domain();
    const auto rep = check_hypotheses(cfg.pair, dom, tol);
    json entries = json::array();
    for (const auto& e : rep.entries)
        entries.push_back({{"name", e.name}, {"pass", e.pass}, {"surrogate", e.surrogate}, {"detail", e.detail}});
    json j = {{"command", "hypotheses"}, {"config", config_json(cfg)}};
    try {
        const auto pack = solve_ground_state(cfg.pair.a_inf, cfg.p, dom);
        j["thresholds"] = thresholds_json(resolve_thresholds(cfg, pack));
    } catch (const ConfigError& e) {
        j["thresholds"] = nullptr;
        j["thresholds_error"] = e.what();
    }
    j["tolerance"] = tol;
    j["entries"] = entries;
    j["all_pass"] = rep.all_pass();
    emit(cfg, j);
    return rep.all_pass() ? kOk : kHypotheses;
}

int run_limit(const Flags& f) {
    auto cfg = resolve(f);
    const double eta = cfg.pair.eta;
    cfg.pair = limit_pair(cfg.pair.a_inf);
    cfg.pair.eta = std::min(eta, 0.5 * std::sqrt(cfg.pair.a_inf));
    const Context ctx(cfg);
    const auto& prof = ctx.pack.profile;
    json j = ctx.header("limit");
    j["a_inf"] = prof.a_inf;
    j["p"] = prof.p;
    j["N"] = prof.dim;
    j["peak"] = ctx.pack.peak;
    j["m_inf"] = ctx.pack.m_inf;
    j["sigma"] = prof.sigma;
    j["kappa"] = prof.kappa;
    j["d0"] = prof.prefactor;
    emit(ctx.cfg, j);
    if (!ctx.cfg.csv_path.empty()) {
        std::ofstream os(ctx.cfg.csv_path);
        if (!os) throw ConfigError("cannot write '" + ctx.cfg.csv_path + "'");
        os.precision(17);
        os << "r,w,dw\n";
        for (std::size_t i = 0; i < prof.w.size(); ++i) os << prof.radius(i) << ',' << prof.w[i] << ',' << prof.dw[i] << '\n';
    }
    dump_field(ctx.cfg, ctx.pack.w_grid);
    return kOk;
}

int run_solve(const Flags& f, const std::string& centers, int k) {
    const Context ctx(resolve(f));
    const auto layout = parse_centers(centers, ctx.dom.dim(), ctx.th.R);
    if (k != 0 && std::size_t(k) != layout.size())
        throw ConfigError("--k " + std::to_string(k) + " does not match " + std::to_string(layout.size()) + " centers");
    validate_layout(layout, ctx.dom, 0.0);
    InnerOptions opts = ctx.cfg.inner;
    opts.require_convergence = false;
    const auto r = minimize_on_S(ctx.pb, layout, translate_guess(layout, ctx.pack, ctx.pb, ctx.th), ctx.th, opts);
    json j = ctx.header("solve");
    j["result"] = inner_json(r, layout, ctx.pb);
    j["mu_minus_k_m_inf"] = r.mu - double(layout.size()) * ctx.pack.m_inf;
    emit(ctx.cfg, j);
    dump_field(ctx.cfg, r.u);
    return r.converged ? kOk : kSolver;
}

json maxmin_json(const MaxMinReport& rep, const Context& ctx) {
    json starts = json::array();
    for (const auto& s : rep.starts) {
        json a = json::array(), b = json::array();
        for (const auto& c : s.start.centers) a.push_back(point_json(c, ctx.dom.dim()));
        for (const auto& c : s.best.centers) b.push_back(point_json(c, ctx.dom.dim()));
        starts.push_back({{"provenance", s.provenance}, {"start", a}, {"best", b}, {"mu", s.converged ? json(s.mu) : json(nullptr)},
                          {"evaluations", s.evaluations}, {"converged", s.converged}});
    }
    return {{"k", rep.k},
            {"mu", rep.mu},
            {"mu_minus_k_m_inf", rep.mu - rep.k * ctx.pack.m_inf},
            {"provenance", rep.provenance},
            {"flat", rep.flat},
            {"spread", rep.spread},
            {"region_half_width", rep.region_half_width},
            {"evaluations", rep.evaluations},
            {"refined", rep.refined},
            {"result", inner_json(rep.best, rep.layout, ctx.pb)},
            {"starts", starts}};
}

int run_maxmin(const Flags& f, int k) {
    const Context ctx(resolve(f));
    const auto rep = outer_maximize(k, ctx.pb, ctx.cfg.pair, ctx.th, ctx.pack, ctx.cfg.outer);
    json j = ctx.header("maxmin");
    j["maxmin"] = maxmin_json(rep, ctx);
    emit(ctx.cfg, j);
    dump_field(ctx.cfg, rep.best.u);
    return rep.best.converged ? kOk : kSolver;
}

int run_ladder(const Flags& f, int kmax, double tol) {
    if (kmax < 1) throw ConfigError("--kmax must be at least 1");
    const Context ctx(resolve(f));
    std::vector<MaxMinReport> reps;
    json levels = json::array();
    for (int k = 1; k <= kmax; ++k) {
        reps.push_back(outer_maximize(k, ctx.pb, ctx.cfg.pair, ctx.th, ctx.pack, ctx.cfg.outer));
        levels.push_back(maxmin_json(reps.back(), ctx));
    }
    const auto rungs = ladder_check(reps, ctx.pack.m_inf, tol);
    json rj = json::array();
    bool all = true;
    for (const auto& r : rungs) {
        rj.push_back({{"k", r.k}, {"margin", r.margin}, {"pass", r.pass}});
        all = all && r.pass;
    }
    json j = ctx.header("ladder");
    j["tolerance"] = tol;
    j["rungs"] = rj;
    j["all_pass"] = all;
    j["levels"] = levels;
    emit(ctx.cfg, j);
    return kOk;
}

json trend_json(const TrendStat& t) { return {{"violations", t.violations}, {"major", t.major}, {"pass", t.pass}}; }

int run_scan(const Flags& f, const std::string& list, int k) {
    const Context ctx(resolve(f));
    const auto amps = parse_list(list);
    ScanSetup setup{ctx.cfg.pair, ctx.dom, ctx.cfg.p, ctx.cfg.q, k, ctx.cfg.outer};
    const auto rep = b_scan(setup, amps, ctx.pack);
    std::ostringstream csv;
    csv.precision(17);
    csv << "C,mu,max_lambda,min_separation,shape,decay_rate,converged\n";
    json rows = json::array();
    for (const auto& r : rep.rows) {
        csv << r.C << ',' << r.mu << ',' << r.max_lambda << ',' << r.min_separation << ',' << r.shape << ','
            << r.decay_rate << ',' << (r.converged ? 1 : 0) << '\n';
        rows.push_back({{"C", r.C}, {"mu", r.mu}, {"max_lambda", r.max_lambda}, {"min_separation", r.min_separation},
                        {"shape", r.shape}, {"decay_rate", r.decay_rate}, {"converged", r.converged}});
    }
    json j = ctx.header("scan");
    j["k"] = k;
    j["rows"] = rows;
    j["lambda_trend"] = trend_json(rep.lambda_trend);
    j["separation_trend"] = trend_json(rep.separation_trend);
    emit(ctx.cfg, j);
    if (!ctx.cfg.csv_path.empty()) {
        std::ofstream os(ctx.cfg.csv_path);
        if (!os) throw ConfigError("cannot write '" + ctx.cfg.csv_path + "'");
        os << csv.str();
    }
    return kOk;
}

int run_probe(const Flags& f, const std::string& list, const ProbeOptions& opts) {
    const auto cfg = resolve(f);
    const auto sizes = parse_list(list);
    const auto v = ground_state_probe(cfg.pair, cfg.dim, sizes, opts);
    json levels = json::array();
    for (const auto& l : v.levels) {
        json ce = json::array();
        for (const auto& c : l.start_center) ce.push_back(point_json(c, cfg.dim));
        levels.push_back({{"L", l.half_width},
                          {"m_candidate", l.m_candidate},
                          {"reference", l.reference},
                          {"margin", l.margin},
                          {"center", point_json(l.center, cfg.dim)},
                          {"spread", l.spread},
                          {"start_energy", l.start_energy},
                          {"start_center", ce}});
    }
    json j = {{"command", "probe"}, {"config", config_json(cfg)}};
    const Domain dom = cfg.domain();
    j["thresholds"] = thresholds_json(resolve_thresholds(cfg, solve_ground_state(cfg.pair.a_inf, cfg.p, dom)));
    j["options"] = {{"spacing", opts.spacing}, {"budget", opts.budget}, {"tolerance", opts.tolerance}};
    j["verdict"] = to_string(v.verdict);
    j["escape"] = v.escape;
    j["flat"] = v.flat;
    j["drift"] = v.drift;
    j["center_shift"] = v.center_shift;
    j["levels"] = levels;
    emit(cfg, j);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bumpforge: multi-bump standing waves by max-min"};
    app.require_subcommand(1);
    Flags f;

    double hyp_tol = 1e-9;
    auto* hyp = app.add_subcommand("hypotheses", "sample-check the coefficient hypotheses");
    add_common(hyp, f);
    hyp->add_option("--tol", hyp_tol, "comparison tolerance");

    auto* lim = app.add_subcommand("limit", "ground state of the constant-coefficient problem");
    add_common(lim, f);
    lim->add_option("--a-inf", f.a_inf, "a_inf");

    std::string centers;
    auto* sol = app.add_subcommand("solve", "inner minimization for fixed centers");
    add_common(sol, f);
    sol->add_option("--centers", centers, "x1,y1;x2,y2;...")->required();
    int sol_k = 0;
    sol->add_option("--k", sol_k, "bump count, checked against --centers");

    int k = 1;
    auto* mm = app.add_subcommand("maxmin", "maximize mu over k-bump layouts");
    add_common(mm, f);
    mm->add_option("--k", k, "bump count")->required();

    int kmax = 2;
    double ladder_tol = 0.0;
    auto* lad = app.add_subcommand("ladder", "mu_1..mu_K and the ladder inequalities");
    add_common(lad, f);
    lad->add_option("--kmax", kmax, "largest bump count");
    lad->add_option("--tol", ladder_tol, "discretization tolerance");

    std::string amps = "0.2,0.1,0.05,0.025";
    int scan_k = 2;
    auto* scan = app.add_subcommand("scan", "b-amplitude scan with trend statistics");
    add_common(scan, f);
    scan->add_option("--amplitudes", amps, "descending comma-separated C values");
    scan->add_option("--k", scan_k, "bump count");

    std::string sizes = "20,30";
    ProbeOptions popts;
    auto* probe = app.add_subcommand("probe", "ground-state existence or escape");
    add_common(probe, f);
    probe->add_option("--sizes", sizes, "box half-widths");
    probe->add_option("--spacing", popts.spacing, "grid spacing");
    probe->add_option("--budget", popts.budget, "descent iterations per start");
    probe->add_option("--tolerance", popts.tolerance, "relative margin for an existence verdict");
    probe->add_flag("--require-decisive", popts.require_decisive, "fail on an indeterminate verdict");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        check_threads_env();
        if (*hyp) return run_hypotheses(f, hyp_tol);
        if (*lim) return run_limit(f);
        if (*sol) return run_solve(f, centers, sol_k);
        if (*mm) return run_maxmin(f, k);
        if (*lad) return run_ladder(f, kmax, ladder_tol);
        if (*scan) return run_scan(f, amps, scan_k);
        if (*probe) {
            const auto cfg = resolve(f);
            popts.p = cfg.p;
            popts.q = cfg.q;
            return run_probe(f, sizes, popts);
        }
    } catch (const ConfigError& e) {
        std::cerr << "bumpforge: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "bumpforge: " << e.what() << '\n';
        return kSolver;
    } catch (const std::exception& e) {
        std::cerr << "bumpforge: " << e.what() << '\n';
        return kSolver;
    }
    return kUsage;
}
