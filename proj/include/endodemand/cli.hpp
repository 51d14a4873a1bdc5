// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "endodemand/buhlmann.hpp"
#include "endodemand/clearing.hpp"
#include "endodemand/closed_forms.hpp"
#include "endodemand/error.hpp"
#include "endodemand/inverse_demand.hpp"
#include "endodemand/io.hpp"
#include "endodemand/sampling.hpp"
#include "endodemand/version.hpp"

namespace endodemand::cli {

enum ExitCode : int { ok = 0, failure = 1, domain_error = 2, convergence_error = 3 };

struct RunOptions {
    std::string command;
    std::string figure;
    std::string config_path;
    std::string output_path;
    std::string law;
    std::optional<double> alpha, eta, lambda, p, k, theta, sigma, mu;
    double x = 1.0;
    double s_max = 3.0;
    std::size_t points = 61;
    std::size_t grid = 2049;
    double tol = 1e-10;
    std::optional<std::uint64_t> seed;
    std::size_t samples = 100000;
    std::size_t assets = 2;
    std::vector<double> ruin_p;
    std::vector<double> s_grid;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Shortest round-trip decimal text for a double.
inline std::string num(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

namespace detail {

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json options_json(const RunOptions& o, const Json& config) {
    Json j;
    j["command"] = o.command;
    j["figure"] = o.figure;
    j["config"] = config;
    j["law"] = o.law;
    j["alpha"] = optional_json(o.alpha);
    j["eta"] = optional_json(o.eta);
    j["lambda"] = optional_json(o.lambda);
    j["p"] = optional_json(o.p);
    j["k"] = optional_json(o.k);
    j["theta"] = optional_json(o.theta);
    j["sigma"] = optional_json(o.sigma);
    j["mu"] = optional_json(o.mu);
    j["x"] = o.x;
    j["s_max"] = o.s_max;
    j["points"] = o.points;
    j["grid"] = o.grid;
    j["tol"] = o.tol;
    j["seed"] = o.seed ? Json(*o.seed) : Json(nullptr);
    j["samples"] = o.samples;
    j["assets"] = o.assets;
    j["ruin_p"] = o.ruin_p;
    j["s_grid"] = o.s_grid;
    return j;
}

/// Config file with a `scenarios` path resolved relative to the file.
inline Json load_config(const std::string& path) {
    if (path.empty()) return Json(nullptr);
    Json cfg = read_json_file(path);
    if (!cfg.is_object()) throw DomainError("config must be a JSON object");
    if (cfg.contains("scenarios") && cfg.at("scenarios").is_string()) {
        std::filesystem::path p = cfg.at("scenarios").get<std::string>();
        if (p.is_relative()) p = std::filesystem::path(path).parent_path() / p;
        cfg["scenarios"] = read_json_file(p);
    }
    return cfg;
}

inline const Json& need(const Json& cfg, const char* key) {
    if (!cfg.is_object()) throw DomainError(std::string("this command needs --config with '") + key + "'");
    if (!cfg.contains(key)) throw DomainError(std::string("config: missing key '") + key + "'");
    return cfg.at(key);
}

inline std::string name_of(const Json& cfg, const char* key) {
    const Json& v = need(cfg, key);
    if (!v.is_string()) throw DomainError(std::string("config: '") + key + "' must name a variable");
    return v.get<std::string>();
}

inline std::uint64_t require_seed(const RunOptions& o) {
    if (!o.seed) throw DomainError("--seed is required for sampled laws");
    if (o.samples < 2) throw DomainError("--samples must be at least 2");
    return *o.seed;
}

inline double need_param(const std::optional<double>& v, const char* flag, const std::string& law) {
    if (!v) throw DomainError("law '" + law + "' needs " + flag);
    return *v;
}

/// Lognormal with mean 1 unless --mu is given.
inline LognormalLaw lognormal_law(const RunOptions& o) {
    double s = need_param(o.sigma, "--sigma", "lognormal");
    if (!(s > 0.0)) throw DomainError("--sigma must be positive");
    return LognormalLaw{o.mu.value_or(-0.5 * s * s), s * s};
}

inline RandomVariable law_variable(const RunOptions& o) {
    const std::string& law = o.law;
    if (law == "poisson") return poisson_variable(need_param(o.lambda, "--lambda", law));
    if (law == "bernoulli") return bernoulli_variable(need_param(o.p, "--p", law));
    if (law == "gamma") return gamma_variable(need_param(o.k, "--k", law), need_param(o.theta, "--theta", law));
    if (law == "lognormal") return sample_one({lognormal_law(o), o.samples, require_seed(o)});
    if (law == "normal") {
        double s = need_param(o.sigma, "--sigma", law);
        Eigen::MatrixXd cov(1, 1);
        cov(0, 0) = s * s;
        return sample_one({NormalLaw{{need_param(o.mu, "--mu", law)}, cov}, o.samples, require_seed(o)});
    }
    if (law.empty()) throw DomainError("give --config or --law");
    throw DomainError("unknown law '" + law + "'");
}

/// Profile from --alpha (linear) or --eta (log, referenced at x).
inline RiskProfile flag_profile(const RunOptions& o) {
    if (o.alpha.has_value() == o.eta.has_value()) throw DomainError("give exactly one of --alpha and --eta");
    if (o.alpha) return linear_profile(*o.alpha, 0.0);
    return log_profile(*o.eta, o.x);
}

struct DemandInputs {
    RandomVariable X;
    RandomVariable q;
    RiskProfile profile;
};

inline DemandInputs demand_inputs(const RunOptions& o, const Json& cfg) {
    if (cfg.is_object()) {
        auto table = scenarios_from_json(need(cfg, "scenarios"));
        return {table.at(name_of(cfg, "X")), table.at(name_of(cfg, "q")), config_profile(cfg)};
    }
    auto q = law_variable(o);
    return {RandomVariable::constant(q.space(), o.x), q, flag_profile(o)};
}

inline ClearingProblem clearing_inputs(const Json& cfg) {
    auto table = scenarios_from_json(need(cfg, "scenarios"));
    return ClearingProblem(table.at(name_of(cfg, "X")), table.at(name_of(cfg, "Z")),
                           config_profile(cfg));
}

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
    if (n < 2) throw DomainError("grids need at least 2 points");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    g.back() = hi;
    return g;
}

inline void check_s_max(const RunOptions& o) {
    if (!(o.s_max > 0.0) || !std::isfinite(o.s_max)) throw DomainError("--s-max must be positive");
}

/// --s-grid if given (nonnegative, increasing), else the uniform grid on [0, s_max].
inline std::vector<double> s_values(const RunOptions& o) {
    if (o.s_grid.empty()) {
        check_s_max(o);
        return uniform_grid(0.0, o.s_max, o.points);
    }
    for (std::size_t i = 0; i < o.s_grid.size(); ++i) {
        if (!(o.s_grid[i] >= 0.0) || !std::isfinite(o.s_grid[i])) throw DomainError("--s-grid values must be >= 0");
        if (i > 0 && !(o.s_grid[i] > o.s_grid[i - 1])) throw DomainError("--s-grid must be increasing");
    }
    return o.s_grid;
}

struct Output {
    std::string header;  // CSV comment line
    Json meta;
};

inline void csv_row(std::ostream& os, std::initializer_list<std::string> cells) {
    bool first = true;
    for (const auto& c : cells) {
        if (!first) os << ',';
        os << c;
        first = false;
    }
    os << '\n';
}

inline void demand_csv(std::ostream& os, const DemandCurve& c) {
    os << "s,f,f_bar,in_domain\n";
    for (std::size_t i = 0; i < c.s_grid.size(); ++i)
        csv_row(os, {num(c.s_grid[i]), num(c.f[i]), num(c.f_bar[i]), c.in_domain[i] ? "1" : "0"});
}

inline void cross_csv(std::ostream& os, const std::vector<CrossImpactNode>& nodes, std::size_t m) {
    for (std::size_t k = 0; k < m; ++k) os << 's' << (k + 1) << ',';
    os << "asset,f,f_bar\n";
    for (const auto& n : nodes)
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t k = 0; k < m; ++k) os << num(n.s[k]) << ',';
            os << (a + 1) << ',' << num(n.f[a]) << ',' << num(n.f_bar[a]) << '\n';
        }
}

inline Json clearing_json(const ClearingResult& r) {
    Json j;
    j["selected"] = r.selected;
    j["roots"] = r.roots;
    j["existence"] = to_string(r.existence);
    j["diagnosis"] = to_string(r.diagnosis);
    j["certificates"] = r.certificates.names();
    j["scanned"] = r.scanned;
    return j;
}

/// I.i.d. lognormal assets on one sample space.
inline std::vector<RandomVariable> iid_lognormal(const LognormalLaw& law, std::size_t assets, std::size_t samples,
                                                 std::uint64_t seed) {
    std::vector<RandomVariable> out;
    for (std::size_t a = 0; a < assets; ++a) {
        // Distinct streams per asset; asset 0 reuses the plain seed.
        std::uint64_t s = seed + 0x9E3779B97F4A7C15ull * a;
        auto v = sample_one({law, samples, s});
        if (!out.empty())
            v = RandomVariable(out.front().space(), std::vector<double>(v.values().begin(), v.values().end()),
                               v.law_floor());
        out.push_back(std::move(v));
    }
    return out;
}

// ---- commands -------------------------------------------------------------

inline void cmd_price(const RunOptions& o, const Json& cfg, std::ostream& os, Output& out) {
    auto p = clearing_inputs(cfg);
    ClearOptions co{o.grid, o.tol, false};
    Json j = out.meta;
    j["result"] = clearing_json(clear(p, co));
    os << j.dump(2) << '\n';
}

inline void cmd_roots(const RunOptions& o, const Json& cfg, std::ostream& os, Output& out) {
    auto p = clearing_inputs(cfg);
    auto roots = find_all_roots(p, o.grid, o.tol);
    Json j = out.meta;
    j["result"] = {{"roots", roots}, {"count", roots.size()}, {"grid", o.grid}, {"tol", o.tol}};
    os << j.dump(2) << '\n';
}

inline void cmd_demand(const RunOptions& o, const Json& cfg, std::ostream& os, Output& out) {
    auto in = demand_inputs(o, cfg);
    DemandProblem dp(in.X, in.q, in.profile);
    ClearOptions co{o.grid, o.tol, false};
    DemandCurve curve;
    if (o.s_grid.empty()) {
        check_s_max(o);
        curve = demand_curve(dp, o.s_max, o.points, co);
    } else {
        curve.s_grid = s_values(o);
        for (double s : curve.s_grid) {
            auto pt = endodemand::detail::evaluate(dp, s, co);
            curve.f.push_back(pt.f);
            curve.f_bar.push_back(pt.f_bar);
            curve.in_domain.push_back(pt.in_domain);
        }
    }
    if (curve.dom_boundary) out.header += " dom_boundary=" + num(*curve.dom_boundary);
    os << out.header << '\n';
    demand_csv(os, curve);
}

inline void cmd_liquidity(const RunOptions& o, const Json& cfg, std::ostream& os, Output& out) {
    auto in = demand_inputs(o, cfg);
    DemandProblem dp(in.X, in.q, in.profile);
    auto sl = liquidity_at_zero(dp);
    Json j = out.meta;
    j["result"] = {{"f_slope", sl.f_slope}, {"f_bar_slope", sl.f_bar_slope}};
    os << j.dump(2) << '\n';
}

inline void cmd_cross_impact(const RunOptions& o, const Json& cfg, std::ostream& os, Output& out) {
    check_s_max(o);
    std::optional<CrossImpactProblem> cp;
    if (cfg.is_object()) {
        auto table = scenarios_from_json(need(cfg, "scenarios"));
        const Json& qs = need(cfg, "q");
        if (!qs.is_array() || qs.empty()) throw DomainError("config: 'q' must be a non-empty array of names");
        std::vector<RandomVariable> q;
        for (const auto& n : qs) {
            if (!n.is_string()) throw DomainError("config: 'q' must be a non-empty array of names");
            q.push_back(table.at(n.get<std::string>()));
        }
        cp.emplace(table.at(name_of(cfg, "X")), std::move(q), config_profile(cfg));
    } else {
        if (o.law != "lognormal") throw DomainError("cross-impact supports --law lognormal or --config");
        if (o.assets < 1) throw DomainError("--assets must be at least 1");
        auto q = iid_lognormal(lognormal_law(o), o.assets, o.samples, require_seed(o));
        cp.emplace(RandomVariable::constant(q.front().space(), o.x), std::move(q), flag_profile(o));
    }
    std::vector<std::vector<double>> grids(cp->assets(), uniform_grid(0.0, o.s_max, o.points));
    auto nodes = cross_impact_grid(*cp, grids, ClearOptions{o.grid, o.tol, false});
    os << out.header << '\n';
    cross_csv(os, nodes, cp->assets());
}

inline void cmd_closed_form(const RunOptions& o, std::ostream& os, Output& out) {
    if (!o.alpha) throw DomainError("closed-form needs --alpha");
    EsscherMarket market(*o.alpha);
    auto s = s_values(o);
    os << out.header << '\n' << "s,f,f_bar,in_domain\n";
    for (double si : s) {
        CurvePair c;
        if (o.law == "poisson")
            c = poisson_curves(market, need_param(o.lambda, "--lambda", o.law), si);
        else if (o.law == "bernoulli")
            c = bernoulli_curves(market, need_param(o.p, "--p", o.law), si);
        else if (o.law == "gamma")
            c = gamma_curves(market, need_param(o.k, "--k", o.law), need_param(o.theta, "--theta", o.law), si);
        else if (o.law == "normal") {
            double sg = need_param(o.sigma, "--sigma", o.law);
            Eigen::VectorXd mu(1), sv(1);
            Eigen::MatrixXd C(1, 1);
            mu(0) = need_param(o.mu, "--mu", o.law);
            C(0, 0) = sg * sg;
            sv(0) = si;
            auto nc = normal_curves(market, mu, C, sv);
            c = {nc.f(0), nc.f_bar(0)};
        } else
            throw DomainError("closed-form supports --law poisson|bernoulli|gamma|normal");
        csv_row(os, {num(si), num(c.f), num(c.f_bar), "1"});
    }
}

inline void cmd_equilibrium(const RunOptions& o, const Json& cfg, std::ostream& os, Output& out) {
    auto table = scenarios_from_json(need(cfg, "scenarios"));
    auto pop = agents_from_json(need(cfg, "agents"), table);
    const auto& Z = table.at(name_of(cfg, "Z"));
    EquilibriumOptions eo;
    if (cfg.contains("lambda")) eo.lambda = endodemand::detail::numbers(cfg.at("lambda"), "lambda");
    auto sol = solve_equilibrium(pop, Z, eo);
    Json r;
    r["price"] = sol.price;
    r["analytic"] = sol.analytic;
    r["lambda"] = sol.lambda;
    r["initial_allocation"] = sol.initial;
    r["anchor"] = sol.anchor;
    r["moment_residual"] = sol.moment_residual;
    r["shooting_iterations"] = sol.shooting_iterations;
    r["foc_residuals"] = foc_residuals(pop, sol);
    r["density"] = std::vector<double>(sol.density.values().begin(), sol.density.values().end());
    Json tr = Json::array();
    for (const auto& y : sol.transfers) tr.push_back(std::vector<double>(y.values().begin(), y.values().end()));
    r["transfers"] = tr;
    for (const auto& w : pop.warnings()) r["warnings"].push_back(w);
    Json j = out.meta;
    j["result"] = r;
    (void)o;
    os << j.dump(2) << '\n';
}

inline void cmd_ruin_limit(const RunOptions& o, const Json& cfg, std::ostream& os, Output& out) {
    auto p = clearing_inputs(cfg);
    std::vector<double> ps = o.ruin_p;
    if (ps.empty() && cfg.contains("ruin_p")) ps = endodemand::detail::numbers(cfg.at("ruin_p"), "ruin_p");
    if (ps.empty())
        for (int e = 1; e <= 5; ++e) ps.push_back(1.0 - std::pow(10.0, -e));
    ClearOptions co{o.grid, o.tol, false};
    auto prices = ruin_limit_price(p, ps, co);
    Json j = out.meta;
    j["result"] = {{"p", ps}, {"prices", prices}, {"clear_selected", clear(p, co).selected}};
    os << j.dump(2) << '\n';
}

// ---- figures --------------------------------------------------------------

inline void figure_three_equilibria(std::ostream& os, Output& out) {
    auto space = ScenarioSpace::make({0.01, 0.99});
    ClearingProblem p(RandomVariable(space, {1e-5, 100.0}), RandomVariable(space, {2.0, 1e-5}), saturating_profile(2.3));
    os << out.header << '\n' << "v,h\n";
    for (double v : uniform_grid(1e-5, 2.0, 401)) csv_row(os, {num(v), num(h_map(p, v))});
}

inline void figure_lognormal(const RunOptions& o, std::ostream& os, Output& out) {
    LognormalLaw law{-0.125, 0.25};
    auto qhat = sample_one({law, o.samples, require_seed(o)});
    const double X = 2.0;
    auto R = log_profile(1.0, X);
    ProductSpace prod(bernoulli_variable(1.0 - 1e-5).space(), qhat.space());
    auto B = prod.lift_left(bernoulli_variable(1.0 - 1e-5));
    auto Q = prod.lift_right(qhat);
    std::vector<double> bq(B.size());
    for (std::size_t i = 0; i < bq.size(); ++i) bq[i] = B[i] * Q[i];
    RandomVariable with(prod.space(), std::move(bq), 0.0);

    os << out.header << '\n' << "panel,s,f,f_bar,in_domain\n";
    auto emit = [&](const char* panel, const RandomVariable& q) {
        DemandProblem dp(RandomVariable::constant(q.space(), X), q, R);
        auto c = demand_curve(dp, 4.0, 81);
        for (std::size_t i = 0; i < c.s_grid.size(); ++i)
            csv_row(os, {panel, num(c.s_grid[i]), num(c.f[i]), num(c.f_bar[i]), c.in_domain[i] ? "1" : "0"});
    };
    emit("without_ruin", qhat);
    emit("with_ruin", with);
}

inline void figure_cross_impact(const RunOptions& o, std::ostream& os, Output& out) {
    auto q = iid_lognormal(LognormalLaw{-0.125, 0.25}, 2, o.samples, require_seed(o));
    CrossImpactProblem cp(RandomVariable::constant(q.front().space(), 2.0), std::move(q), log_profile(1.0, 2.0));
    std::vector<std::vector<double>> grids(2, uniform_grid(0.0, 3.0, 31));
    auto nodes = cross_impact_grid(cp, grids);
    os << out.header << '\n';
    cross_csv(os, nodes, 2);
}

}  // namespace detail

/// Parses `args` (without the program name), runs the command and writes its
/// artifact to --output or `out`. Returns the process exit code.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunOptions o;
    CLI::App app{"Equilibrium clearing prices and endogenous inverse demand functions", "endodemand"};
    app.set_version_flag("--version", std::string(kVersion));
    app.add_option("--figure", o.figure, "Emit a figure grid: appendix-c | cross-impact | lognormal")
        ->check(CLI::IsMember({"appendix-c", "cross-impact", "lognormal"}));
    app.add_option("--seed", o.seed, "RNG seed (required for sampled laws)");
    app.add_option("--samples", o.samples, "Sample count for sampled laws");
    app.add_option("-o,--output", o.output_path, "Output file (default: stdout)");
    app.require_subcommand(0, 1);

    auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("-o,--output", o.output_path, "Output file (default: stdout)");
        sub->add_option("--grid", o.grid, "Root scan grid points");
        sub->add_option("--tol", o.tol, "Root bracket width");
        sub->add_option("--seed", o.seed, "RNG seed (required for sampled laws)");
        sub->add_option("--samples", o.samples, "Sample count for sampled laws");
    };
    auto law_flags = [&](CLI::App* sub) {
        sub->add_option("--law", o.law, "poisson | bernoulli | gamma | lognormal | normal");
        sub->add_option("--lambda", o.lambda, "Poisson rate");
        sub->add_option("--p", o.p, "Bernoulli probability");
        sub->add_option("--k", o.k, "Gamma shape");
        sub->add_option("--theta", o.theta, "Gamma scale");
        sub->add_option("--sigma", o.sigma, "Normal/lognormal sigma");
        sub->add_option("--mu", o.mu, "Normal mean / lognormal log-mean");
        sub->add_option("--alpha", o.alpha, "Linear profile aversion");
        sub->add_option("--eta", o.eta, "Log profile exponent");
        sub->add_option("--x", o.x, "Deterministic aggregate endowment");
        sub->add_option("--s-max", o.s_max, "Largest liquidation size");
        sub->add_option("--points", o.points, "Grid points in s (per asset)");
        sub->add_option("--s-grid", o.s_grid, "Explicit increasing s values (demand, closed-form)");
    };

    struct Sub {
        const char* name;
        const char* help;
        bool laws;
    };
    const Sub subs[] = {
        {"price", "Selected clearing price with diagnostics (JSON)", false},
        {"roots", "All clearing prices (JSON)", false},
        {"demand", "Order-book density and VWAP curves (CSV)", true},
        {"cross-impact", "Multi-asset inverse demand grid (CSV)", true},
        {"liquidity", "Slopes of the inverse demand functions at zero (JSON)", true},
        {"closed-form", "Analytic exponential-utility curves (CSV)", true},
        {"equilibrium", "Full Buhlmann equilibrium (JSON)", false},
        {"ruin-limit", "Prices under vanishing systemic ruin (JSON)", false},
    };
    std::vector<CLI::App*> handles;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        common(sub);
        if (s.laws) law_flags(sub);
        handles.push_back(sub);
    }
    handles.back()->add_option("--p-values", o.ruin_p, "Increasing ruin probabilities in (0, 1)");
    handles[3]->add_option("--assets", o.assets, "Number of i.i.d. lognormal assets");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? ExitCode::ok : ExitCode::domain_error;
    }
    for (std::size_t i = 0; i < handles.size(); ++i)
        if (handles[i]->parsed()) o.command = subs[i].name;

    try {
        if (o.command.empty() == o.figure.empty()) throw DomainError("give exactly one command or --figure");
        Json cfg = detail::load_config(o.config_path);

        detail::Output meta;
        Json run_id = detail::options_json(o, cfg);
        std::string hash = hex64(fnv1a(run_id.dump()));
        std::string seed = o.seed ? std::to_string(*o.seed) : "none";
        meta.header = "# endodemand " + std::string(kVersion) + " seed=" + seed + " config=" + hash;
        meta.meta["meta"] = {{"version", kVersion}, {"seed", o.seed ? Json(*o.seed) : Json(nullptr)}, {"config_hash", hash}};

        std::ostringstream body;
        const std::string& c = o.command;
        if (o.figure == "appendix-c")
            detail::figure_three_equilibria(body, meta);
        else if (o.figure == "lognormal")
            detail::figure_lognormal(o, body, meta);
        else if (o.figure == "cross-impact")
            detail::figure_cross_impact(o, body, meta);
        else if (c == "price")
            detail::cmd_price(o, cfg, body, meta);
        else if (c == "roots")
            detail::cmd_roots(o, cfg, body, meta);
        else if (c == "demand")
            detail::cmd_demand(o, cfg, body, meta);
        else if (c == "cross-impact")
            detail::cmd_cross_impact(o, cfg, body, meta);
        else if (c == "liquidity")
            detail::cmd_liquidity(o, cfg, body, meta);
        else if (c == "closed-form")
            detail::cmd_closed_form(o, body, meta);
        else if (c == "equilibrium")
            detail::cmd_equilibrium(o, cfg, body, meta);
        else if (c == "ruin-limit")
            detail::cmd_ruin_limit(o, cfg, body, meta);

        if (o.output_path.empty()) {
            out << body.str();
        } else {
            std::ofstream f(o.output_path, std::ios::binary);
            if (!f) throw DomainError("cannot write " + o.output_path);
            f << body.str();
        }
        return ExitCode::ok;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return ExitCode::domain_error;
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << '\n';
        return ExitCode::convergence_error;
    } catch (const Json::exception& e) {
        err << "error: " << e.what() << '\n';
        return ExitCode::domain_error;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return ExitCode::failure;
    }
}

}  // namespace endodemand::cli
