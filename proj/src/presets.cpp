#include "qrbsde/presets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "json.hpp"

namespace qrbsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Obstacle tent_obstacle() {
    Obstacle o;
    o.g = [](double x) { return std::max(0.0, 1.0 - std::abs(x)); };
    o.Kg = 1.0;
    o.Mg = 1.0;
    o.reg = Regularity::Lipschitz;
    return o;
}

Obstacle gauss_obstacle() {
    Obstacle o;
    o.g = [](double x) { return std::exp(-x * x); };
    o.Kg = 0.857763884960707;  // sqrt(2/e), attained at |x| = 1/sqrt(2)
    o.Mg = 1.0;
    o.reg = Regularity::C2b;
    o.d1_bound = 0.857763884960707;
    o.d2_bound = 2.0;
    return o;
}

Obstacle cos_obstacle() {
    Obstacle o;
    o.g = [](double x) { return std::cos(x); };
    o.Kg = 1.0;
    o.Mg = 1.0;
    o.reg = Regularity::C2b;
    o.d1_bound = 1.0;
    o.d2_bound = 1.0;
    return o;
}

Obstacle const_obstacle(double value) {
    Obstacle o;
    o.g = [value](double) { return value; };
    o.Kg = 0.0;
    o.Mg = std::abs(value);
    o.reg = Regularity::C2b;
    o.d1_bound = 0.0;
    o.d2_bound = 0.0;
    return o;
}

ForwardModel unit_noise_forward(double x0) {
    ForwardModel fwd;
    fwd.m = 1;
    fwd.b = [](double, double) { return 0.0; };
    fwd.sigma = [](double, std::span<double> s) { s[0] = 1.0; };
    fwd.x0 = x0;
    fwd.Mb = 0.0;
    fwd.Kb = 0.0;
    fwd.Msigma = 1.0;
    return fwd;
}

Driver zero_driver(double alpha) {
    Driver d;
    d.f = [](double, double, std::span<const double>) { return 0.0; };
    d.alpha = alpha;
    d.Mf = 0.0;
    d.Kx = 0.0;
    d.Kz = 0.0;
    return d;
}

Driver quadratic_driver(double alpha) {
    Driver d;
    d.f = [alpha](double, double, std::span<const double> z) {
        double q = 0;
        for (double v : z) q += v * v;
        return -0.5 * alpha * q;
    };
    d.alpha = alpha;
    d.Mf = 0.0;
    d.Kx = 0.0;
    d.Kz = 0.5 * alpha;
    return d;
}

MarketSpec tanh_market(int m, double theta0, double theta1, double vol0,
                       double vol1, double pi_lo, double pi_hi, double alpha) {
    MarketSpec s;
    s.m = m;
    s.theta = [theta0, theta1](double, double x, std::span<double> out) {
        out[0] = theta0 + theta1 * std::tanh(x);
        for (std::size_t d = 1; d < out.size(); ++d) out[d] = 0.0;
    };
    s.stock_vol = [vol0, vol1](double, double, std::span<double> out) {
        out[0] = vol0;
        if (out.size() > 1) out[1] = vol1;
        for (std::size_t d = 2; d < out.size(); ++d) out[d] = 0.0;
    };
    s.pi_lo = pi_lo;
    s.pi_hi = pi_hi;
    s.alpha = alpha;
    return s;
}

RunConfig single_factor_example() {
    RunConfig cfg;
    cfg.preset = "sf-example";
    Problem& p = cfg.problem;
    p.T = 1.0;
    p.forward.m = 2;
    p.forward.b = [](double, double x) { return 0.5 * std::tanh(0.0 - x); };
    p.forward.sigma = [](double, std::span<double> s) {
        s[0] = 0.6;
        s[1] = 0.8;
    };
    p.forward.x0 = 0.0;
    p.forward.Mb = 0.5;
    p.forward.Kb = 0.5;
    p.forward.Msigma = 1.0;
    p.market = tanh_market(2, 0.3, 0.2, 0.25, 0.0, -kInf, kInf, 1.0);
    const SpaceGrid gx = SpaceGrid::default_for(p.forward, p.T);
    p.driver = build_driver_from_market(*p.market, p.T, gx.x_min, gx.x_max());
    p.payoff = tent_obstacle();
    p.mode = ReflectMode::Active;
    return cfg;
}

RunConfig heat_oracle() {
    RunConfig cfg;
    cfg.preset = "heat-oracle";
    Problem& p = cfg.problem;
    p.T = 1.0;
    p.forward = unit_noise_forward(0.0);
    p.driver = zero_driver(1.0);
    p.payoff = cos_obstacle();
    p.mode = ReflectMode::Off;
    return cfg;
}

RunConfig colehopf_oracle() {
    RunConfig cfg;
    cfg.preset = "colehopf-oracle";
    Problem& p = cfg.problem;
    p.T = 1.0;
    p.forward = unit_noise_forward(0.0);
    p.driver = quadratic_driver(1.0);
    p.payoff = cos_obstacle();
    p.mode = ReflectMode::Off;
    return cfg;
}

RunConfig american_oracle() {
    RunConfig cfg;
    cfg.preset = "american-oracle";
    Problem& p = cfg.problem;
    p.T = 0.25;
    p.forward = unit_noise_forward(0.5);
    p.driver = zero_driver(1.0);
    p.payoff = tent_obstacle();
    p.mode = ReflectMode::Active;
    return cfg;
}

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& where, const std::string& key,
                          const std::string& what) {
    throw ConfigError("config: " + where + "." + key + ": " + what);
}

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw ConfigError("config: unknown key " + where + "." + item.key());
}

double need_number(const json& j, const std::string& where, const std::string& key) {
    if (!j.contains(key)) bad_key(where, key, "missing");
    if (!j.at(key).is_number()) bad_key(where, key, "must be a number");
    return j.at(key).get<double>();
}

double opt_number(const json& j, const std::string& where, const std::string& key,
                  double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) bad_key(where, key, "must be a number");
    return j.at(key).get<double>();
}

void parse_forward(const json& jf, ForwardModel& fwd) {
    check_keys(jf, "forward", {"b", "sigma", "x0", "Mb", "Kb", "Msigma"});
    if (!jf.contains("sigma") || !jf.at("sigma").is_array() || jf.at("sigma").empty())
        bad_key("forward", "sigma", "must be a nonempty array of numbers");
    std::vector<double> row;
    for (const auto& v : jf.at("sigma")) {
        if (!v.is_number()) bad_key("forward", "sigma", "must be numbers");
        row.push_back(v.get<double>());
    }
    fwd.m = static_cast<int>(row.size());
    fwd.sigma = [row](double, std::span<double> out) {
        for (std::size_t d = 0; d < row.size(); ++d) out[d] = row[d];
    };
    double norm = 0;
    for (double v : row) norm += v * v;
    const double default_msigma = std::sqrt(norm);

    double default_mb = 0.0, default_kb = 0.0;
    const json& jb = jf.contains("b") ? jf.at("b") : json("zero");
    if (jb.is_string() && jb.get<std::string>() == "zero") {
        fwd.b = [](double, double) { return 0.0; };
    } else if (jb.is_object()) {
        check_keys(jb, "forward.b", {"kind", "rate", "level", "clip"});
        const std::string kind = jb.contains("kind") ? jb.at("kind").get<std::string>() : "";
        if (kind == "zero") {
            fwd.b = [](double, double) { return 0.0; };
        } else if (kind == "tanh_meanrev") {
            const double rate = need_number(jb, "forward.b", "rate");
            const double level = opt_number(jb, "forward.b", "level", 0.0);
            fwd.b = [rate, level](double, double x) { return rate * std::tanh(level - x); };
            default_mb = std::abs(rate);
            default_kb = std::abs(rate);
        } else if (kind == "ou") {
            const double rate = need_number(jb, "forward.b", "rate");
            const double clip = need_number(jb, "forward.b", "clip");
            if (!(clip > 0)) bad_key("forward.b", "clip", "must be > 0");
            fwd.b = [rate, clip](double, double x) {
                return -rate * std::min(std::max(x, -clip), clip);
            };
            default_mb = std::abs(rate) * clip;
            default_kb = std::abs(rate);
        } else {
            bad_key("forward.b", "kind", "must be zero, tanh_meanrev, or ou");
        }
    } else {
        bad_key("forward", "b", "must be \"zero\" or an object with a kind");
    }
    fwd.x0 = opt_number(jf, "forward", "x0", 0.0);
    fwd.Mb = opt_number(jf, "forward", "Mb", default_mb);
    fwd.Kb = opt_number(jf, "forward", "Kb", default_kb);
    fwd.Msigma = opt_number(jf, "forward", "Msigma", default_msigma);
}

MarketSpec parse_market(const json& jm, int m, double alpha) {
    check_keys(jm, "market", {"theta0", "theta1", "vol0", "vol1", "pi_lo", "pi_hi"});
    const double theta0 = need_number(jm, "market", "theta0");
    const double theta1 = opt_number(jm, "market", "theta1", 0.0);
    const double vol0 = need_number(jm, "market", "vol0");
    const double vol1 = opt_number(jm, "market", "vol1", 0.0);
    const double pi_lo = opt_number(jm, "market", "pi_lo", -kInf);
    const double pi_hi = opt_number(jm, "market", "pi_hi", kInf);
    return tanh_market(m, theta0, theta1, vol0, vol1, pi_lo, pi_hi, alpha);
}

void parse_obstacle(const json& jo, Obstacle& obs, bool have_base) {
    check_keys(jo, "obstacle", {"kind", "Kg", "Mg", "value"});
    if (jo.contains("kind")) {
        const std::string kind = jo.at("kind").get<std::string>();
        if (kind == "tent") obs = tent_obstacle();
        else if (kind == "gauss") obs = gauss_obstacle();
        else if (kind == "cos") obs = cos_obstacle();
        else if (kind == "const") obs = const_obstacle(need_number(jo, "obstacle", "value"));
        else bad_key("obstacle", "kind", "must be tent, gauss, cos, or const");
    } else if (!have_base) {
        bad_key("obstacle", "kind", "missing");
    }
    obs.Kg = opt_number(jo, "obstacle", "Kg", obs.Kg);
    obs.Mg = opt_number(jo, "obstacle", "Mg", obs.Mg);
}

void parse_run(const json& jr, RunConfig& cfg) {
    check_keys(jr, "run",
               {"sweep", "n", "M", "seed", "out", "wealth", "contact_tol",
                "export_stride", "substeps", "dx", "R", "nx",
                "lipschitz_constant", "flatoff_tol"});
    if (jr.contains("sweep")) {
        if (!jr.at("sweep").is_array()) bad_key("run", "sweep", "must be an array");
        std::vector<int> ns;
        for (const auto& v : jr.at("sweep")) {
            if (!v.is_number_integer() || v.get<int>() < 1)
                bad_key("run", "sweep", "entries must be integers >= 1");
            ns.push_back(v.get<int>());
        }
        std::sort(ns.begin(), ns.end());
        ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
        cfg.sweep = ns;
    }
    if (jr.contains("n")) cfg.n_solve = jr.at("n").get<int>();
    if (jr.contains("M")) cfg.M = jr.at("M").get<int>();
    if (jr.contains("seed")) cfg.seed = jr.at("seed").get<std::uint64_t>();
    if (jr.contains("out")) cfg.out = jr.at("out").get<std::string>();
    cfg.wealth = opt_number(jr, "run", "wealth", cfg.wealth);
    cfg.contact_tol = opt_number(jr, "run", "contact_tol", cfg.contact_tol);
    if (jr.contains("export_stride")) cfg.export_stride = jr.at("export_stride").get<int>();
    if (jr.contains("substeps")) cfg.grid.substeps = jr.at("substeps").get<int>();
    cfg.grid.dx = opt_number(jr, "run", "dx", cfg.grid.dx);
    cfg.grid.R = opt_number(jr, "run", "R", cfg.grid.R);
    if (jr.contains("nx")) cfg.grid.nx = jr.at("nx").get<int>();
    cfg.lipschitz_constant =
        opt_number(jr, "run", "lipschitz_constant", cfg.lipschitz_constant);
    cfg.flatoff_tol = opt_number(jr, "run", "flatoff_tol", cfg.flatoff_tol);
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {
        "sf-example", "heat-oracle", "colehopf-oracle", "american-oracle"};
    return names;
}

RunConfig make_preset(const std::string& name) {
    if (name == "sf-example") return single_factor_example();
    if (name == "heat-oracle") return heat_oracle();
    if (name == "colehopf-oracle") return colehopf_oracle();
    if (name == "american-oracle") return american_oracle();
    std::string msg = "unknown preset '" + name + "'; available:";
    for (const std::string& p : preset_names()) msg += " " + p;
    throw ConfigError(msg);
}

void apply_obstacle_variant(Problem& prob, const std::string& which) {
    if (which == "lipschitz") prob.payoff = tent_obstacle();
    else if (which == "c2b") prob.payoff = gauss_obstacle();
    else throw ConfigError("obstacle variant must be lipschitz or c2b, got '" + which + "'");
}

void RunConfig::validate() const {
    if (!(problem.T > 0)) throw ConfigError("config: horizon.T must be > 0");
    if (grid.substeps < 1) throw ConfigError("config: run.substeps must be >= 1");
    if (grid.dx < 0) throw ConfigError("config: run.dx must be > 0 when given");
    if (grid.R < 0) throw ConfigError("config: run.R must be > 0 when given");
    if (grid.nx < 0) throw ConfigError("config: run.nx must be > 0 when given");
    if (sweep.empty()) throw ConfigError("config: run.sweep must be nonempty");
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        if (sweep[i] < 1) throw ConfigError("config: run.sweep entries must be >= 1");
        if (i && sweep[i] <= sweep[i - 1])
            throw ConfigError("config: run.sweep must be sorted ascending, unique");
        if (sweep[i] > grid.substeps)
            throw ConfigError("config: run.sweep entries must not exceed run.substeps");
    }
    if (n_solve < 1) throw ConfigError("config: run.n must be >= 1");
    if (n_solve > grid.substeps)
        throw ConfigError("config: run.n must not exceed run.substeps");
    if (M < 1) throw ConfigError("config: run.M must be >= 1");
    if (export_stride < 1) throw ConfigError("config: run.export_stride must be >= 1");
    if (contact_tol < 0) throw ConfigError("config: run.contact_tol must be >= 0");
    if (!(lipschitz_constant > 0))
        throw ConfigError("config: run.lipschitz_constant must be > 0");
    if (!(flatoff_tol > 0)) throw ConfigError("config: run.flatoff_tol must be > 0");
}

SpaceGrid RunConfig::resolve_grid() const {
    return SpaceGrid::default_for(problem.forward, problem.T, grid.dx, grid.R, grid.nx);
}

double RunConfig::resolve_contact_tol(const SpaceGrid& gx) const {
    if (contact_tol > 0) return contact_tol;
    return 10.0 * (gx.dx + problem.T / grid.substeps);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
    check_keys(j, "top level",
               {"preset", "horizon", "forward", "driver", "market", "obstacle",
                "mode", "shift", "run"});

    RunConfig cfg;
    const bool from_preset = j.contains("preset");
    if (from_preset) {
        cfg = make_preset(j.at("preset").get<std::string>());
    }
    cfg.source = text;

    if (j.contains("horizon")) {
        check_keys(j.at("horizon"), "horizon", {"T"});
        cfg.problem.T = need_number(j.at("horizon"), "horizon", "T");
    } else if (!from_preset) {
        throw ConfigError("config: horizon.T is required without a preset");
    }

    if (j.contains("forward")) parse_forward(j.at("forward"), cfg.problem.forward);
    else if (!from_preset) throw ConfigError("config: forward section is required without a preset");

    std::string driver_kind = from_preset ? "" : "zero";
    double alpha = cfg.problem.driver.alpha > 0 ? cfg.problem.driver.alpha : 1.0;
    if (j.contains("driver")) {
        const json& jd = j.at("driver");
        check_keys(jd, "driver", {"kind", "alpha", "Mf", "Kx", "Kz"});
        if (jd.contains("kind")) driver_kind = jd.at("kind").get<std::string>();
        else if (jd.contains("alpha") && from_preset)
            bad_key("driver", "alpha", "override requires driver.kind as well");
        alpha = opt_number(jd, "driver", "alpha", alpha);
    }
    if (j.contains("market") || driver_kind == "market") {
        if (!j.contains("market"))
            throw ConfigError("config: driver.kind=market requires a market section");
        cfg.problem.market = parse_market(j.at("market"), cfg.problem.forward.m, alpha);
        driver_kind = "market";
    }
    if (!driver_kind.empty()) {
        if (driver_kind == "zero") {
            cfg.problem.driver = zero_driver(alpha);
        } else if (driver_kind == "quadratic") {
            cfg.problem.driver = quadratic_driver(alpha);
        } else if (driver_kind == "market") {
            const SpaceGrid gx =
                SpaceGrid::default_for(cfg.problem.forward, cfg.problem.T);
            cfg.problem.driver = build_driver_from_market(*cfg.problem.market,
                                                          cfg.problem.T, gx.x_min,
                                                          gx.x_max());
        } else {
            bad_key("driver", "kind", "must be zero, quadratic, or market");
        }
    } else if (j.contains("driver")) {
        cfg.problem.driver.alpha = alpha;
    }
    if (j.contains("driver")) {
        const json& jd = j.at("driver");
        cfg.problem.driver.Mf = opt_number(jd, "driver", "Mf", cfg.problem.driver.Mf);
        cfg.problem.driver.Kx = opt_number(jd, "driver", "Kx", cfg.problem.driver.Kx);
        cfg.problem.driver.Kz = opt_number(jd, "driver", "Kz", cfg.problem.driver.Kz);
    }

    if (j.contains("obstacle"))
        parse_obstacle(j.at("obstacle"), cfg.problem.payoff, from_preset);
    else if (!from_preset)
        throw ConfigError("config: obstacle section is required without a preset");

    if (j.contains("mode")) {
        const std::string mode = j.at("mode").get<std::string>();
        if (mode == "active") cfg.problem.mode = ReflectMode::Active;
        else if (mode == "off") cfg.problem.mode = ReflectMode::Off;
        else if (mode == "shift") cfg.problem.mode = ReflectMode::Shifted;
        else throw ConfigError("config: mode must be active, off, or shift");
    }
    if (j.contains("shift")) {
        if (!j.at("shift").is_number())
            throw ConfigError("config: shift must be a number");
        cfg.problem.shift = j.at("shift").get<double>();
    }
    if (cfg.problem.mode == ReflectMode::Shifted && !(cfg.problem.shift > 0))
        throw ConfigError("config: mode=shift requires shift > 0");

    if (j.contains("run")) parse_run(j.at("run"), cfg);

    cfg.validate();
    const SpaceGrid gx = cfg.resolve_grid();
    cfg.problem.forward.validate(cfg.problem.T, gx.x_min, gx.x_max());
    cfg.problem.driver.validate(cfg.problem.T, gx.x_min, gx.x_max(),
                                cfg.problem.forward.m);
    cfg.problem.payoff.validate(gx.x_min, gx.x_max());
    if (cfg.problem.market) cfg.problem.market->validate();
    return cfg;
}

}  // namespace qrbsde
