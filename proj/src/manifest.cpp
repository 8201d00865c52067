#include "qrbsde/manifest.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace qrbsde {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json config_json(const RunConfig& cfg) {
    const Problem& p = cfg.problem;
    json j;
    j["preset"] = cfg.preset;
    if (!cfg.obstacle_variant.empty()) j["obstacle_variant"] = cfg.obstacle_variant;
    j["horizon"] = {{"T", p.T}};
    j["forward"] = {{"m", p.forward.m},   {"x0", p.forward.x0},
                    {"Mb", p.forward.Mb}, {"Kb", p.forward.Kb},
                    {"Msigma", p.forward.Msigma}};
    j["driver"] = {{"alpha", p.driver.alpha},
                   {"Mf", p.driver.Mf},
                   {"Kx", p.driver.Kx},
                   {"Kz", p.driver.Kz}};
    j["obstacle"] = {{"Kg", p.payoff.Kg},
                     {"Mg", p.payoff.Mg},
                     {"regularity", p.payoff.reg == Regularity::C2b ? "C2b" : "Lipschitz"}};
    switch (p.mode) {
        case ReflectMode::Active: j["mode"] = "active"; break;
        case ReflectMode::Off: j["mode"] = "off"; break;
        case ReflectMode::Shifted:
            j["mode"] = "shift";
            j["shift"] = p.shift;
            break;
    }
    if (p.market) {
        j["market"] = {{"alpha", p.market->alpha}};
        if (std::isfinite(p.market->pi_lo)) j["market"]["pi_lo"] = p.market->pi_lo;
        if (std::isfinite(p.market->pi_hi)) j["market"]["pi_hi"] = p.market->pi_hi;
    }
    j["run"] = {{"sweep", cfg.sweep},
                {"n", cfg.n_solve},
                {"M", cfg.M},
                {"seed", cfg.seed},
                {"wealth", cfg.wealth},
                {"contact_tol", cfg.contact_tol},
                {"export_stride", cfg.export_stride},
                {"substeps", cfg.grid.substeps},
                {"dx", cfg.grid.dx},
                {"R", cfg.grid.R},
                {"nx", cfg.grid.nx},
                {"lipschitz_constant", cfg.lipschitz_constant},
                {"flatoff_tol", cfg.flatoff_tol}};
    if (!cfg.source.empty()) j["config_file"] = cfg.source;
    return j;
}

json manifest_root(const RunConfig& cfg, const SpaceGrid& gx) {
    json j;
    j["version"] = "1.0.0";
    j["config"] = config_json(cfg);
    j["config_hash"] = hex64(fnv1a64(j["config"].dump()));
    j["seed"] = cfg.seed;
    j["grid"] = {{"x_min", gx.x_min},
                 {"x_max", gx.x_max()},
                 {"dx", gx.dx},
                 {"nx", gx.nx},
                 {"substeps", cfg.grid.substeps},
                 {"dt", cfg.problem.T / cfg.grid.substeps},
                 {"contact_tol", cfg.resolve_contact_tol(gx)}};
    return j;
}

json theoretical_json(const RunConfig& cfg) {
    const TheoreticalBounds b = TheoreticalBounds::from(cfg.problem);
    const double Kx = cfg.problem.driver.Kx;
    json j;
    j["y_bound"] = b.y_bound();
    j["z_rate"] = b.z_rate(Kx);
    j["z_bound"] = b.z_bound_window(Kx, b.T, b.Kg);
    j["lipschitz"] = {{"constant", cfg.lipschitz_constant},
                      {"K1", cfg.k1()},
                      {"K2", cfg.k2()},
                      {"bound", lipschitz_envelope(cfg.k1(), cfg.k2(), b.Kg, b.T)}};
    return j;
}

json discrete_checks_json(const RunConfig& cfg, const DiscreteSolution& disc) {
    const TheoreticalBounds b = TheoreticalBounds::from(cfg.problem);
    const double Kx = cfg.problem.driver.Kx;
    const int n = disc.n();

    const double lip_bound = lipschitz_envelope(cfg.k1(), cfg.k2(), b.Kg, b.T);
    bool lip_ok = true;
    for (double L : disc.post_lipschitz) lip_ok = lip_ok && L <= lip_bound + 1e-9;

    std::vector<double> z_bounds(static_cast<std::size_t>(n));
    bool z_ok = true;
    for (int i = 1; i <= n; ++i) {
        const double len = disc.pdates[static_cast<std::size_t>(i)] -
                           disc.pdates[static_cast<std::size_t>(i) - 1];
        const double L = disc.post_lipschitz[static_cast<std::size_t>(i)];
        const double zb = b.z_bound_window(Kx, len, L);
        z_bounds[static_cast<std::size_t>(i) - 1] = zb;
        z_ok = z_ok && disc.max_z_interval[static_cast<std::size_t>(i) - 1] <= zb + 1e-3;
    }

    const bool y_ok = disc.max_abs_u <= b.y_bound() + 1e-6;

    json j;
    j["n"] = n;
    j["max_abs_u"] = disc.max_abs_u;
    j["y_bound"] = b.y_bound();
    j["y_bound_ok"] = y_ok;
    j["post_lipschitz"] = disc.post_lipschitz;
    j["lipschitz_bound"] = lip_bound;
    j["lipschitz_ok"] = lip_ok;
    j["max_z_interval"] = disc.max_z_interval;
    j["z_window_bound"] = z_bounds;
    j["z_bound_ok"] = z_ok;
    j["fixedpoint_warnings"] = disc.fixedpoint_warnings;
    return j;
}

json reference_checks_json(const RunConfig& cfg, const ContinuousReference& ref) {
    const TheoreticalBounds b = TheoreticalBounds::from(cfg.problem);
    json j;
    j["max_abs_u"] = ref.max_abs_u;
    j["y_bound"] = b.y_bound();
    j["y_bound_ok"] = ref.max_abs_u <= b.y_bound() + 1e-6;
    j["fixedpoint_warnings"] = ref.fixedpoint_warnings;
    return j;
}

json sweep_summary_json(const ConvergenceReport& rep) {
    json j;
    auto slope = [](const std::optional<double>& s) {
        return s ? json(*s) : json(nullptr);
    };
    j["slopes"] = {{"err_y_sup_sq", slope(rep.slope_y_sup)},
                   {"err_y_pathsup_sq", slope(rep.slope_y_pathsup)},
                   {"err_z_l2_sq", slope(rep.slope_z)},
                   {"err_k_sup", slope(rep.slope_k)}};
    j["theoretical_exponents"] = {{"y", rep.exp_y}, {"z", rep.exp_z}, {"k", rep.exp_k}};
    json recs = json::array();
    for (const ErrorRecord& r : rep.records) {
        recs.push_back({{"n", r.n},
                        {"mesh", r.mesh},
                        {"err_y_sup_sq", r.err_y_sup_sq},
                        {"err_y_pathsup_sq", r.err_y_pathsup_sq},
                        {"err_z_l2_sq", r.err_z_l2_sq},
                        {"err_k_sup", r.err_k_sup},
                        {"valid_paths", r.valid_paths}});
    }
    j["records"] = recs;
    j["warnings"] = rep.warnings;
    j["exit_fraction"] = rep.exit_fraction;
    j["reference_max_abs_u"] = rep.reference_max_abs_u;
    j["fixedpoint_warnings"] = rep.fixedpoint_warnings;
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace qrbsde
