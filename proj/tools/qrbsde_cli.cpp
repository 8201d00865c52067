// Command-line front end: solve a configured problem, run the mesh sweep,
// check the closed-form oracles, or simulate forward paths. All artifacts
// are plain CSV/JSON written into the chosen output directory.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qrbsde/convergence.hpp"
#include "qrbsde/forward.hpp"
#include "qrbsde/manifest.hpp"
#include "qrbsde/model.hpp"
#include "qrbsde/oracles.hpp"
#include "qrbsde/pde.hpp"
#include "qrbsde/presets.hpp"
#include "qrbsde/reflected.hpp"
#include "qrbsde/valuation.hpp"

namespace {

using namespace qrbsde;

struct CommonFlags {
    std::string preset, config, out, obstacle;
    double T = 0, dx = 0, R = 0, delta = 0, wealth = 0, contact_tol = 0;
    int n = 0, M = 0, substeps = 0, nx = 0, export_stride = 0;
    std::uint64_t seed = 0;
    std::vector<int> sweep;

    CLI::Option *o_preset = nullptr, *o_config = nullptr, *o_out = nullptr,
                *o_obstacle = nullptr, *o_T = nullptr, *o_dx = nullptr,
                *o_R = nullptr, *o_delta = nullptr, *o_wealth = nullptr,
                *o_contact = nullptr, *o_n = nullptr, *o_M = nullptr,
                *o_substeps = nullptr, *o_nx = nullptr, *o_stride = nullptr,
                *o_seed = nullptr, *o_sweep = nullptr;
};

void add_common_flags(CLI::App* cmd, CommonFlags& fl) {
    fl.o_preset = cmd->add_option("--preset", fl.preset, "built-in problem preset");
    fl.o_config = cmd->add_option("--config", fl.config, "JSON configuration file");
    fl.o_preset->excludes(fl.o_config);
    fl.o_T = cmd->add_option("--T", fl.T, "horizon override");
    fl.o_n = cmd->add_option("--n", fl.n, "partition size for single solves");
    fl.o_sweep = cmd->add_option("--sweep", fl.sweep, "partition sizes for the sweep")
                     ->delimiter(',');
    fl.o_M = cmd->add_option("--M", fl.M, "path count");
    fl.o_seed = cmd->add_option("--seed", fl.seed, "RNG seed");
    fl.o_out = cmd->add_option("--out", fl.out, "output directory");
    fl.o_dx = cmd->add_option("--dx", fl.dx, "space step override");
    fl.o_delta = cmd->add_option("--delta", fl.delta, "time substep override");
    fl.o_substeps = cmd->add_option("--substeps", fl.substeps, "substep count override");
    fl.o_R = cmd->add_option("--R", fl.R, "space half-width override");
    fl.o_nx = cmd->add_option("--Nx", fl.nx, "space node count override");
    fl.o_wealth = cmd->add_option("--wealth", fl.wealth, "initial wealth for the utility value");
    fl.o_obstacle = cmd->add_option("--obstacle", fl.obstacle,
                                    "obstacle variant: lipschitz or c2b");
    fl.o_contact = cmd->add_option("--contact-tol", fl.contact_tol,
                                   "contact tolerance for the exercise region");
    fl.o_stride = cmd->add_option("--export-stride", fl.export_stride,
                                  "substep decimation for CSV exports");
}

RunConfig build_config(const CommonFlags& fl) {
    RunConfig cfg;
    if (fl.o_config->count()) cfg = load_config(fl.config);
    else if (fl.o_preset->count()) cfg = make_preset(fl.preset);
    else throw ConfigError("need --preset or --config");

    if (fl.o_T->count()) {
        if (!(fl.T > 0)) throw ConfigError("--T must be > 0");
        cfg.problem.T = fl.T;
    }
    if (fl.o_n->count()) cfg.n_solve = fl.n;
    if (fl.o_sweep->count()) {
        cfg.sweep = fl.sweep;
        std::sort(cfg.sweep.begin(), cfg.sweep.end());
        cfg.sweep.erase(std::unique(cfg.sweep.begin(), cfg.sweep.end()),
                        cfg.sweep.end());
    }
    if (fl.o_M->count()) cfg.M = fl.M;
    if (fl.o_seed->count()) cfg.seed = fl.seed;
    if (fl.o_out->count()) cfg.out = fl.out;
    if (fl.o_dx->count()) cfg.grid.dx = fl.dx;
    if (fl.o_R->count()) cfg.grid.R = fl.R;
    if (fl.o_nx->count()) cfg.grid.nx = fl.nx;
    if (fl.o_substeps->count()) cfg.grid.substeps = fl.substeps;
    if (fl.o_delta->count()) {
        if (!(fl.delta > 0)) throw ConfigError("--delta must be > 0");
        cfg.grid.substeps =
            std::max(1, static_cast<int>(std::llround(cfg.problem.T / fl.delta)));
    }
    if (fl.o_wealth->count()) cfg.wealth = fl.wealth;
    if (fl.o_contact->count()) cfg.contact_tol = fl.contact_tol;
    if (fl.o_stride->count()) cfg.export_stride = fl.export_stride;
    if (fl.o_obstacle->count()) {
        apply_obstacle_variant(cfg.problem, fl.obstacle);
        cfg.obstacle_variant = fl.obstacle;
    }
    cfg.validate();
    return cfg;
}

std::filesystem::path prepare_out(const RunConfig& cfg) {
    std::filesystem::path dir(cfg.out);
    std::filesystem::create_directories(dir);
    return dir;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + p.string());
    return os;
}

// CSV schema: interval,layer_time,x,u,zmag. For the discrete solve the
// interval is the partition interval owning the substep and u is the
// reflected value at dates; for the reference it is the layer index.
void write_disc_surface_csv(std::ostream& os, const DiscreteSolution& disc, int stride) {
    os << "interval,layer_time,x,u,zmag\n";
    const int S = disc.gt.S;
    int owner = 1;
    for (int k = 0; k <= S; ++k) {
        while (owner < disc.n() && k >= disc.pidx[static_cast<std::size_t>(owner)]) ++owner;
        if (k % stride != 0 && k != S) continue;
        const Layer& L = disc.pre[static_cast<std::size_t>(k)];
        const int di = disc.date_of[static_cast<std::size_t>(k)];
        const std::vector<double>& u =
            di >= 0 ? disc.post[static_cast<std::size_t>(di)] : L.u;
        for (int j = 0; j < disc.gx.nx; ++j)
            os << owner << ',' << fmt_full(disc.gt.time(k)) << ','
               << fmt_full(disc.gx.x(j)) << ',' << fmt_full(u[static_cast<std::size_t>(j)])
               << ',' << fmt_full(L.zmag[static_cast<std::size_t>(j)]) << '\n';
    }
}

void write_ref_surface_csv(std::ostream& os, const ContinuousReference& ref, int stride) {
    os << "interval,layer_time,x,u,zmag\n";
    const int S = ref.gt.S;
    for (int k = 0; k <= S; ++k) {
        if (k % stride != 0 && k != S) continue;
        const Layer& L = ref.layers[static_cast<std::size_t>(k)];
        for (int j = 0; j < ref.gx.nx; ++j)
            os << k << ',' << fmt_full(ref.gt.time(k)) << ',' << fmt_full(ref.gx.x(j))
               << ',' << fmt_full(L.u[static_cast<std::size_t>(j)]) << ','
               << fmt_full(L.zmag[static_cast<std::size_t>(j)]) << '\n';
    }
}

int cmd_solve(const RunConfig& cfg) {
    const auto dir = prepare_out(cfg);
    const SpaceGrid gx = cfg.resolve_grid();
    const SubstepGrid gt = SubstepGrid::uniform(cfg.problem.T, cfg.grid.substeps);
    const Partition part = Partition::uniform(cfg.problem.T, cfg.n_solve);

    const ContinuousReference ref = solve_continuous_reference(cfg.problem, gt, gx);
    const DiscreteSolution disc = solve_discrete(cfg.problem, gt, gx, part);

    const double x0 = cfg.problem.forward.x0;
    const double y0_ref = gx.interp(ref.layers[0].u, x0);
    const double y0_disc = disc.value_at(0, x0);
    const ValueResult val = value_function(cfg.problem.driver.alpha, cfg.wealth, y0_ref);

    nlohmann::json sol;
    sol["y0"] = y0_ref;
    sol["y0_disc"] = y0_disc;
    sol["alpha"] = cfg.problem.driver.alpha;
    sol["wealth"] = cfg.wealth;
    sol["value"] = val.value;
    sol["value_saturated"] = val.saturated;
    if (cfg.problem.market) {
        std::vector<double> sig = cfg.problem.forward.sigma_at(0.0);
        const double zm = gx.interp(ref.layers[0].zmag, x0);
        for (double& s : sig) s *= zm;
        auto pi0 = optimal_strategy(*cfg.problem.market, 0.0, x0, sig);
        sol["strategy0"] = pi0 ? nlohmann::json(*pi0) : nlohmann::json(nullptr);
    } else {
        sol["strategy0"] = nullptr;
    }
    write_json_file((dir / "solution.json").string(), sol);

    {
        auto os = open_out(dir / "y0.txt");
        os << fmt_full(y0_ref) << '\n';
    }
    {
        auto os = open_out(dir / "surface_disc.csv");
        write_disc_surface_csv(os, disc, cfg.export_stride);
    }
    {
        auto os = open_out(dir / "surface_ref.csv");
        write_ref_surface_csv(os, ref, cfg.export_stride);
    }
    {
        const ExerciseRegion region =
            exercise_region(ref, cfg.problem, cfg.resolve_contact_tol(gx));
        auto os = open_out(dir / "region.csv");
        write_region_csv(os, ref, region, cfg.export_stride);
    }

    nlohmann::json man = manifest_root(cfg, gx);
    man["theoretical"] = theoretical_json(cfg);
    man["discrete"] = discrete_checks_json(cfg, disc);
    man["reference"] = reference_checks_json(cfg, ref);
    write_json_file((dir / "manifest.json").string(), man);

    std::cout << "y0 " << fmt_full(y0_ref) << "\n"
              << "y0_disc(n=" << cfg.n_solve << ") " << fmt_full(y0_disc) << "\n"
              << "value " << fmt_full(val.value)
              << (val.saturated ? " (saturated)" : "") << "\n"
              << "artifacts in " << dir.string() << "\n";
    return 0;
}

int cmd_converge(const RunConfig& cfg) {
    const auto dir = prepare_out(cfg);
    SweepSetup setup;
    setup.ns = cfg.sweep;
    setup.M = cfg.M;
    setup.seed = cfg.seed;
    setup.substeps = cfg.grid.substeps;
    setup.gx = cfg.resolve_grid();

    const ConvergenceReport rep = run_sweep(cfg.problem, setup);

    {
        auto os = open_out(dir / "report.csv");
        write_report_csv(os, rep);
    }
    write_json_file((dir / "summary.json").string(), sweep_summary_json(rep));
    nlohmann::json man = manifest_root(cfg, setup.gx);
    man["theoretical"] = theoretical_json(cfg);
    man["reference"] = {{"max_abs_u", rep.reference_max_abs_u},
                        {"fixedpoint_warnings", rep.fixedpoint_warnings}};
    write_json_file((dir / "manifest.json").string(), man);

    auto show = [](const char* name, const std::optional<double>& s, double expo) {
        std::cout << name << " slope ";
        if (s) std::cout << fmt_full(*s);
        else std::cout << "n/a";
        std::cout << " (theory >= " << expo << ")\n";
    };
    show("err_y_sup_sq", rep.slope_y_sup, rep.exp_y);
    show("err_y_pathsup_sq", rep.slope_y_pathsup, rep.exp_y);
    show("err_z_l2_sq", rep.slope_z, rep.exp_z);
    show("err_k_sup", rep.slope_k, rep.exp_k);
    std::cout << "artifacts in " << dir.string() << "\n";
    return 0;
}

int cmd_simulate(const RunConfig& cfg) {
    const auto dir = prepare_out(cfg);
    const SpaceGrid gx = cfg.resolve_grid();
    const SubstepGrid gt = SubstepGrid::uniform(cfg.problem.T, cfg.grid.substeps);
    const PathBatch batch = simulate(cfg.problem.forward, gt, cfg.M, cfg.seed);

    {
        auto os = open_out(dir / "paths.csv");
        write_paths_csv(os, batch, cfg.export_stride);
    }

    const Partition part = Partition::uniform(cfg.problem.T, cfg.n_solve);
    const ContinuousReference ref = solve_continuous_reference(cfg.problem, gt, gx);
    const DiscreteSolution disc = solve_discrete(cfg.problem, gt, gx, part);
    const PathProcesses pp = evaluate_along_paths(cfg.problem, disc, ref, batch);
    {
        auto os = open_out(dir / "processes.csv");
        write_processes_csv(os, pp, cfg.export_stride);
    }

    double mean = 0, sq = 0, lo = batch.state(0, gt.S), hi = lo;
    for (int p = 0; p < batch.M; ++p) {
        const double xT = batch.state(p, gt.S);
        mean += xT;
        sq += xT * xT;
        lo = std::min(lo, xT);
        hi = std::max(hi, xT);
    }
    mean /= batch.M;
    nlohmann::json mom;
    mom["terminal_mean"] = mean;
    mom["terminal_var"] = sq / batch.M - mean * mean;
    mom["terminal_min"] = lo;
    mom["terminal_max"] = hi;
    mom["exit_fraction"] = pp.exit_fraction();
    mom["valid_paths"] = pp.valid_count();
    write_json_file((dir / "moments.json").string(), mom);

    nlohmann::json man = manifest_root(cfg, gx);
    man["theoretical"] = theoretical_json(cfg);
    man["discrete"] = discrete_checks_json(cfg, disc);
    man["reference"] = reference_checks_json(cfg, ref);
    write_json_file((dir / "manifest.json").string(), man);

    std::cout << "simulated " << batch.M << " paths, terminal mean "
              << fmt_full(mean) << "\nartifacts in " << dir.string() << "\n";
    return 0;
}

double solve_reference_y0(const RunConfig& cfg) {
    const SpaceGrid gx = cfg.resolve_grid();
    const SubstepGrid gt = SubstepGrid::uniform(cfg.problem.T, cfg.grid.substeps);
    const ContinuousReference ref = solve_continuous_reference(cfg.problem, gt, gx);
    return gx.interp(ref.layers[0].u, cfg.problem.forward.x0);
}

int cmd_oracle() {
    std::vector<CheckResult> checks;

    {
        RunConfig cfg = make_preset("heat-oracle");
        const double y0 = solve_reference_y0(cfg);
        checks.push_back({"heat-cos", heat_cos_value(0.0, 0.0, 1.0, 1.0), y0, 1e-3});
    }
    {
        RunConfig cfg = make_preset("colehopf-oracle");
        const double y0 = solve_reference_y0(cfg);
        const double expect = colehopf_value(
            1.0, [](double x) { return std::cos(x); }, 0.0, 1.0);
        checks.push_back({"quadratic-logexp", expect, y0, 1e-3});
    }
    {
        RunConfig cfg = make_preset("american-oracle");
        const double y0 = solve_reference_y0(cfg);
        const double expect = american_tree_value(
            [](double x) { return std::max(0.0, 1.0 - std::abs(x)); }, 0.5, 1.0,
            0.25, 2000);
        checks.push_back({"optimal-stopping-tree", expect, y0, 5e-3});
    }

    // invariant margins: positive excess over the stated bound fails
    for (const std::string& name : preset_names()) {
        RunConfig cfg = make_preset(name);
        const SpaceGrid gx = cfg.resolve_grid();
        const SubstepGrid gt = SubstepGrid::uniform(cfg.problem.T, cfg.grid.substeps);
        const ContinuousReference ref = solve_continuous_reference(cfg.problem, gt, gx);
        const Partition part = Partition::uniform(cfg.problem.T, cfg.n_solve);
        const DiscreteSolution disc = solve_discrete(cfg.problem, gt, gx, part);
        const TheoreticalBounds b = TheoreticalBounds::from(cfg.problem);

        const double ybound = b.y_bound() + 1e-6;
        checks.push_back({"y-bound margin " + name, 0.0,
                          std::max(0.0, std::max(ref.max_abs_u, disc.max_abs_u) - ybound),
                          0.0});
        double zexcess = 0.0;
        for (int i = 1; i <= disc.n(); ++i) {
            const double len = disc.pdates[static_cast<std::size_t>(i)] -
                               disc.pdates[static_cast<std::size_t>(i) - 1];
            const double zb = b.z_bound_window(
                cfg.problem.driver.Kx, len,
                disc.post_lipschitz[static_cast<std::size_t>(i)]);
            zexcess = std::max(
                zexcess,
                disc.max_z_interval[static_cast<std::size_t>(i) - 1] - (zb + 1e-3));
        }
        checks.push_back({"z-bound margin " + name, 0.0, std::max(0.0, zexcess), 0.0});
        const double lbound =
            lipschitz_envelope(cfg.k1(), cfg.k2(), b.Kg, b.T) + 1e-9;
        double lexcess = 0.0;
        for (double L : disc.post_lipschitz) lexcess = std::max(lexcess, L - lbound);
        checks.push_back({"lipschitz margin " + name, 0.0, std::max(0.0, lexcess), 0.0});
    }

    const bool all = write_check_table(std::cout, checks);
    if (!all) throw NumericalError("oracle checks failed");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reflected backward solver suite for optimal investment stopping"};
    app.require_subcommand(1);

    CommonFlags fl_solve, fl_conv, fl_sim;
    CLI::App* solve = app.add_subcommand("solve", "solve one problem and export surfaces");
    add_common_flags(solve, fl_solve);
    CLI::App* conv = app.add_subcommand("converge", "run the partition sweep and fit rates");
    add_common_flags(conv, fl_conv);
    CLI::App* oracle = app.add_subcommand("oracle", "check closed-form oracles and bound margins");
    CLI::App* sim = app.add_subcommand("simulate", "simulate paths and pathwise processes");
    add_common_flags(sim, fl_sim);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (solve->parsed()) return cmd_solve(build_config(fl_solve));
        if (conv->parsed()) return cmd_converge(build_config(fl_conv));
        if (sim->parsed()) return cmd_simulate(build_config(fl_sim));
        if (oracle->parsed()) return cmd_oracle();
    } catch (const qrbsde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const qrbsde::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
