#include "stfe/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "stfe/config.hpp"
#include "stfe/ensemble.hpp"
#include "stfe/io.hpp"
#include "stfe/selftest.hpp"
#include "stfe/splitter.hpp"

namespace stfe {

namespace {

// Thrown for problems the user has to fix on the command line.
struct UsageError {
    std::string message;
};

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::uint64_t> paths;
    std::string n_list;
    std::string only;
    bool quiet = false;
};

std::vector<std::size_t> parse_list(const std::string& text, const std::string& flag)
{
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto comma = text.find(',', start);
        if (comma == std::string::npos)
            comma = text.size();
        const std::string item = text.substr(start, comma - start);
        std::size_t v = 0;
        const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || end != item.data() + item.size())
            throw UsageError{flag + ": '" + item + "' is not a nonnegative integer"};
        out.push_back(v);
        start = comma + 1;
    }
    return out;
}

RunConfig resolve_config(const CommonFlags& f)
{
    RunConfig cfg = reference_config();
    if (!f.config.empty()) {
        try {
            cfg = load_config(f.config);
        }
        catch (const IoError& e) {
            throw UsageError{e.what()};
        }
    }
    if (f.seed)
        cfg.seed = *f.seed;
    if (!f.out.empty())
        cfg.out_dir = f.out;
    if (f.paths)
        cfg.n_paths = *f.paths;
    if (const char* env = std::getenv("STFE_THREADS"); env && *env) {
        std::size_t n = 0;
        const std::string s(env);
        const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
        if (ec != std::errc() || end != s.data() + s.size() || n == 0)
            throw UsageError{"STFE_THREADS must be a positive integer, got '" + s + "'"};
        cfg.workers = n;
    }
    cfg.validate();
    return cfg;
}

std::string snapshot_name(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "snapshot_%03zu.csv", i);
    return buf;
}

void write_manifest(OutputSet& files, std::string_view command, const RunConfig& cfg, nlohmann::json summary)
{
    const nlohmann::json m = make_manifest(command, cfg, files.files(), std::move(summary));
    write_text(files.dir() / "manifest.json", m.dump(2) + "\n");
}

nlohmann::json entropy_summary(const RunConfig& cfg, const GridFunction& u0, const GridFunction& uT)
{
    const EntropyParams ep = cfg.entropy_params();
    nlohmann::json j = {{"upper", ep.upper}, {"eps", ep.eps}};
    for (const auto& [name, u] : {std::pair<const char*, const GridFunction*>{"initial", &u0}, {"final", &uT}}) {
        try {
            j[name] = entropy_G(*u, ep);
        }
        catch (const Error& e) {
            j[name] = nullptr;
            j[std::string(name) + "_error"] = e.what();
        }
    }
    return j;
}

int cmd_simulate(const CommonFlags& f, std::ostream& out)
{
    const RunConfig cfg = resolve_config(f);
    const Grid grid = cfg.grid();
    const NoiseModel model = cfg.noise();
    const GridFunction u0 = cfg.initial_state();
    PathOptions po;
    po.phis = cfg.phis;
    const SplitRunner runner(grid, cfg.schedule, model, po);
    const SplitPath path = runner.run(u0, WienerIncrements(cfg.seed, model.cutoff(), runner.lattice(), 1), 0);

    OutputSet files(cfg.out_dir);
    files.write("series.csv", series_csv(path.series));
    nlohmann::json snaps = nlohmann::json::array();
    if (cfg.write_snapshots)
        for (std::size_t i = 0; i < path.snapshots.size(); ++i) {
            files.write(snapshot_name(i), snapshot_csv(path.snapshots[i].state));
            snaps.push_back({{"file", snapshot_name(i)},
                             {"time", path.snapshots[i].time},
                             {"snapped_time", path.snapshots[i].snapped_time}});
        }
    files.write("final.csv", snapshot_csv(path.final_state()));

    std::size_t det_steps = 0;
    std::size_t rejected = 0;
    for (const DetStepReport& r : path.det_reports) {
        det_steps += r.steps;
        rejected += r.rejected;
    }
    const double neg_bound = -1e-8 * u0.max_abs();
    const bool ok = path.max_mass_error <= 1e-11 && path.min_value >= neg_bound;
    const nlohmann::json summary = {
        {"pass", ok},
        {"max_mass_error", path.max_mass_error},
        {"min_value", path.min_value},
        {"max_snap_distance", path.max_snap_distance},
        {"stochastic_substeps_per_interval", runner.substeps()},
        {"deterministic_steps", det_steps},
        {"deterministic_rejections", rejected},
        {"dissipation", path.series.rows.back().dissipation},
        {"entropy_G", entropy_summary(cfg, u0, path.final_state())},
        {"snapshots", snaps},
    };
    write_manifest(files, "simulate", cfg, summary);
    if (!f.quiet)
        out << "simulate: " << path.series.rows.size() << " rows, max relative mass error "
            << path.max_mass_error << ", min u " << path.min_value << ", " << det_steps
            << " deterministic steps; wrote " << cfg.out_dir << "\n";
    return ok ? 0 : 1;
}

int cmd_ensemble(const CommonFlags& f, std::ostream& out, std::ostream& err)
{
    const RunConfig cfg = resolve_config(f);
    const GridFunction u0 = cfg.initial_state();
    OutputSet files(cfg.out_dir);
    EnsembleStats st;
    try {
        st = run_ensemble(u0, cfg.schedule, cfg.noise(), cfg.ensemble_config());
    }
    catch (const EnsembleFailure& e) {
        write_text(files.dir() / "failures.txt", std::string(e.what()) + "\n");
        err << "ensemble: " << e.what() << "\n";
        return 1;
    }
    files.write("ensemble.csv", ensemble_csv(st));

    nlohmann::json failures = nlohmann::json::array();
    for (const PathFailure& p : st.failures)
        failures.push_back({{"path_id", p.path_id}, {"message", p.message}});
    bool pass = true;
    for (const MartingaleVerdict& v : st.verdicts)
        pass = pass && v.pass;
    const nlohmann::json summary = {
        {"pass", pass},
        {"n_paths", st.n_paths},
        {"n_succeeded", st.n_succeeded},
        {"min_value", st.min_value},
        {"max_mass_error", st.max_mass_error},
        {"martingale_test", cfg.martingale_test},
        {"verdicts", to_json(st.verdicts)},
        {"failures", failures},
    };
    write_manifest(files, "ensemble", cfg, summary);
    if (!f.quiet) {
        out << "ensemble: " << st.n_succeeded << "/" << st.n_paths << " paths, min u " << st.min_value
            << ", max relative mass error " << st.max_mass_error << "\n";
        for (const MartingaleVerdict& v : st.verdicts)
            out << "  phi" << v.phi << ": " << (v.pass ? "PASS" : "FAIL") << " (mean score " << v.mean_score
                << ", square score " << v.square_score << ", worst t = " << v.worst_time << ")\n";
        out << "wrote " << cfg.out_dir << "\n";
    }
    return pass ? 0 : 1;
}

int cmd_converge(const CommonFlags& f, std::ostream& out)
{
    CommonFlags g = f;
    g.paths.reset();  // --paths counts coupled paths here, not ensemble paths
    const RunConfig cfg = resolve_config(g);
    const std::vector<std::size_t> n_list = f.n_list.empty() ? std::vector<std::size_t>{4, 8, 16, 32}
                                                               : parse_list(f.n_list, "--N");
    const std::uint64_t paths = f.paths.value_or(8);
    if (paths == 0)
        throw UsageError{"--paths must be at least 1"};
    const RefineTable t = refine_study(cfg.initial_state(), cfg.noise(), cfg.schedule, n_list, cfg.seed, paths);

    OutputSet files(cfg.out_dir);
    const std::string table = refine_csv(t, cfg.schedule.T);
    files.write("converge.csv", table);
    files.write("converge_paths.csv", refine_paths_csv(t));
    const bool pass = t.non_increasing();
    const nlohmann::json summary = {
        {"pass", pass},
        {"N", t.N_list},
        {"paths", paths},
        {"fine_steps", t.fine_steps},
        {"rms_diff_final", t.rms_diff_final},
        {"strictly_decreasing", t.strictly_decreasing()},
        {"paths_strictly_decreasing", t.paths_strictly_decreasing()},
    };
    write_manifest(files, "converge", cfg, summary);
    if (!f.quiet)
        out << table << "differences " << (pass ? "non-increasing" : "NOT non-increasing") << "; "
            << t.paths_strictly_decreasing() << "/" << paths << " paths decrease strictly\n";
    return pass ? 0 : 1;
}

int cmd_selftest(const CommonFlags& f, std::ostream& out, std::ostream& err)
{
    SelftestOptions opts;
    if (f.seed)
        opts.seed = *f.seed;
    if (f.paths) {
        if (*f.paths < 2)
            throw UsageError{"--paths must be at least 2"};
        opts.n_paths = *f.paths;
    }
    if (!f.only.empty())
        for (std::size_t id : parse_list(f.only, "--only")) {
            if (id < 1 || id > 10)
                throw UsageError{"--only: criteria are numbered 1 to 10"};
            opts.only.push_back(static_cast<int>(id));
        }
    if (!f.quiet)
        opts.log = &err;
    bool pass = true;
    for (const CriterionResult& r : run_selftest(opts)) {
        out << format_result(r) << std::endl;
        pass = pass && r.pass;
    }
    return pass ? 0 : 1;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Splitting scheme for the stochastic thin-film equation with transport noise", "stfe"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version()));

    CommonFlags f;
    auto add_run_flags = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "Configuration file (INI)")->check(CLI::ExistingFile);
        sub->add_option("--seed", f.seed, "Seed of the noise increments");
        sub->add_option("--out", f.out, "Output directory");
        sub->add_flag("--quiet", f.quiet, "Only report errors");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "One sample path with full diagnostics");
    add_run_flags(simulate);
    CLI::App* ensemble = app.add_subcommand("ensemble", "Monte Carlo ensemble with martingale verdicts");
    add_run_flags(ensemble);
    ensemble->add_option("--paths", f.paths, "Number of sample paths");
    CLI::App* converge = app.add_subcommand("converge", "Coupled self-convergence study over N");
    add_run_flags(converge);
    converge->add_option("--N", f.n_list, "Comma separated list of N, increasing (default 4,8,16,32)");
    converge->add_option("--paths", f.paths, "Number of coupled paths (default 8)");
    CLI::App* selftest = app.add_subcommand("selftest", "Invariant suite at the reference desk scale");
    selftest->add_option("--seed", f.seed, "Seed (default 20240611)");
    selftest->add_option("--paths", f.paths, "Ensemble size of the statistical checks (default 512)");
    selftest->add_option("--only", f.only, "Comma separated criterion numbers");
    selftest->add_flag("--quiet", f.quiet, "No progress output");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed())
            return cmd_simulate(f, out);
        if (ensemble->parsed())
            return cmd_ensemble(f, out, err);
        if (converge->parsed())
            return cmd_converge(f, out);
        return cmd_selftest(f, out, err);
    }
    catch (const UsageError& e) {
        err << "error: " << e.message << "\n";
        return 2;
    }
    catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    catch (const Error& e) {
        err << "failed: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace stfe
