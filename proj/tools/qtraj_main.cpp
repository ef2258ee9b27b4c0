// Batch driver: propagate scenarios, run the verification suite, export
// plot-ready tables. Data goes to stdout or files; diagnostics go to stderr.
//
// Exit codes: 0 success; 1 verification failures; 2 parse/validation/usage
// errors; 3 runtime errors.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qtraj/qtraj.hpp"

namespace fs = std::filesystem;
using namespace qtraj;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::pair<double, int>> quantile_override(const Scenario& s, int n) {
    const auto initial =
        build_initial_state(s.initial_state, s.grid, s.params.constants, s.params.model);
    std::vector<std::pair<double, int>> seeds;
    auto add_component = [&](const ComplexField& f, int comp) {
        std::vector<double> density(f.size());
        double total = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            density[i] = std::norm(f.values[i]);
            total += density[i];
        }
        if (total * s.grid.dx() < 1e-12) return; // skip a vanishing branch
        for (double x : quantile_seeds(density, s.grid, n)) seeds.emplace_back(x, comp);
    };
    std::visit(
        [&](const auto& state) {
            using T = std::decay_t<decltype(state)>;
            if constexpr (std::is_same_v<T, ComplexField>) {
                add_component(state, 0);
            } else if constexpr (std::is_same_v<T, SpinorField>) {
                add_component(state.up, 0);
                add_component(state.down, 1);
            } else {
                add_component(state.psi, 0);
            }
        },
        initial);
    return seeds;
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            std::optional<int> seeds_override) {
    Scenario s = parse_scenario(read_file(scenario_path));
    if (seeds_override) s.trajectory_seeds = quantile_override(s, *seeds_override);

    const RunContext run = run_scenario(s);
    const auto trajectories = run.trajectories(s.trajectory_seeds);

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_snapshots(run.history(), dir / "snapshots.csv");
    write_trajectories(trajectories, dir / "trajectories.csv");
    write_manifest(s, run.history().size(), trajectories.size(), dir / "manifest.json");
    std::cerr << "run: " << s.name << ": " << run.history().size() << " snapshots, "
              << trajectories.size() << " trajectories -> " << dir.string() << "\n";
    return 0;
}

int cmd_verify(const std::string& suite, const std::string& out_dir, double tol_scale,
               bool inject_fault) {
    CheckOptions options;
    options.tol_scale = tol_scale;
    options.inject_documented_fault = inject_fault;
    const DiagnosticsReport report = run_checks(suite, options);

    for (const auto& e : report.entries) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), " %.6e %.3e ", e.residual, e.tolerance);
        std::cout << e.name << buf << (e.skipped ? "SKIP" : (e.passed ? "PASS" : "FAIL"))
                  << "\n";
        std::cerr << "  " << e.name << ": " << e.seconds << " s"
                  << (e.detail.empty() ? "" : "; " + e.detail) << "\n";
    }
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_report(report, dir / "report.txt", dir / "report.json");

    if (!report.all_passed()) {
        for (const auto& e : report.entries)
            if (!e.ok()) std::cerr << "FAILED: " << e.name << "\n";
        return 1;
    }
    return 0;
}

int cmd_export(const std::string& run_dir, const std::string& what, const std::string& format) {
    static const std::vector<std::string> whats{"density_heatmap", "trajectories_overlay",
                                                "velocity_field", "residual_convergence"};
    if (std::find(whats.begin(), whats.end(), what) == whats.end()) {
        std::cerr << "unknown export '" << what << "'; valid:";
        for (const auto& w : whats) std::cerr << " " << w;
        std::cerr << "\n";
        return 2;
    }
    if (format != "csv") {
        std::cerr << "unknown format '" << format << "'; valid: csv\n";
        return 2;
    }
    const fs::path dir(run_dir);

    if (what == "trajectories_overlay") {
        const auto table = read_csv(dir / "trajectories.csv");
        const auto id = table.column("traj_id");
        const auto t = table.column("t");
        const auto x = table.column("x");
        std::cout << "traj_id,t,x\n";
        for (const auto& row : table.rows)
            std::cout << row[id] << ',' << row[t] << ',' << row[x] << "\n";
        return 0;
    }
    if (what == "residual_convergence") {
        std::ifstream in(dir / "report.json");
        if (!in) throw IoError("cannot read " + (dir / "report.json").string());
        Json j;
        in >> j;
        std::cout << "check,residual,tolerance,status\n";
        for (const auto& c : j.at("checks"))
            std::cout << c.at("name").get<std::string>() << ','
                      << format_double(c.at("residual").get<double>()) << ','
                      << format_double(c.at("tolerance").get<double>()) << ','
                      << c.at("status").get<std::string>() << "\n";
        return 0;
    }

    const Scenario s = read_manifest_scenario(dir / "manifest.json");
    const auto history = read_snapshots(dir / "snapshots.csv", s.params.model, s.grid);

    if (what == "density_heatmap") {
        std::cout << "t,x,density\n";
        const bool spinor =
            s.params.model == ModelKind::pauli || s.params.model == ModelKind::weyl;
        for (std::size_t j = 0; j < history.size(); ++j) {
            const std::string t = format_double(history.times[j]);
            for (std::size_t i = 0; i < s.grid.n; ++i) {
                double density;
                if (spinor)
                    density = std::norm(history.spinor(j).up.values[i]) +
                              std::norm(history.spinor(j).down.values[i]);
                else if (s.params.model == ModelKind::klein_gordon)
                    density = std::norm(history.kg(j).psi.values[i]);
                else
                    density = std::norm(history.scalar(j).values[i]);
                std::cout << t << ',' << format_double(s.grid.x(i)) << ','
                          << format_double(density) << "\n";
            }
        }
        return 0;
    }

    // velocity_field
    RunContext run(history, s.params);
    const int comps =
        (s.params.model == ModelKind::pauli || s.params.model == ModelKind::weyl) ? 2 : 1;
    std::cout << "t,x,component,v\n";
    for (int c = 0; c < comps; ++c) {
        const auto& vh = run.velocity(c);
        for (std::size_t j = 0; j < vh.stack.size(); ++j) {
            const std::string t = format_double(vh.stack.times[j]);
            for (std::size_t i = 0; i < s.grid.n; ++i) {
                const bool def = vh.stack.defined[j][i] != 0;
                std::cout << t << ',' << format_double(s.grid.x(i)) << ',' << c << ','
                          << (def ? format_double(vh.stack.values[j][i]) : "nan") << "\n";
            }
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "1-D quantum trajectory engine: spectral propagators, characteristic\n"
        "velocity fields, trajectory ensembles and an identity-verification\n"
        "suite. Scenario files are JSON; the schema is documented in README.md\n"
        "and exercised by the files under scenarios/."};
    app.require_subcommand(1);

    std::string scenario_path, out_dir = "out";
    std::optional<int> seeds;
    auto* run = app.add_subcommand("run", "propagate a scenario and write run artifacts");
    run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--out", out_dir, "output directory (default: out)");
    int seeds_n = 0;
    auto* seeds_opt = run->add_option(
        "--seeds", seeds_n, "replace scenario seeds with N density quantiles per component");

    std::string suite = "all", verify_out = ".";
    double tol_scale = 1.0;
    bool inject_fault = false;
    auto* verify = app.add_subcommand("verify", "run the verification suite");
    verify->add_option("--suite", suite, "all, or comma-separated check names");
    verify->add_option("--out", verify_out, "report directory (default: .)");
    verify->add_option("--tol-scale", tol_scale,
                       "multiply every tolerance (exploration only, never default)");
    verify->add_flag("--inject-fault", inject_fault,
                     "corrupt each check's input with its documented fault (self-test; "
                     "every check must then fail)");

    std::string run_dir, what, format;
    auto* exp = app.add_subcommand("export", "emit plot-ready long-format tables to stdout");
    exp->add_option("run_dir", run_dir, "directory written by `run` or `verify`")->required();
    exp->add_option("what", what,
                    "density_heatmap | trajectories_overlay | velocity_field | "
                    "residual_convergence")
        ->required();
    exp->add_option("format", format, "csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            if (*seeds_opt) seeds = seeds_n;
            return cmd_run(scenario_path, out_dir, seeds);
        }
        if (*verify) return cmd_verify(suite, verify_out, tol_scale, inject_fault);
        if (*exp) return cmd_export(run_dir, what, format);
    } catch (const ParseError& e) {
        std::cerr << "ParseError: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "ValidationError[" << e.rule << "]: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
