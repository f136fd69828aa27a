/// Command-line front end.
///
/// Verbs:
///   run         simulate a scenario file and write timeseries.csv,
///               metrics.json and resolved_config.json into --out
///   validate    parse and cross-check a scenario file without running it
///   compare     column-wise comparison of two recorded CSV files
///   acceptance  run the acceptance suite against the bundled scenarios
///
/// Exit codes: 0 success, 1 simulation failure / criteria failed / files
/// differ, 2 configuration or usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI/CLI.hpp>

#include "fluxsim/accept/acceptance.hpp"
#include "fluxsim/cfg/scenario.hpp"
#include "fluxsim/errors.hpp"
#include "fluxsim/sim/csv.hpp"
#include "fluxsim/sim/engine.hpp"
#include "fluxsim/sim/metrics.hpp"

namespace fs = std::filesystem;

namespace {

struct RunArgs {
    std::string scenario;
    std::string out = "out";
    std::string controller;
    double dt = 0.0;
    double t_end = 0.0;
    int record_every = 0;
};

int do_run(const RunArgs& a) {
    auto sc = fluxsim::cfg::load_scenario_file(a.scenario);
    if (a.dt > 0.0) sc.dt = a.dt;
    if (a.t_end > 0.0) sc.t_end = a.t_end;
    if (a.record_every > 0) sc.record_every = a.record_every;
    if (!a.controller.empty()) {
        for (auto& w : sc.wpgs) {
            w.controller = a.controller;
            if (a.controller == "avscm") w.lbfc.enabled = false;
        }
    }

    fluxsim::sim::Engine engine(sc);
    engine.run();

    fs::create_directories(a.out);
    engine.recorder().write_csv((fs::path(a.out) / "timeseries.csv").string());
    {
        std::ofstream m(fs::path(a.out) / "metrics.json");
        m << engine.metrics().headline(engine).dump(2) << "\n";
    }
    {
        std::ofstream c(fs::path(a.out) / "resolved_config.json");
        c << fluxsim::cfg::scenario_to_json(sc).dump(2) << "\n";
    }

    std::cout << "simulated " << sc.name << ": " << engine.total_steps() << " steps, "
              << engine.recorder().row_count() << " rows -> " << a.out << "\n";
    return 0;
}

int do_validate(const std::string& path) {
    const auto sc = fluxsim::cfg::load_scenario_file(path);
    std::cout << sc.name << ": ok (" << sc.buses.size() << " buses, " << sc.wpgs.size()
              << " units, " << sc.events.size() << " events, " << sc.total_steps()
              << " steps)\n";
    return 0;
}

int do_compare(const std::string& pa, const std::string& pb, double tol) {
    const auto a = fluxsim::sim::read_csv(pa);
    const auto b = fluxsim::sim::read_csv(pb);
    if (a.columns != b.columns) {
        std::cout << "column sets differ (" << a.columns.size() << " vs " << b.columns.size()
                  << ")\n";
        return 1;
    }
    if (a.rows.size() != b.rows.size()) {
        std::cout << "row counts differ (" << a.rows.size() << " vs " << b.rows.size() << ")\n";
        return 1;
    }
    bool ok = true;
    for (std::size_t c = 0; c < a.columns.size(); ++c) {
        double worst = 0.0;
        std::size_t worst_row = 0;
        for (std::size_t r = 0; r < a.rows.size(); ++r) {
            const double d = std::fabs(a.rows[r][c] - b.rows[r][c]);
            if (d > worst) {
                worst = d;
                worst_row = r;
            }
        }
        if (worst > tol) {
            ok = false;
            std::printf("%-24s max |diff| %.6g at row %zu\n", a.columns[c].c_str(), worst,
                        worst_row);
        }
    }
    std::cout << (ok ? "files match" : "files differ") << " (tolerance " << tol << ")\n";
    return ok ? 0 : 1;
}

int do_acceptance(const std::string& scenario_dir, const std::string& work_dir) {
    const auto report = fluxsim::accept::run_acceptance(scenario_dir, work_dir, std::cout);
    int failed = 0;
    for (const auto& r : report.results)
        if (!r.pass) ++failed;
    std::cout << report.results.size() - failed << "/" << report.results.size()
              << " criteria passed\n";
    return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fixed-step electromagnetic transient simulator for "
                 "converter-based sources with flux-tracking control"};
    app.require_subcommand(1);

    RunArgs ra;
    auto* run = app.add_subcommand("run", "simulate a scenario and write results");
    run->add_option("scenario", ra.scenario, "scenario file (.scn)")->required();
    run->add_option("--out", ra.out, "output directory (default: out)");
    run->add_option("--dt", ra.dt, "override step size in seconds")
        ->check(CLI::PositiveNumber);
    run->add_option("--t-end", ra.t_end, "override end time in seconds")
        ->check(CLI::PositiveNumber);
    run->add_option("--controller", ra.controller,
                    "override the controller on every unit")
        ->check(CLI::IsMember({"nfscm", "avscm"}));
    run->add_option("--record-every", ra.record_every, "record every Nth step")
        ->check(CLI::PositiveNumber);

    std::string val_path;
    auto* val = app.add_subcommand("validate", "parse and cross-check a scenario file");
    val->add_option("scenario", val_path, "scenario file (.scn)")->required();

    std::string cmp_a, cmp_b;
    double cmp_tol = 0.0;
    auto* cmp = app.add_subcommand("compare", "compare two recorded CSV files");
    cmp->add_option("a", cmp_a, "first CSV")->required();
    cmp->add_option("b", cmp_b, "second CSV")->required();
    cmp->add_option("--tol", cmp_tol, "per-cell absolute tolerance (default: exact)");

    std::string acc_scenarios = "scenarios", acc_work = "acceptance_out";
    auto* acc = app.add_subcommand("acceptance", "run the acceptance suite");
    acc->add_option("--scenarios", acc_scenarios, "directory holding the bundled scenarios");
    acc->add_option("--work", acc_work, "scratch directory for run artifacts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return do_run(ra);
        if (val->parsed()) return do_validate(val_path);
        if (cmp->parsed()) return do_compare(cmp_a, cmp_b, cmp_tol);
        if (acc->parsed()) return do_acceptance(acc_scenarios, acc_work);
    } catch (const fluxsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const fluxsim::SimulationFault& e) {
        std::cerr << "simulation fault: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
