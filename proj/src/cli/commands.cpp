#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "misspec/cli.hpp"

namespace misspec::cli {

namespace {

// Maps exceptions to the documented exit codes: configuration and I/O problems
// give 2, anything that fails during the numerics gives 3.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const NumericalError& e) {
        err << "misspec-krige: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        err << "misspec-krige: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::domain_error& e) {
        err << "misspec-krige: " << e.what() << '\n';
        return kExitConfig;
    } catch (const json::exception& e) {
        err << "misspec-krige: config: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "misspec-krige: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "misspec-krige: failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

}  // namespace

int cmd_run(const std::filesystem::path& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = parse_run_config(load_json(config));
        std::filesystem::create_directories(cfg.output_dir);
        const std::vector<Scenario> scenarios{cfg.scenario};
        const std::vector<ScenarioResult> results = run_scenarios(scenarios, cfg.budget);

        std::ostringstream csv;
        write_ratios_csv(csv, results);
        const std::string diagnostics = diagnostics_json(scenarios, results).dump(2) + "\n";
        write_file_atomically(cfg.output_dir / "ratios.csv", csv.str());
        write_file_atomically(cfg.output_dir / "diagnostics.json", diagnostics);

        const ScenarioResult& r = results.front();
        for (const auto& level : r.table.levels) {
            out << r.scenario << " n=" << level.n << " SUP r_var_1=" << format_double(level.sup()[RatioName::RVar1].value)
                << '\n';
        }
        out << "wrote " << (cfg.output_dir / "ratios.csv").string() << " and "
            << (cfg.output_dir / "diagnostics.json").string() << '\n';
        if (r.failure) {
            err << "misspec-krige: numerical failure in " << r.scenario << ": " << *r.failure
                << " (levels before it were written)\n";
            return static_cast<int>(kExitNumerical);
        }
        return static_cast<int>(kExitOk);
    });
}

int cmd_check(const std::filesystem::path& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const CheckConfig cfg = parse_check_config(load_json(config));
        const AssumptionReport report = assumption_report(cfg.truth, cfg.wrong, cfg.budget);
        out << to_json(report).dump(2) << '\n';
        return static_cast<int>(kExitOk);
    });
}

int cmd_eigen(const std::filesystem::path& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const EigenConfig cfg = parse_eigen_config(load_json(config));
        const KernelPtr kernel = make_kernel(cfg.kernel);
        const NystromEigen e = nystrom_eigen(*kernel, cfg.grid, cfg.rank_cutoff);
        std::ostringstream csv;
        write_eigen_csv(csv, e);
        if (cfg.output.has_parent_path()) {
            std::filesystem::create_directories(cfg.output.parent_path());
        }
        write_file_atomically(cfg.output, csv.str());
        out << kernel->describe() << " on " << cfg.grid_label << ": " << e.rank() << " of "
            << e.all_eigenvalues.size() << " eigenvalues above cutoff, largest "
            << format_double(e.all_eigenvalues[0]) << "; wrote " << cfg.output.string() << '\n';
        return static_cast<int>(kExitOk);
    });
}

int cmd_list_scenarios(std::ostream& out) {
    for (const auto& name : builtin_scenario_names()) {
        const Scenario s = builtin_scenario(name);
        out << name << '\t' << s.description << '\n';
    }
    return kExitOk;
}

int cmd_version(std::ostream& out) {
    out << "misspec-krige " << kVersion << '\n';
    return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Efficiency of kriging under misspecified Gaussian models", "misspec-krige"};
    app.require_subcommand(1, 1);

    std::string run_path;
    std::string check_path;
    std::string eigen_path;
    auto* run = app.add_subcommand("run", "run a scenario and write ratios.csv and diagnostics.json");
    run->add_option("config", run_path, "JSON experiment config")->required();
    auto* check = app.add_subcommand("check", "print the assumption report for a model pair as JSON");
    check->add_option("config", check_path, "JSON model-pair config")->required();
    auto* eigen = app.add_subcommand("eigen", "write Nyström eigenvalues of a kernel on a grid");
    eigen->add_option("config", eigen_path, "JSON kernel and grid config")->required();
    auto* list = app.add_subcommand("list-scenarios", "list the built-in scenarios");
    auto* version = app.add_subcommand("version", "print the version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
    }
    if (run->parsed()) {
        return cmd_run(run_path, out, err);
    }
    if (check->parsed()) {
        return cmd_check(check_path, out, err);
    }
    if (eigen->parsed()) {
        return cmd_eigen(eigen_path, out, err);
    }
    if (list->parsed()) {
        return cmd_list_scenarios(out);
    }
    if (version->parsed()) {
        return cmd_version(out);
    }
    return kExitConfig;
}

}  // namespace misspec::cli
