#ifndef STOWAVE_CLI_HPP
#define STOWAVE_CLI_HPP

// Command-line front end: `run <config>`, `list`, `validate <config>`.
// Exit codes: 0 success, 1 runtime failure, 2 config error, 3 hypothesis violated.

#include <exception>
#include <iomanip>
#include <ostream>
#include <string>

#include "CLI11.hpp"

#include "experiments.hpp"

namespace stowave {

enum ExitCode : int { exit_ok = 0, exit_runtime = 1, exit_config = 2, exit_hypothesis = 3 };

inline void print_catalog(std::ostream& out) {
    for (const auto& e : experiment_catalog())
        out << std::left << std::setw(16) << e.name << ' ' << e.description << "\n"
            << std::setw(16) << "" << " checks: " << e.anchor << "\n";
}

/// Runs `fn`, mapping failures to a diagnostic on `err` and an exit code.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const HypothesisError& e) {
        err << "stowave: hypothesis violated: " << e.what() << "\n";
        return exit_hypothesis;
    } catch (const ConfigError& e) {
        err << "stowave: " << e.what() << "\n";
        return exit_config;
    } catch (const BlowUpError& e) {
        err << "stowave: stage 'solve' failed: " << e.what() << "\n";
        return exit_runtime;
    } catch (const std::invalid_argument& e) {
        err << "stowave: invalid configuration: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        err << "stowave: " << e.what() << "\n";
        return exit_runtime;
    }
}

inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spectral simulator for the stochastic wave equation with correlated noise", "stowave"};
    app.set_version_flag("--version", tool_version);
    app.require_subcommand(1);
    std::string run_path, validate_path;
    auto* run = app.add_subcommand("run", "validate a config, run its experiment, write outputs and a manifest");
    run->add_option("config", run_path, "config file")->required();
    auto* list = app.add_subcommand("list", "list the available experiments");
    auto* validate = app.add_subcommand("validate", "parse and validate a config without running it");
    validate->add_option("config", validate_path, "config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, x;
        const int code = app.exit(e, o, x);
        out << o.str();
        err << x.str();
        return code == 0 ? exit_ok : exit_config;
    }

    if (list->parsed()) {
        print_catalog(out);
        return exit_ok;
    }
    if (validate->parsed()) {
        return guarded(err, [&] {
            const auto cfg = load_config(validate_path);
            const auto model = build_model(cfg);
            for (const auto& w : model.warnings) err << "stowave: warning: " << w << "\n";
            out << "ok: " << cfg.experiment << " config " << cfg.hash << "\n";
            return int(exit_ok);
        });
    }
    (void)run;
    return guarded(err, [&] {
        const auto cfg = load_config(run_path);
        const auto dir = resolve_output_dir(cfg);
        const auto manifest = run_experiment(cfg, dir);
        out << "ok: " << cfg.experiment << " -> " << dir.string() << " (" << manifest.files.size()
            << " files + manifest.json)\n";
        return int(exit_ok);
    });
}

} // namespace stowave

#endif
