// dcgrid: run, sweep or validate a DC microgrid configuration.
//
// Exit codes: 0 ok, 1 I/O error, 2 config or usage error, 3 numerical failure.

#include <iostream>

#include <CLI11.hpp>

#include "dcgrid/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Islanded DC microgrid simulator with hybrid voltage/current control"};
    app.require_subcommand(1, 1);

    dcgrid::CommandOptions opts;
    std::string config;
    std::string preset;
    double duration = 0.0;
    unsigned jobs = 0;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("config", config, "TOML configuration file")->check(CLI::ExistingFile);
        sub->add_option("--preset", preset, "built-in configuration (paper-fig4)");
    };

    auto* run = app.add_subcommand("run", "time-domain simulation: traces.csv and metrics.json");
    common(run);
    run->add_option("-o,--output", opts.output_dir, "output directory");
    auto* run_duration = run->add_option("--duration", duration, "override the run length in seconds");

    auto* sweep = app.add_subcommand("sweep", "AC sweep: bode_<tf>.csv and sweep_meta.json");
    common(sweep);
    sweep->add_option("-o,--output", opts.output_dir, "output directory");
    auto* sweep_duration = sweep->add_option("--duration", duration, "override the timeline length in seconds");
    sweep->add_option("--jobs", jobs, "worker threads (default: number of processors)");
    sweep->add_option("--tf", opts.tfs, "transfer functions: gii,gvi,gvv,giv (default: all)")->delimiter(',');

    auto* validate = app.add_subcommand("validate", "print the resolved configuration");
    common(validate);
    auto* validate_duration = validate->add_option("--duration", duration, "override the run length in seconds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? dcgrid::kExitOk : dcgrid::kExitConfigError;
    }

    if (!config.empty()) opts.config_path = config;
    if (!preset.empty()) opts.preset = preset;
    if (run_duration->count() || sweep_duration->count() || validate_duration->count()) opts.duration = duration;
    if (jobs > 0) opts.jobs = jobs;

    if (run->parsed()) return dcgrid::cmd_run(opts, std::cout, std::cerr);
    if (sweep->parsed()) return dcgrid::cmd_sweep(opts, std::cout, std::cerr);
    return dcgrid::cmd_validate(opts, std::cout, std::cerr);
}
