#pragma once

// The run / sweep / validate commands behind the command-line tool, plus
// the writers for their output files.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcgrid/config.hpp"
#include "dcgrid/freq_analysis.hpp"
#include "dcgrid/metrics.hpp"
#include "dcgrid/simulator.hpp"

namespace dcgrid {

/// Process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitIoError = 1,
    kExitConfigError = 2,
    kExitNumericalFailure = 3,
};

struct CommandOptions {
    std::optional<std::filesystem::path> config_path;
    std::optional<std::string> preset;
    std::filesystem::path output_dir = ".";
    std::optional<double> duration;  // overrides [solver].duration, drops later events
    std::optional<unsigned> jobs;
    std::vector<std::string> tfs;  // sweep only; empty means all four
};

/// Loads the config named by the options and applies the overrides.
/// Throws ConfigError.
Config resolve_config(const CommandOptions& options);

/// Applies a duration override: events after the new end are dropped.
void override_duration(Scenario& scenario, double duration);

/// Comma-separated, case-insensitive. Throws ConfigError on unknown names.
std::vector<TransferFunctionId> parse_tf_list(const std::vector<std::string>& items);

void write_traces_csv(const TraceSet& traces, std::ostream& out);
void write_bode_csv(const BodeCurve& curve, std::ostream& out);
nlohmann::json metrics_json(const MetricsReport& report);

/// Each command reports diagnostics on `err` and returns an ExitCode.
int cmd_run(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_validate(const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace dcgrid
