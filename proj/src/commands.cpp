#include "dcgrid/commands.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "dcgrid/errors.hpp"

namespace dcgrid {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

// Maps the exception taxonomy onto exit codes.
template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const SimulationError& e) {
        err << "numerical failure at t=" << fmt::format("{}", e.time()) << " s: " << e.what() << '\n';
        return kExitNumericalFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitIoError;
    }
}

}  // namespace

void override_duration(Scenario& scenario, double duration) {
    scenario.solver.duration = duration;
    std::erase_if(scenario.events, [duration](const Event& e) { return e.time > duration; });
}

Config resolve_config(const CommandOptions& options) {
    if (options.config_path && options.preset) {
        throw ConfigError("--preset", "give either a config file or --preset, not both");
    }
    Config cfg;
    if (options.config_path) cfg = load_config(*options.config_path);
    else if (options.preset) cfg = preset_config(*options.preset);
    else throw ConfigError("", "no configuration: pass a config file or --preset");

    if (options.duration) {
        override_duration(cfg.scenario, *options.duration);
        cfg.scenario.validate();
    }
    if (options.jobs) cfg.sweep.jobs = *options.jobs;
    return cfg;
}

std::vector<TransferFunctionId> parse_tf_list(const std::vector<std::string>& items) {
    std::vector<TransferFunctionId> tfs;
    for (const auto& item : items) {
        std::stringstream ss(item);
        std::string name;
        while (std::getline(ss, name, ',')) {
            if (name.empty()) continue;
            const auto tf = parse_transfer_function(name);
            if (!tf) throw ConfigError("--tf", "unknown transfer function '" + name + "' (expected gii, gvi, gvv, giv)");
            if (std::find(tfs.begin(), tfs.end(), *tf) == tfs.end()) tfs.push_back(*tf);
        }
    }
    if (tfs.empty()) {
        tfs = {TransferFunctionId::Gii, TransferFunctionId::Gvi, TransferFunctionId::Gvv, TransferFunctionId::Giv};
    }
    return tfs;
}

void write_traces_csv(const TraceSet& traces, std::ostream& out) {
    out << "time_s";
    for (const auto& n : traces.names()) out << ',' << n;
    out << '\n';
    std::string row;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        row = fmt::format("{}", traces.time()[i]);
        for (std::size_t c = 0; c < traces.names().size(); ++c) {
            row += ',';
            row += fmt::format("{}", traces.column(c)[i]);
        }
        row += '\n';
        out << row;
    }
}

void write_bode_csv(const BodeCurve& curve, std::ostream& out) {
    out << "freq_hz,mag_db,phase_deg\n";
    for (const auto& s : curve.samples) {
        out << fmt::format("{},{},{}\n", s.frequency, s.magnitude_db, s.phase_deg);
    }
}

nlohmann::json metrics_json(const MetricsReport& report) {
    nlohmann::json windows = nlohmann::json::array();
    for (const auto& w : report.windows) {
        windows.push_back({
            {"label", w.label},
            {"segment_start_s", w.segment_start},
            {"segment_end_s", w.segment_end},
            {"t_start_s", w.t_start},
            {"periods", w.periods},
            {"window_s", w.window},
            {"der_mean_power_w", w.der_mean_power},
            {"der_filtered_power_w", w.der_filtered_power},
            {"der_mean_voltage_v", w.der_mean_voltage},
            {"der_voltage_ripple_v", w.der_voltage_ripple},
            {"der_current_harmonic_a", w.der_current_harmonic},
            {"line_current_harmonic_a", w.line_current_harmonic},
            {"line_current_dc_a", w.line_current_dc},
            {"pcc_mean_voltage_v", w.pcc_mean_voltage},
            {"energy_balance",
             {{"load_power_w", w.load_power},
              {"line_losses_w", w.line_losses},
              {"stored_energy_rate_w", w.stored_energy_rate},
              {"relative_residual", w.balance_residual}}},
        });
    }
    return {
        {"analysis_frequency_hz", report.frequency},
        {"settle_exclusion_s", report.settle_exclusion},
        {"windows", windows},
    };
}

int cmd_run(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Config cfg = resolve_config(options);
        const TraceSet traces = run(cfg.scenario);
        const MetricsReport report = scenario_metrics(traces, cfg.scenario);

        ensure_dir(options.output_dir);
        {
            auto f = open_output(options.output_dir / "traces.csv");
            write_traces_csv(traces, f);
        }
        {
            auto f = open_output(options.output_dir / "metrics.json");
            f << metrics_json(report).dump(2) << '\n';
        }
        out << "wrote " << traces.size() << " samples x " << traces.names().size() << " channels to "
            << (options.output_dir / "traces.csv").string() << '\n';
        return static_cast<int>(kExitOk);
    });
}

int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto tfs = parse_tf_list(options.tfs);
        const Config cfg = resolve_config(options);
        const auto curves = ac_sweep(cfg.scenario, tfs, cfg.sweep);

        ensure_dir(options.output_dir);
        nlohmann::json failures = nlohmann::json::array();
        nlohmann::json floor = nlohmann::json::array();
        for (const auto& c : curves) {
            const std::string name = std::string(to_string(c.tf));
            auto f = open_output(options.output_dir / ("bode_" + name + ".csv"));
            write_bode_csv(c, f);
            for (const auto& fl : c.failures) {
                failures.push_back({{"tf", name}, {"frequency_hz", fl.frequency}, {"message", fl.message}});
            }
            for (const auto& s : c.samples) {
                if (s.below_floor) floor.push_back({{"tf", name}, {"frequency_hz", s.frequency}});
            }
            out << "wrote " << (options.output_dir / ("bode_" + name + ".csv")).string() << " (" << c.samples.size()
                << " points, " << c.failures.size() << " failures)\n";
        }

        const auto& sw = cfg.sweep;
        nlohmann::json settle = nlohmann::json::array();
        for (double f : sw.frequencies) settle.push_back(sw.settle_periods(f));
        const nlohmann::json meta = {
            {"operating_point_hash", config_hash(cfg)},
            {"der", node_name(sw.der, cfg.scenario.network.ders.size())},
            {"warmup_s", sw.warmup},
            {"voltage_amplitude_v", sw.voltage_amplitude},
            {"current_amplitude_a", sw.current_amplitude},
            {"measure_periods", sw.measure_periods},
            {"frequencies_hz", sw.frequencies},
            {"settle_periods", settle},
            {"floor_sentinel_db", kFloorSentinelDb},
            {"below_floor", floor},
            {"failures", failures},
        };
        auto f = open_output(options.output_dir / "sweep_meta.json");
        f << meta.dump(2) << '\n';
        return static_cast<int>(kExitOk);
    });
}

int cmd_validate(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Config cfg = resolve_config(options);
        out << to_toml(cfg);
        return static_cast<int>(kExitOk);
    });
}

}  // namespace dcgrid
