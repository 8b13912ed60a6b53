#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcgrid/scenario.hpp"
#include "dcgrid/simulator.hpp"

namespace dcgrid {

/// x(t) ~ dc + amplitude * sin(2 pi f t + phase), phase referenced to t = 0.
struct ToneEstimate {
    double dc = 0.0;
    double amplitude = 0.0;
    double phase = 0.0;  // rad
};

/// Single-bin Goertzel over `n_periods` whole periods of f starting at the
/// first sample at or after t_start. `t0` is the time of samples[0] and
/// `sample_step` the spacing. Throws std::out_of_range if the window does
/// not fit in the samples.
ToneEstimate goertzel_amplitude(std::span<const double> samples, double t0, double sample_step,
                                double t_start, int n_periods, double f);

ToneEstimate goertzel_amplitude(const TraceSet& traces, std::string_view channel, double t_start,
                                int n_periods, double f);

struct HarmonicMeasurement {
    std::string channel;
    double center_time = 0.0;
    double window = 0.0;
    double frequency = 0.0;
    double amplitude = 0.0;
    double dc_component = 0.0;
};

HarmonicMeasurement measure_harmonic(const TraceSet& traces, std::string_view channel, double t_start,
                                     int n_periods, double f);

struct WindowMetrics {
    std::string label;  // e.g. "[3,5)"
    double segment_start = 0.0;
    double segment_end = 0.0;
    double t_start = 0.0;  // after settling exclusion
    int periods = 0;
    double window = 0.0;

    std::vector<double> der_mean_power;       // mean of v_t * i_out, W
    std::vector<double> der_filtered_power;   // mean of the droop-path filtered power, W
    std::vector<double> der_mean_voltage;     // V
    std::vector<double> der_voltage_ripple;   // harmonic amplitude of v_t, V
    std::vector<double> der_current_harmonic; // harmonic amplitude of i_out, A
    std::vector<double> line_current_harmonic;
    std::vector<double> line_current_dc;
    double pcc_mean_voltage = 0.0;

    double load_power = 0.0;
    double line_losses = 0.0;
    double stored_energy_rate = 0.0;
    double balance_residual = 0.0;  // (sum P_der - loads - losses - dE/dt) / load power
};

struct MetricsReport {
    double frequency = 0.0;
    double settle_exclusion = 0.0;
    std::vector<WindowMetrics> windows;

    /// Window whose segment starts at `segment_start` (throws if absent).
    const WindowMetrics& window_starting(double segment_start) const;
};

/// Splits the run at the scenario's event times, drops the settling interval
/// after each boundary and evaluates every window over whole periods of the
/// analysis frequency.
MetricsReport scenario_metrics(const TraceSet& traces, const Scenario& scenario);

}  // namespace dcgrid
