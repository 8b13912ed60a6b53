#pragma once

// Simulation-based AC sweep of DER-level closed-loop transfer functions.
//
// For each frequency the operating point is perturbed with a small sinusoid,
// once on each reference port. The unperturbed (baseline) trajectory is
// subtracted from each perturbed one and the reference signals and outputs
// are correlated at the injection frequency over whole periods. The gains
// are taken with respect to the actual reference signals, which the droop
// path also moves, by solving the resulting 2x2 system. The baseline
// subtraction removes load-driven content such as the 100 Hz load current.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcgrid/scenario.hpp"
#include "dcgrid/simulator.hpp"

namespace dcgrid {

/// Gii: i_ref_h -> i_out, Gvi: v_ref -> i_out, Gvv: v_ref -> v_t, Giv: i_ref_h -> v_t
enum class TransferFunctionId { Gii, Gvi, Gvv, Giv };

std::string_view to_string(TransferFunctionId id) noexcept;
std::optional<TransferFunctionId> parse_transfer_function(std::string_view text) noexcept;
InjectionPort input_port(TransferFunctionId id) noexcept;

struct SweepConfig {
    std::vector<double> frequencies = default_frequency_grid();
    double voltage_amplitude = 1.0;  // V, on v_ref
    double current_amplitude = 0.1;  // A, on i_ref_h
    int min_settle_periods = 20;
    double settle_seconds = 2.0;
    int measure_periods = 10;
    double warmup = 4.5;  // seconds of the scenario timeline run before injecting
    std::size_t der = 0;
    unsigned jobs = 0;  // 0: hardware concurrency

    int settle_periods(double f) const;

    /// 60 log-spaced points over [0.5, 1000] Hz plus 20 linear points in
    /// [80, 125] Hz, merged and sorted.
    static std::vector<double> default_frequency_grid();

    /// Throws ConfigError.
    void validate(const Scenario& scenario) const;
};

struct BodeSample {
    double frequency = 0.0;    // Hz
    double magnitude_db = 0.0;
    double phase_deg = 0.0;
    bool below_floor = false;  // response under 1e-9: magnitude is the -200 dB sentinel
};

struct SweepFailure {
    double frequency = 0.0;
    std::string message;
};

struct BodeCurve {
    TransferFunctionId tf = TransferFunctionId::Gii;
    std::vector<BodeSample> samples;
    std::vector<SweepFailure> failures;

    /// Linear interpolation in log-frequency; throws if f is outside the curve.
    BodeSample at(double f) const;
};

inline constexpr double kResponseFloor = 1e-9;
inline constexpr double kFloorSentinelDb = -200.0;

/// Brings adjacent phase deltas into (-180, 180] by adding multiples of 360.
std::vector<BodeSample> unwrap_phase(std::vector<BodeSample> samples);

/// Sweeps every requested transfer function. All four gains come from the
/// same runs, so requesting more of them costs nothing extra.
std::vector<BodeCurve> ac_sweep(const Scenario& scenario, std::span<const TransferFunctionId> tfs,
                                const SweepConfig& cfg);

BodeCurve ac_sweep(const Scenario& scenario, TransferFunctionId tf, const SweepConfig& cfg);

}  // namespace dcgrid
