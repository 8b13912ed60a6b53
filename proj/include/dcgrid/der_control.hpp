#pragma once

// Per-DER control pipeline: power measurement -> low-pass -> droop -> PI
// voltage loop, resonant harmonic-current loop, summed reference, current
// limiter, P inner current loop.

#include <optional>
#include <string_view>

#include "dcgrid/control_blocks.hpp"

namespace dcgrid {

enum class ControlMode { Vcm, Ccm, Hcm };

std::string_view to_string(ControlMode mode) noexcept;
std::optional<ControlMode> parse_control_mode(std::string_view text) noexcept;

struct ResonantParams {
    double kr = 30.0;
    double omega_c = 5.0;
    double omega_0 = 628.32;
};

struct DerControlParams {
    double v_max = 630.0;
    double v_min = 570.0;
    double p_max = 10000.0;
    double kp_v = 0.4;  // PI, A/V
    double ki_v = 50.0;  // PI, A/(V s)
    std::optional<ResonantParams> resonant;
    double kp_i = 5.0;  // inner P, V/A
    double lpf_cutoff = 31.4;  // rad/s
    double comp_fraction = 1.0;
    double i_limit = 0.0;  // <= 0 selects the default 1.2 * p_max / v_min
    ControlMode mode = ControlMode::Vcm;

    double resolved_i_limit() const noexcept;
};

struct Measurements {
    double v_t = 0.0;
    double i_l = 0.0;
    double i_out = 0.0;
    double i_local_load = 0.0;
};

/// Additive small-signal injections on the two HCM reference ports.
struct ReferenceInjection {
    double v_ref = 0.0;
    double i_ref_h = 0.0;
};

/// Every intermediate signal of one controller tick.
struct ControllerOutput {
    double e_ref = 0.0;
    double p_inst = 0.0;
    double p_filtered = 0.0;
    double v_ref = 0.0;
    double i_ref_dc = 0.0;
    double i_ref_h_target = 0.0;
    double i_ref_h = 0.0;
    double i_l_ref = 0.0;
};

class DerController {
public:
    DerController(const DerControlParams& params, double dt);

    /// One control tick. Throws NonFiniteInput (state untouched) when any
    /// measurement or injection is not finite.
    ControllerOutput step(const Measurements& meas, const ReferenceInjection& injection = {});

    /// Newly activated loops start from rest; deactivated loops are frozen.
    void set_mode(ControlMode mode);
    void set_comp_fraction(double fraction);

    ControlMode mode() const noexcept { return mode_; }
    double comp_fraction() const noexcept { return comp_fraction_; }
    double i_limit() const noexcept { return i_limit_; }
    bool has_resonant() const noexcept { return harmonic_r_.has_value(); }

    const DroopCharacteristic& droop() const noexcept { return droop_; }
    const FirstOrderLowPass& power_lpf() const noexcept { return power_lpf_; }
    const PiController& voltage_pi() const noexcept { return voltage_pi_; }
    const std::optional<ResonantController>& harmonic_r() const noexcept { return harmonic_r_; }
    const PController& inner_p() const noexcept { return inner_p_; }

private:
    static bool uses_voltage_loop(ControlMode m) noexcept { return m != ControlMode::Ccm; }
    static bool uses_harmonic_loop(ControlMode m) noexcept { return m != ControlMode::Vcm; }

    ControlMode mode_;
    DroopCharacteristic droop_;
    FirstOrderLowPass power_lpf_;
    PiController voltage_pi_;
    std::optional<ResonantController> harmonic_r_;
    PController inner_p_;
    double comp_fraction_;
    double i_limit_;
};

}  // namespace dcgrid
