#include "dcgrid/der_control.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dcgrid/errors.hpp"

namespace dcgrid {

std::string_view to_string(ControlMode mode) noexcept {
    switch (mode) {
        case ControlMode::Vcm: return "vcm";
        case ControlMode::Ccm: return "ccm";
        case ControlMode::Hcm: return "hcm";
    }
    return "?";
}

std::optional<ControlMode> parse_control_mode(std::string_view text) noexcept {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "vcm") return ControlMode::Vcm;
    if (lower == "ccm") return ControlMode::Ccm;
    if (lower == "hcm") return ControlMode::Hcm;
    return std::nullopt;
}

double DerControlParams::resolved_i_limit() const noexcept {
    return i_limit > 0.0 ? i_limit : 1.2 * p_max / v_min;
}

namespace {

void check_fraction(double f) {
    if (!(f >= 0.0 && f <= 1.0)) {
        throw std::invalid_argument("compensation fraction must lie in [0, 1], got " + std::to_string(f));
    }
}

}  // namespace

DerController::DerController(const DerControlParams& p, double dt)
    : mode_(p.mode),
      droop_(p.v_max, p.v_min, p.p_max),
      power_lpf_(p.lpf_cutoff, dt),
      voltage_pi_(p.kp_v, p.ki_v, dt,
                  OutputLimits{-p.resolved_i_limit(), p.resolved_i_limit()}),
      inner_p_(p.kp_i),
      comp_fraction_(p.comp_fraction),
      i_limit_(p.resolved_i_limit()) {
    check_fraction(p.comp_fraction);
    if (p.resonant) {
        harmonic_r_.emplace(p.resonant->kr, p.resonant->omega_c, p.resonant->omega_0, dt);
    }
    if (uses_harmonic_loop(mode_) && !harmonic_r_) {
        throw std::invalid_argument("DER controller in " + std::string(to_string(mode_)) +
                                    " mode needs resonant controller parameters");
    }
}

ControllerOutput DerController::step(const Measurements& m, const ReferenceInjection& inj) {
    for (double v : {m.v_t, m.i_l, m.i_out, m.i_local_load, inj.v_ref, inj.i_ref_h}) {
        if (!std::isfinite(v)) {
            throw NonFiniteInput("DerController: non-finite measurement");
        }
    }

    ControllerOutput out;
    out.p_inst = m.v_t * m.i_out;
    out.p_filtered = power_lpf_.step(out.p_inst);
    out.v_ref = droop_.voltage_ref(out.p_filtered) + inj.v_ref;

    if (uses_voltage_loop(mode_)) {
        out.i_ref_dc = voltage_pi_.step(out.v_ref - m.v_t);
    }

    // No harmonic extraction: the resonant block picks out its own frequency.
    out.i_ref_h_target = comp_fraction_ * m.i_local_load + inj.i_ref_h;
    if (uses_harmonic_loop(mode_)) {
        out.i_ref_h = harmonic_r_->step(out.i_ref_h_target - m.i_out);
    }

    out.i_l_ref = std::clamp(out.i_ref_dc + out.i_ref_h, -i_limit_, i_limit_);
    // Terminal-voltage feedforward; the P loop supplies the L_f drop only.
    out.e_ref = m.v_t + inner_p_.step(out.i_l_ref - m.i_l);
    return out;
}

void DerController::set_mode(ControlMode mode) {
    if (uses_harmonic_loop(mode) && !harmonic_r_) {
        throw std::invalid_argument("DER controller has no resonant controller for mode " +
                                    std::string(to_string(mode)));
    }
    if (uses_voltage_loop(mode) && !uses_voltage_loop(mode_)) voltage_pi_.reset();
    if (uses_harmonic_loop(mode) && !uses_harmonic_loop(mode_)) harmonic_r_->reset();
    mode_ = mode;
}

void DerController::set_comp_fraction(double fraction) {
    check_fraction(fraction);
    comp_fraction_ = fraction;
}

}  // namespace dcgrid
