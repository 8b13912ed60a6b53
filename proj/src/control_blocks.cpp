#include "dcgrid/control_blocks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "dcgrid/errors.hpp"

namespace dcgrid {

namespace {

void require_finite(double v, const char* who) {
    if (!std::isfinite(v)) {
        throw NonFiniteInput(std::string(who) + ": non-finite input");
    }
}

void require(bool ok, const char* msg) {
    if (!ok) {
        throw std::invalid_argument(msg);
    }
}

}  // namespace

// ---------------------------------------------------------------- PI

PiController::PiController(double kp, double ki, double dt, std::optional<OutputLimits> limits)
    : kp_(kp), ki_(ki), dt_(dt), limits_(limits) {
    require(std::isfinite(kp) && kp >= 0.0, "PiController: kp must be >= 0");
    require(std::isfinite(ki) && ki >= 0.0, "PiController: ki must be >= 0");
    require(std::isfinite(dt) && dt > 0.0, "PiController: dt must be > 0");
    if (limits_) {
        require(limits_->min < limits_->max, "PiController: limits must satisfy min < max");
    }
}

double PiController::clamp(double v) const noexcept {
    return limits_ ? std::clamp(v, limits_->min, limits_->max) : v;
}

double PiController::step(double error) {
    require_finite(error, "PiController");

    const double raw = kp_ * error + integrator_;
    const double out = clamp(raw);

    // Conditional integration: freeze while saturated and the error pushes
    // further into the limit.
    const bool wind_up = limits_ && ((raw > limits_->max && error > 0.0) ||
                                     (raw < limits_->min && error < 0.0));
    if (!wind_up) {
        integrator_ += ki_ * dt_ * 0.5 * (error + prev_error_);
        integrator_ = clamp(integrator_);
    }
    prev_error_ = error;
    return out;
}

void PiController::reset() noexcept {
    integrator_ = 0.0;
    prev_error_ = 0.0;
}

void PiController::set_integrator(double value) {
    require_finite(value, "PiController::set_integrator");
    integrator_ = clamp(value);
}

// ---------------------------------------------------------------- resonant

BiquadCoefficients discretize_prewarped(double omega_0, double omega_c, double kr, double dt) {
    if (!(dt > 0.0) || !(omega_0 > 0.0)) {
        throw std::domain_error("discretize_prewarped: dt and omega_0 must be positive");
    }
    const double half_angle = 0.5 * omega_0 * dt;
    if (omega_0 * dt >= std::numbers::pi) {
        throw std::domain_error("discretize_prewarped: resonance beyond Nyquist (dt*omega_0 = " +
                                std::to_string(omega_0 * dt) + " >= pi)");
    }
    // s -> k (z-1)/(z+1) with k = w0 / tan(w0 dt / 2)
    const double k = omega_0 / std::tan(half_angle);
    const double k2 = k * k;
    const double w02 = omega_0 * omega_0;
    const double a0 = k2 + 2.0 * omega_c * k + w02;

    BiquadCoefficients c;
    c.b0 = 2.0 * kr * omega_c * k / a0;
    c.b1 = 0.0;
    c.b2 = -c.b0;
    c.a1 = 2.0 * (w02 - k2) / a0;
    c.a2 = (k2 - 2.0 * omega_c * k + w02) / a0;
    return c;
}

ResonantController::ResonantController(double kr, double omega_c, double omega_0, double dt)
    : kr_(kr), omega_c_(omega_c), omega_0_(omega_0) {
    require(std::isfinite(kr) && kr > 0.0, "ResonantController: kr must be > 0");
    require(std::isfinite(omega_c) && omega_c > 0.0, "ResonantController: omega_c must be > 0");
    require(std::isfinite(omega_0) && omega_0 > 0.0, "ResonantController: omega_0 must be > 0");
    require(omega_c < omega_0 / 10.0, "ResonantController: omega_c must be below omega_0/10");
    coef_ = discretize_prewarped(omega_0, omega_c, kr, dt);
}

double ResonantController::step(double error) {
    require_finite(error, "ResonantController");
    const double y = coef_.b0 * error + s1_;
    s1_ = coef_.b1 * error - coef_.a1 * y + s2_;
    s2_ = coef_.b2 * error - coef_.a2 * y;
    return y;
}

void ResonantController::reset() noexcept {
    s1_ = 0.0;
    s2_ = 0.0;
}

// ---------------------------------------------------------------- P

PController::PController(double kp) : kp_(kp) {
    require(std::isfinite(kp) && kp > 0.0, "PController: kp must be > 0");
}

double PController::step(double error) const {
    require_finite(error, "PController");
    return kp_ * error;
}

// ---------------------------------------------------------------- low-pass

FirstOrderLowPass::FirstOrderLowPass(double omega_cut, double dt, double initial)
    : omega_cut_(omega_cut), state_(initial) {
    require(std::isfinite(omega_cut) && omega_cut > 0.0, "FirstOrderLowPass: omega_cut must be > 0");
    require(std::isfinite(dt) && dt > 0.0, "FirstOrderLowPass: dt must be > 0");
    alpha_ = -std::expm1(-omega_cut * dt);
}

double FirstOrderLowPass::step(double input) {
    require_finite(input, "FirstOrderLowPass");
    state_ += alpha_ * (input - state_);
    return state_;
}

// ---------------------------------------------------------------- droop

DroopCharacteristic::DroopCharacteristic(double v_max, double v_min, double p_max)
    : v_max_(v_max), v_min_(v_min), p_max_(p_max) {
    require(std::isfinite(v_min) && v_min > 0.0, "DroopCharacteristic: v_min must be > 0");
    require(std::isfinite(v_max) && v_max > v_min, "DroopCharacteristic: v_max must exceed v_min");
    require(std::isfinite(p_max) && p_max > 0.0, "DroopCharacteristic: p_max must be > 0");
    slope_ = (v_max_ - v_min_) / p_max_;
}

double DroopCharacteristic::voltage_ref(double p_filtered) const {
    require_finite(p_filtered, "DroopCharacteristic");
    return v_max_ - slope_ * p_filtered;
}

}  // namespace dcgrid
