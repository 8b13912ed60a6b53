#pragma once

// Discrete-time controller primitives shared by every DER control mode.
// All blocks run at a fixed sample time chosen at construction.

#include <optional>

namespace dcgrid {

struct OutputLimits {
    double min;
    double max;
};

/// PI controller with trapezoidal integration and conditional-integration
/// anti-windup. The output is kp*e plus the integrator value held *before*
/// the current sample's update.
class PiController {
public:
    PiController(double kp, double ki, double dt, std::optional<OutputLimits> limits = std::nullopt);

    double step(double error);
    void reset() noexcept;

    double kp() const noexcept { return kp_; }
    double ki() const noexcept { return ki_; }
    double dt() const noexcept { return dt_; }
    double integrator() const noexcept { return integrator_; }
    void set_integrator(double value);
    const std::optional<OutputLimits>& limits() const noexcept { return limits_; }

private:
    double clamp(double v) const noexcept;

    double kp_;
    double ki_;
    double dt_;
    std::optional<OutputLimits> limits_;
    double integrator_ = 0.0;
    double prev_error_ = 0.0;
};

/// Normalised second-order difference equation (a0 == 1):
///   y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct BiquadCoefficients {
    double b0 = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
};

/// Bilinear transform of R(s) = 2 kr wc s / (s^2 + 2 wc s + w0^2), prewarped
/// so the discrete response at w0 equals the continuous one exactly.
/// Throws std::domain_error when dt*omega_0 >= pi.
BiquadCoefficients discretize_prewarped(double omega_0, double omega_c, double kr, double dt);

/// Non-ideal resonant controller, transposed direct form II.
class ResonantController {
public:
    ResonantController(double kr, double omega_c, double omega_0, double dt);

    double step(double error);
    void reset() noexcept;

    double kr() const noexcept { return kr_; }
    double omega_c() const noexcept { return omega_c_; }
    double omega_0() const noexcept { return omega_0_; }
    const BiquadCoefficients& coefficients() const noexcept { return coef_; }
    bool at_rest() const noexcept { return s1_ == 0.0 && s2_ == 0.0; }

private:
    double kr_;
    double omega_c_;
    double omega_0_;
    BiquadCoefficients coef_;
    double s1_ = 0.0;
    double s2_ = 0.0;
};

class PController {
public:
    explicit PController(double kp);

    double step(double error) const;
    double kp() const noexcept { return kp_; }

private:
    double kp_;
};

/// First-order lag w/(s+w), discretised by exact ZOH pole mapping.
class FirstOrderLowPass {
public:
    FirstOrderLowPass(double omega_cut, double dt, double initial = 0.0);

    double step(double input);
    void reset(double value = 0.0) noexcept { state_ = value; }

    double value() const noexcept { return state_; }
    double omega_cut() const noexcept { return omega_cut_; }

private:
    double omega_cut_;
    double alpha_;
    double state_;
};

/// Linear P-V droop: v_ref = v_max - slope * P, slope = (v_max - v_min) / p_max.
/// Not clamped; power above p_max extrapolates below v_min.
class DroopCharacteristic {
public:
    DroopCharacteristic(double v_max, double v_min, double p_max);

    double voltage_ref(double p_filtered) const;

    double v_max() const noexcept { return v_max_; }
    double v_min() const noexcept { return v_min_; }
    double p_max() const noexcept { return p_max_; }
    double slope() const noexcept { return slope_; }

private:
    double v_max_;
    double v_min_;
    double p_max_;
    double slope_;
};

}  // namespace dcgrid
