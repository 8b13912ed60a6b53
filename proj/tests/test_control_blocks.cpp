#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "dcgrid/control_blocks.hpp"
#include "dcgrid/metrics.hpp"

using namespace dcgrid;
using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

// Continuous R(s) = 2 kr wc s / (s^2 + 2 wc s + w0^2)
cd resonant_response(double kr, double wc, double w0, double w) {
    const cd s(0.0, w);
    return 2.0 * kr * wc * s / (s * s + 2.0 * wc * s + w0 * w0);
}

cd biquad_response(const BiquadCoefficients& c, double w, double dt) {
    const cd z1 = std::polar(1.0, -w * dt);
    return (c.b0 + c.b1 * z1 + c.b2 * z1 * z1) / (1.0 + c.a1 * z1 + c.a2 * z1 * z1);
}

struct Tone {
    double amplitude;
    double phase;
    double mean;
};

// Drives the block with sin(w t), settles, then measures the output tone.
Tone drive_resonant(ResonantController& r, double w, double dt, int settle_periods, int measure_periods) {
    const double f = w / (2.0 * kPi);
    const auto settle = static_cast<long>(std::llround(settle_periods / (f * dt)));
    const auto measure = static_cast<long>(std::llround(measure_periods / (f * dt)));
    std::vector<double> y;
    y.reserve(static_cast<std::size_t>(measure));
    for (long n = 0; n < settle + measure; ++n) {
        const double out = r.step(std::sin(w * static_cast<double>(n) * dt));
        if (n >= settle) y.push_back(out);
    }
    const double t0 = static_cast<double>(settle) * dt;
    const auto est = goertzel_amplitude(y, t0, dt, t0, measure_periods, f);
    return {est.amplitude, est.phase, est.dc};
}

}  // namespace

TEST_SUITE("droop") {
    TEST_CASE("endpoints and midpoint") {
        const DroopCharacteristic d(630.0, 570.0, 10000.0);
        CHECK(d.voltage_ref(0.0) == 630.0);
        CHECK(d.voltage_ref(10000.0) == 570.0);
        CHECK(d.voltage_ref(5000.0) == doctest::Approx(600.0).epsilon(1e-14));
        CHECK(d.slope() == doctest::Approx(0.006).epsilon(1e-14));
    }

    TEST_CASE("endpoints are exact for arbitrary ratings") {
        const double ratings[][3] = {{630, 570, 10000}, {400, 380, 2500}, {1000.5, 999.25, 1.0}, {48, 44, 350}};
        for (const auto& r : ratings) {
            const DroopCharacteristic d(r[0], r[1], r[2]);
            CHECK(d.voltage_ref(0.0) == r[0]);
            CHECK(d.voltage_ref(r[2]) == r[1]);
        }
    }

    TEST_CASE("no clamp beyond rated power") {
        const DroopCharacteristic d(630.0, 570.0, 10000.0);
        CHECK(d.voltage_ref(12000.0) == doctest::Approx(558.0));
        CHECK(d.voltage_ref(-1000.0) == doctest::Approx(636.0));
    }

    TEST_CASE("invalid ratings") {
        CHECK_THROWS_AS(DroopCharacteristic(570.0, 630.0, 10000.0), std::invalid_argument);
        CHECK_THROWS_AS(DroopCharacteristic(630.0, 570.0, 0.0), std::invalid_argument);
    }
}

TEST_SUITE("pi") {
    TEST_CASE("zero error from rest gives zero") {
        PiController pi(0.4, 50.0, 1e-5);
        CHECK(pi.step(0.0) == 0.0);
    }

    TEST_CASE("unit step held for one second") {
        const double dt = 1e-5;
        PiController pi(0.4, 50.0, dt);
        const long n = std::lround(1.0 / dt);
        for (long k = 0; k < n; ++k) pi.step(1.0);
        // analytic kp*e + ki*e*t at t = 1 s
        CHECK(pi.step(1.0) == doctest::Approx(50.4).epsilon(1e-4));
    }

    TEST_CASE("output uses the integrator before the update") {
        PiController pi(0.4, 50.0, 1e-5);
        pi.set_integrator(2.0);
        CHECK(pi.step(0.5) == doctest::Approx(2.2).epsilon(1e-15));
        // trapezoid with the previous error at 0
        CHECK(pi.integrator() == doctest::Approx(2.0 + 50.0 * 1e-5 * 0.25).epsilon(1e-15));
    }

    TEST_CASE("tracks a constant reference through a unit plant") {
        // Plant y[n] = u[n-1]. Closed-loop error decays with time constant
        // (1 + kp)/ki, so 1e-6 is reached after about 14 of them.
        const double kp = 0.4;
        const double ki = 50.0;
        const double dt = 1e-5;
        const double t_settle = 15.0 * (1.0 + kp) / ki;
        for (double ref : {1.0, -3.5, 600.0}) {
            PiController pi(kp, ki, dt);
            double y = 0.0;
            const long n = std::lround(t_settle / dt);
            for (long k = 0; k < n; ++k) y = pi.step(ref - y);
            CHECK(std::abs(ref - y) < 1e-6 * std::abs(ref));
        }
    }

    TEST_CASE("anti-windup freezes the integrator at the limit") {
        PiController pi(0.4, 50.0, 1e-3, OutputLimits{-10.0, 10.0});
        for (int k = 0; k < 10000; ++k) CHECK(std::abs(pi.step(5.0)) <= 10.0);
        const double held = pi.integrator();
        CHECK(held <= 10.0 + 1e-12);
        // reversing the error recovers immediately instead of unwinding a large state
        const double out = pi.step(-5.0);
        CHECK(out < 10.0);
    }

    TEST_CASE("identical inputs give bit-identical trajectories") {
        PiController a(0.4, 50.0, 2e-5, OutputLimits{-21.0, 21.0});
        PiController b(0.4, 50.0, 2e-5, OutputLimits{-21.0, 21.0});
        for (int k = 0; k < 20000; ++k) {
            const double e = 30.0 * std::sin(0.01 * k) + 0.1 * std::cos(0.37 * k);
            CHECK(a.step(e) == b.step(e));
        }
        CHECK(a.integrator() == b.integrator());
    }
}

TEST_SUITE("resonant") {
    TEST_CASE("gain at the resonance equals kr") {
        const double dt = 2e-5;
        ResonantController r(30.0, 5.0, 628.32, dt);
        const Tone t = drive_resonant(r, 628.32, dt, 300, 50);
        CHECK(t.amplitude == doctest::Approx(30.0).epsilon(0.005));
        CHECK(std::abs(t.phase) < 0.5 * kPi / 180.0);
    }

    TEST_CASE("resonance identity holds across parameter sets") {
        const double dt = 2e-5;
        const double sets[][3] = {{30, 5, 628.32}, {10, 2, 314.16}, {50, 10, 1256.64}, {1, 20, 2513.27}};
        for (const auto& p : sets) {
            ResonantController r(p[0], p[1], p[2], dt);
            // settle for 15 envelope time constants 1/wc
            const double f = p[2] / (2.0 * kPi);
            const int settle = std::max(50, static_cast<int>(std::ceil(15.0 / p[1] * f)));
            const Tone t = drive_resonant(r, p[2], dt, settle, 50);
            CHECK(t.amplitude == doctest::Approx(p[0]).epsilon(0.005));
        }
    }

    TEST_CASE("half the resonance matches the continuous magnitude") {
        const double dt = 2e-5;
        ResonantController r(30.0, 5.0, 628.32, dt);
        const double w = 0.5 * 628.32;
        const double oracle = std::abs(resonant_response(30.0, 5.0, 628.32, w));
        const Tone t = drive_resonant(r, w, dt, 150, 50);
        CHECK(t.amplitude == doctest::Approx(oracle).epsilon(0.005));
    }

    TEST_CASE("constant input gives zero mean output") {
        const double dt = 2e-5;
        ResonantController r(30.0, 5.0, 628.32, dt);
        const long settle = std::lround(4.0 / dt);
        const long last = std::lround(0.2 / dt);  // 20 periods of 100 Hz
        for (long n = 0; n < settle; ++n) r.step(1.0);
        double sum = 0.0;
        for (long n = 0; n < last; ++n) sum += r.step(1.0);
        CHECK(std::abs(sum / static_cast<double>(last)) < 1e-6 * 30.0 * 1.0);
    }

    TEST_CASE("non-finite input throws and leaves the state alone") {
        ResonantController r(30.0, 5.0, 628.32, 2e-5);
        r.step(1.0);
        const auto before = r;
        CHECK_THROWS(r.step(std::nan("")));
        CHECK(r.step(0.5) == ResonantController(before).step(0.5));
    }

    TEST_CASE("omega_c must be well below omega_0") {
        CHECK_THROWS_AS(ResonantController(30.0, 70.0, 628.32, 2e-5), std::invalid_argument);
    }
}

TEST_SUITE("discretization") {
    TEST_CASE("discrete peak sits at 100 Hz") {
        const double dt = 2e-5;
        const auto c = discretize_prewarped(628.32, 5.0, 30.0, dt);
        double best_f = 0.0;
        double best = 0.0;
        for (double f = 90.0; f <= 110.0; f += 1e-3) {
            const double g = std::abs(biquad_response(c, 2.0 * kPi * f, dt));
            if (g > best) {
                best = g;
                best_f = f;
            }
        }
        CHECK(std::abs(best_f - 100.0) <= 0.1);
        CHECK(best == doctest::Approx(30.0).epsilon(1e-6));
    }

    TEST_CASE("prewarped response is exact at omega_0 for coarse sampling") {
        const double dt = 1e-3;  // dt * w0 = 0.63
        const auto c = discretize_prewarped(628.32, 5.0, 30.0, dt);
        const cd h = biquad_response(c, 628.32, dt);
        CHECK(std::abs(h - resonant_response(30.0, 5.0, 628.32, 628.32)) < 1e-9);
    }

    TEST_CASE("small dt approaches the plain bilinear transform") {
        const auto plain = [](double w0, double wc, double kr, double dt) {
            const double K = 2.0 / dt;
            const double a0 = K * K + 2.0 * wc * K + w0 * w0;
            BiquadCoefficients c;
            c.b0 = 2.0 * kr * wc * K / a0;
            c.b2 = -c.b0;
            c.a1 = 2.0 * (w0 * w0 - K * K) / a0;
            c.a2 = (K * K - 2.0 * wc * K + w0 * w0) / a0;
            return c;
        };
        double prev = 1.0;
        double prev_a = 1.0;
        for (double dt : {1e-3, 1e-4, 1e-5, 1e-6}) {
            const auto p = discretize_prewarped(628.32, 5.0, 30.0, dt);
            const auto q = plain(628.32, 5.0, 30.0, dt);
            const double rel = std::abs(p.b0 - q.b0) / std::abs(q.b0);
            const double da = std::max(std::abs(p.a1 - q.a1), std::abs(p.a2 - q.a2));
            CHECK(rel < prev);
            CHECK(da < prev_a);
            prev = rel;
            prev_a = da;
        }
        CHECK(prev < 1e-6);
        CHECK(prev_a < 1e-9);
    }

    TEST_CASE("sampling too slow for omega_0 is rejected") {
        CHECK_THROWS_AS(discretize_prewarped(628.32, 5.0, 30.0, 1e-2), std::domain_error);
        CHECK_THROWS_AS(ResonantController(30.0, 5.0, 628.32, 1e-2), std::domain_error);
    }
}

TEST_SUITE("p_and_lpf") {
    TEST_CASE("proportional") {
        const PController p(5.0);
        CHECK(p.step(0.0) == 0.0);
        CHECK(p.step(2.0) == 10.0);
        CHECK(p.step(-1.5) == -7.5);
        CHECK_THROWS(PController(0.0));
    }

    TEST_CASE("low-pass fixed point") {
        FirstOrderLowPass f(31.4, 2e-5, 7.25);
        for (int k = 0; k < 100000; ++k) CHECK(f.step(7.25) == 7.25);
    }

    TEST_CASE("low-pass step response") {
        const double dt = 1e-5;
        FirstOrderLowPass f(31.4, dt);
        const double t = 1.0 / 31.4;
        const long n = std::lround(t / dt);
        double y = 0.0;
        for (long k = 0; k < n; ++k) y = f.step(1.0);
        const double t_end = static_cast<double>(n) * dt;
        CHECK(y == doctest::Approx(1.0 - std::exp(-31.4 * t_end)).epsilon(1e-3));
        CHECK(y == doctest::Approx(0.632).epsilon(2e-3));
    }

    TEST_CASE("low-pass attenuation at 100 Hz") {
        const double dt = 2e-5;
        const double w = 628.32;
        FirstOrderLowPass f(31.4, dt);
        const long settle = std::lround(0.5 / dt);
        const long measure = std::lround(0.2 / dt);
        std::vector<double> y;
        for (long n = 0; n < settle + measure; ++n) {
            const double out = f.step(std::sin(w * static_cast<double>(n) * dt));
            if (n >= settle) y.push_back(out);
        }
        const double t0 = static_cast<double>(settle) * dt;
        const double ratio = goertzel_amplitude(y, t0, dt, t0, 20, w / (2.0 * kPi)).amplitude;
        CHECK(ratio == doctest::Approx(31.4 / std::hypot(w, 31.4)).epsilon(0.01));
    }
}
