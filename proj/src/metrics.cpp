#include "dcgrid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace dcgrid {

namespace {

struct WindowIndex {
    std::size_t first = 0;
    std::size_t count = 0;
};

WindowIndex window_index(std::size_t size, double t0, double step, double t_start, int n_periods, double f) {
    if (n_periods < 1) throw std::out_of_range("goertzel: n_periods must be >= 1");
    if (!(f > 0.0) || !(step > 0.0)) throw std::out_of_range("goertzel: frequency and sample step must be > 0");
    const double offset = (t_start - t0) / step;
    if (offset < -1e-6) throw std::out_of_range("goertzel: window starts before the trace");
    const auto first = static_cast<std::int64_t>(std::ceil(offset - 1e-6));
    const auto count = static_cast<std::int64_t>(std::llround(n_periods / (f * step)));
    if (count < 1 || first + count > static_cast<std::int64_t>(size)) {
        throw std::out_of_range("goertzel: window [" + std::to_string(t_start) + ", " +
                                std::to_string(t_start + n_periods / f) + "] s exceeds the trace");
    }
    return {static_cast<std::size_t>(std::max<std::int64_t>(first, 0)), static_cast<std::size_t>(count)};
}

double wrap_pi(double a) {
    a = std::remainder(a, 2.0 * std::numbers::pi);
    return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

std::string segment_label(double a, double b, bool closed) {
    std::ostringstream os;
    os << '[' << a << ',' << b << (closed ? ']' : ')');
    return os.str();
}

}  // namespace

ToneEstimate goertzel_amplitude(std::span<const double> samples, double t0, double sample_step, double t_start,
                                int n_periods, double f) {
    const auto [first, count] = window_index(samples.size(), t0, sample_step, t_start, n_periods, f);
    const double w = 2.0 * std::numbers::pi * f * sample_step;
    const double coeff = 2.0 * std::cos(w);

    double s1 = 0.0;
    double s2 = 0.0;
    double sum = 0.0;
    for (std::size_t n = 0; n < count; ++n) {
        const double x = samples[first + n];
        const double s0 = x + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
        sum += x;
    }
    // sum_n x[n] e^{-jwn} = e^{-jw(N-1)} (s1 - e^{-jw} s2)
    using cd = std::complex<double>;
    const cd bin = (s1 - std::polar(1.0, -w) * s2) * std::polar(1.0, -w * static_cast<double>(count - 1));
    const double t_first = t0 + static_cast<double>(first) * sample_step;
    const cd c = bin * (2.0 / static_cast<double>(count)) * std::polar(1.0, -2.0 * std::numbers::pi * f * t_first);

    ToneEstimate est;
    est.dc = sum / static_cast<double>(count);
    est.amplitude = std::abs(c);
    // c is the cosine phasor; a sine of phase p has cosine phase p - pi/2
    est.phase = wrap_pi(std::arg(c) + 0.5 * std::numbers::pi);
    return est;
}

ToneEstimate goertzel_amplitude(const TraceSet& traces, std::string_view channel, double t_start, int n_periods,
                                double f) {
    if (traces.size() < 2) throw std::out_of_range("goertzel: trace has fewer than two samples");
    return goertzel_amplitude(traces.channel(channel), traces.time().front(), traces.step(), t_start, n_periods, f);
}

HarmonicMeasurement measure_harmonic(const TraceSet& traces, std::string_view channel, double t_start, int n_periods,
                                     double f) {
    const ToneEstimate est = goertzel_amplitude(traces, channel, t_start, n_periods, f);
    HarmonicMeasurement m;
    m.channel = std::string(channel);
    m.window = n_periods / f;
    m.center_time = t_start + 0.5 * m.window;
    m.frequency = f;
    m.amplitude = est.amplitude;
    m.dc_component = est.dc;
    return m;
}

const WindowMetrics& MetricsReport::window_starting(double segment_start) const {
    for (const auto& w : windows) {
        if (std::abs(w.segment_start - segment_start) < 1e-9) return w;
    }
    throw std::out_of_range("metrics: no window starting at t=" + std::to_string(segment_start));
}

MetricsReport scenario_metrics(const TraceSet& traces, const Scenario& scenario) {
    MetricsReport report;
    report.frequency = scenario.analysis_frequency();
    report.settle_exclusion = scenario.solver.settle_exclusion;
    if (traces.size() < 2) return report;

    const double f = report.frequency;
    const double t0 = traces.time().front();
    const double step = traces.step();
    const double t_end = traces.time().back();

    std::vector<double> bounds{t0};
    for (const auto& ev : scenario.events) {
        if (ev.time > bounds.back() + 1e-12 && ev.time < t_end) bounds.push_back(ev.time);
    }
    bounds.push_back(t_end);

    const NetworkSpec& net = scenario.network;
    const std::size_t nd = net.ders.size();
    const std::size_t nl = net.lines.size();
    const std::string hnode_v =
        net.harmonic ? (net.harmonic->node < nd ? "der" + std::to_string(net.harmonic->node + 1) + ".v_t" : "pcc.v")
                     : "pcc.v";
    const auto der = [](std::size_t k, const char* c) { return "der" + std::to_string(k + 1) + "." + c; };
    const auto line = [](std::size_t j) { return "line" + std::to_string(j + 1) + ".i"; };

    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
        WindowMetrics w;
        w.segment_start = bounds[s];
        w.segment_end = bounds[s + 1];
        w.label = segment_label(w.segment_start, w.segment_end, s + 2 == bounds.size());
        w.t_start = w.segment_start + scenario.solver.settle_exclusion;
        w.periods = static_cast<int>(std::floor((w.segment_end - w.t_start) * f + 1e-9));
        if (w.periods < 1) continue;
        w.window = w.periods / f;

        const auto [first, count] = window_index(traces.size(), t0, step, w.t_start, w.periods, f);
        const auto mean = [&](const std::vector<double>& a, const std::vector<double>* b = nullptr) {
            double acc = 0.0;
            for (std::size_t n = first; n < first + count; ++n) acc += b ? a[n] * (*b)[n] : a[n];
            return acc / static_cast<double>(count);
        };

        double p_der = 0.0;
        for (std::size_t k = 0; k < nd; ++k) {
            const double p = mean(traces.channel(der(k, "p_inst")));
            p_der += p;
            w.der_mean_power.push_back(p);
            w.der_filtered_power.push_back(mean(traces.channel(der(k, "p_filtered"))));
            const auto v = goertzel_amplitude(traces, der(k, "v_t"), w.t_start, w.periods, f);
            w.der_mean_voltage.push_back(v.dc);
            w.der_voltage_ripple.push_back(v.amplitude);
            w.der_current_harmonic.push_back(
                goertzel_amplitude(traces, der(k, "i_out"), w.t_start, w.periods, f).amplitude);
        }
        for (std::size_t j = 0; j < nl; ++j) {
            const auto est = goertzel_amplitude(traces, line(j), w.t_start, w.periods, f);
            w.line_current_harmonic.push_back(est.amplitude);
            w.line_current_dc.push_back(est.dc);
            const auto& i = traces.channel(line(j));
            w.line_losses += net.lines[j].r * mean(i, &i);
        }
        const auto& v_pcc = traces.channel("pcc.v");
        w.pcc_mean_voltage = mean(v_pcc);
        w.load_power = mean(traces.channel("pcc.v"), &traces.channel("load.i_cpl")) +
                       mean(traces.channel(hnode_v), &traces.channel("load.i_1phi"));

        const std::size_t last = std::min(first + count, traces.size() - 1);
        const auto stored = [&](std::size_t n) {
            double e = 0.5 * net.pcc.c_pcc * v_pcc[n] * v_pcc[n];
            for (std::size_t j = 0; j < nl; ++j) {
                const double i = traces.channel(line(j))[n];
                e += 0.5 * net.lines[j].l * i * i;
            }
            return e;
        };
        w.stored_energy_rate = (stored(last) - stored(first)) / (static_cast<double>(last - first) * step);
        const double residual = p_der - w.load_power - w.line_losses - w.stored_energy_rate;
        w.balance_residual = w.load_power != 0.0 ? residual / w.load_power : residual;
        report.windows.push_back(std::move(w));
    }
    return report;
}

}  // namespace dcgrid
