#include "dcgrid/freq_analysis.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <atomic>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <thread>

#include "dcgrid/errors.hpp"

namespace dcgrid {

std::string_view to_string(TransferFunctionId id) noexcept {
    switch (id) {
        case TransferFunctionId::Gii: return "gii";
        case TransferFunctionId::Gvi: return "gvi";
        case TransferFunctionId::Gvv: return "gvv";
        case TransferFunctionId::Giv: return "giv";
    }
    return "?";
}

std::optional<TransferFunctionId> parse_transfer_function(std::string_view text) noexcept {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "gii") return TransferFunctionId::Gii;
    if (lower == "gvi") return TransferFunctionId::Gvi;
    if (lower == "gvv") return TransferFunctionId::Gvv;
    if (lower == "giv") return TransferFunctionId::Giv;
    return std::nullopt;
}

InjectionPort input_port(TransferFunctionId id) noexcept {
    return (id == TransferFunctionId::Gii || id == TransferFunctionId::Giv) ? InjectionPort::HarmonicCurrentReference
                                                                            : InjectionPort::VoltageReference;
}

// ---------------------------------------------------------------- config

int SweepConfig::settle_periods(double f) const {
    return std::max(min_settle_periods, static_cast<int>(std::ceil(settle_seconds * f - 1e-9)));
}

std::vector<double> SweepConfig::default_frequency_grid() {
    std::vector<double> f;
    const double lo = std::log10(0.5);
    const double hi = std::log10(1000.0);
    for (int i = 0; i < 60; ++i) f.push_back(std::pow(10.0, lo + (hi - lo) * i / 59.0));
    for (int i = 0; i < 20; ++i) f.push_back(80.0 + 45.0 * i / 19.0);
    f.push_back(100.0);
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end(), [](double a, double b) { return std::abs(a - b) < 1e-9 * b; }),
            f.end());
    return f;
}

void SweepConfig::validate(const Scenario& scenario) const {
    if (frequencies.empty()) throw ConfigError("[sweep].frequencies", "at least one frequency is required");
    const double nyquist = 0.5 / scenario.solver.dt;
    for (std::size_t i = 0; i < frequencies.size(); ++i) {
        const double f = frequencies[i];
        if (!std::isfinite(f) || f <= 0.0 || f >= nyquist) {
            throw ConfigError("[sweep].frequencies", "every frequency must lie in (0, 1/(2 dt))");
        }
        if (i > 0 && !(f > frequencies[i - 1])) {
            throw ConfigError("[sweep].frequencies", "frequencies must be strictly increasing");
        }
    }
    if (!(voltage_amplitude > 0.0)) throw ConfigError("[sweep].voltage_amplitude", "must be > 0");
    if (!(current_amplitude > 0.0)) throw ConfigError("[sweep].current_amplitude", "must be > 0");
    if (der >= scenario.network.ders.size()) throw ConfigError("[sweep].der", "unknown DER");

    // small-signal: at most 1 % of the operating values
    const auto& c = scenario.network.ders[der].control;
    if (voltage_amplitude > 0.01 * c.v_min) {
        throw ConfigError("[sweep].voltage_amplitude", "exceeds 1 % of the DER's v_min (small-signal bound)");
    }
    if (current_amplitude > 0.01 * c.resolved_i_limit()) {
        throw ConfigError("[sweep].current_amplitude", "exceeds 1 % of the DER's current limit (small-signal bound)");
    }
    if (measure_periods < 5) throw ConfigError("[sweep].measure_periods", "must be >= 5");
    if (min_settle_periods < 1) throw ConfigError("[sweep].min_settle_periods", "must be >= 1");
    if (!(settle_seconds >= 0.0)) throw ConfigError("[sweep].settle_seconds", "must be >= 0");
    if (!(warmup >= 0.0)) throw ConfigError("[sweep].warmup", "must be >= 0");
}

// ---------------------------------------------------------------- curve

BodeSample BodeCurve::at(double f) const {
    if (samples.empty() || f < samples.front().frequency * (1 - 1e-12) ||
        f > samples.back().frequency * (1 + 1e-12)) {
        throw std::out_of_range("BodeCurve::at: frequency outside the swept range");
    }
    auto hi = std::lower_bound(samples.begin(), samples.end(), f,
                               [](const BodeSample& s, double x) { return s.frequency < x; });
    if (hi == samples.end()) return samples.back();
    if (std::abs(hi->frequency - f) <= 1e-9 * f || hi == samples.begin()) return *hi;
    const auto lo = hi - 1;
    const double w = (std::log(f) - std::log(lo->frequency)) / (std::log(hi->frequency) - std::log(lo->frequency));
    BodeSample s;
    s.frequency = f;
    s.magnitude_db = lo->magnitude_db + w * (hi->magnitude_db - lo->magnitude_db);
    s.phase_deg = lo->phase_deg + w * (hi->phase_deg - lo->phase_deg);
    s.below_floor = lo->below_floor || hi->below_floor;
    return s;
}

std::vector<BodeSample> unwrap_phase(std::vector<BodeSample> samples) {
    for (std::size_t i = 1; i < samples.size(); ++i) {
        double d = samples[i].phase_deg - samples[i - 1].phase_deg;
        const double turns = std::ceil((d - 180.0) / 360.0);
        samples[i].phase_deg -= 360.0 * turns;
    }
    return samples;
}

// ---------------------------------------------------------------- sweep

namespace {

using cd = std::complex<double>;

// Channels correlated in every run, in this order.
enum Channel { kVRef, kIRefH, kIOut, kVt, kChannels };

struct Window {
    double frequency = 0.0;
    std::int64_t first = 0;  // absolute step index
    std::int64_t count = 0;
};

using Phasors = std::array<cd, kChannels>;

class Correlator {
public:
    Correlator(std::vector<Window> windows, std::int64_t origin, double dt, std::array<std::size_t, kChannels> idx)
        : windows_(std::move(windows)), origin_(origin), dt_(dt), idx_(idx), acc_(windows_.size()) {}

    void add(std::int64_t step, const std::vector<double>& values) {
        for (std::size_t w = 0; w < windows_.size(); ++w) {
            const auto& win = windows_[w];
            if (step < win.first || step >= win.first + win.count) continue;
            const double angle =
                2.0 * std::numbers::pi * win.frequency * static_cast<double>(step - origin_) * dt_;
            const cd rot = std::polar(1.0, -angle);
            for (int c = 0; c < kChannels; ++c) acc_[w][c] += values[idx_[c]] * rot;
        }
    }

    Phasors result(std::size_t w) const {
        Phasors p = acc_[w];
        for (auto& v : p) v *= 2.0 / static_cast<double>(windows_[w].count);
        return p;
    }

    std::int64_t last_step() const {
        std::int64_t last = origin_;
        for (const auto& w : windows_) last = std::max(last, w.first + w.count);
        return last;
    }

private:
    std::vector<Window> windows_;
    std::int64_t origin_;
    double dt_;
    std::array<std::size_t, kChannels> idx_;
    std::vector<Phasors> acc_;
};

struct Task {
    bool baseline = false;
    InjectionPort port = InjectionPort::VoltageReference;
    std::size_t freq_index = 0;
};

/// The four closed-loop gains at one frequency.
struct TwoPort {
    cd gvv, giv, gvi, gii;
};

// The droop path feeds output power back into v_ref, so a current-port run
// also moves v_ref. With one run per port,
//   [dV_a dV_b] = [Gvv Giv] M,  [dI_a dI_b] = [Gvi Gii] M,
//   M = [[dVref_a, dVref_b], [dIref_a, dIref_b]]
// and the gains follow from inverting M.
TwoPort solve_two_port(const Phasors& a, const Phasors& b) {
    const cd m00 = a[kVRef], m01 = b[kVRef], m10 = a[kIRefH], m11 = b[kIRefH];
    const cd det = m00 * m11 - m01 * m10;
    const cd i00 = m11 / det, i01 = -m01 / det, i10 = -m10 / det, i11 = m00 / det;
    TwoPort g;
    g.gvv = a[kVt] * i00 + b[kVt] * i10;
    g.giv = a[kVt] * i01 + b[kVt] * i11;
    g.gvi = a[kIOut] * i00 + b[kIOut] * i10;
    g.gii = a[kIOut] * i01 + b[kIOut] * i11;
    return g;
}

}  // namespace

std::vector<BodeCurve> ac_sweep(const Scenario& scenario, std::span<const TransferFunctionId> tfs,
                                const SweepConfig& cfg) {
    scenario.validate();
    cfg.validate(scenario);

    // Operating point: run the timeline prefix, then freeze the events.
    Simulator op(scenario);
    const auto warm_steps = static_cast<std::int64_t>(std::llround(cfg.warmup / scenario.solver.dt));
    while (op.step_index() < warm_steps) op.advance();
    op.clear_pending_events();

    const double dt = scenario.solver.dt;
    const std::int64_t origin = op.step_index();
    const std::string prefix = "der" + std::to_string(cfg.der + 1) + ".";
    const std::array<std::size_t, kChannels> channels{
        op.channel_index(prefix + "v_ref"), op.channel_index(prefix + "i_ref_h"),
        op.channel_index(prefix + "i_out"), op.channel_index(prefix + "v_t")};

    std::vector<Window> windows;
    for (double f : cfg.frequencies) {
        Window w;
        w.frequency = f;
        w.first = origin + std::llround(cfg.settle_periods(f) / (f * dt));
        w.count = std::llround(cfg.measure_periods / (f * dt));
        windows.push_back(w);
    }

    const std::size_t nf = cfg.frequencies.size();
    std::vector<Task> tasks{Task{true, InjectionPort::VoltageReference, 0}};
    for (std::size_t i = 0; i < nf; ++i) {
        tasks.push_back({false, InjectionPort::VoltageReference, i});
        tasks.push_back({false, InjectionPort::HarmonicCurrentReference, i});
    }

    // One unperturbed run serves every frequency.
    std::vector<Phasors> base(nf);
    std::string baseline_error;
    std::vector<std::optional<Phasors>> volt_runs(nf), curr_runs(nf);
    std::vector<std::string> errors(nf);
    std::mutex error_mutex;

    const auto execute = [&](const Task& task) {
        Simulator sim = op;
        try {
            std::vector<Window> wins = task.baseline ? windows : std::vector<Window>{windows[task.freq_index]};
            if (!task.baseline) {
                Injection inj;
                inj.der = cfg.der;
                inj.port = task.port;
                inj.amplitude = task.port == InjectionPort::VoltageReference ? cfg.voltage_amplitude
                                                                             : cfg.current_amplitude;
                inj.frequency = cfg.frequencies[task.freq_index];
                inj.start_time = static_cast<double>(origin) * dt;
                sim.set_injection(inj);
            }
            Correlator corr(std::move(wins), origin, dt, channels);
            const auto end = corr.last_step();
            while (sim.step_index() < end) {
                corr.add(sim.step_index(), sim.sample().values);
                sim.advance();
            }
            if (task.baseline) {
                for (std::size_t i = 0; i < nf; ++i) base[i] = corr.result(i);
            } else if (task.port == InjectionPort::VoltageReference) {
                volt_runs[task.freq_index] = corr.result(0);
            } else {
                curr_runs[task.freq_index] = corr.result(0);
            }
        } catch (const std::exception& e) {
            std::lock_guard lock(error_mutex);
            if (task.baseline) {
                baseline_error = e.what();
            } else {
                auto& msg = errors[task.freq_index];
                if (msg.empty()) {
                    msg = "perturbed run diverged at f=" + std::to_string(cfg.frequencies[task.freq_index]) +
                          " Hz: " + e.what();
                }
            }
        }
    };

    unsigned jobs = cfg.jobs ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(tasks.size()));
    if (jobs <= 1) {
        for (const auto& t : tasks) execute(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < jobs; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < tasks.size(); i = next++) execute(tasks[i]);
            });
        }
    }

    if (!baseline_error.empty()) {
        throw SimulationError("baseline run failed at the operating point: " + baseline_error,
                              static_cast<double>(origin) * dt);
    }

    std::vector<BodeCurve> curves;
    for (auto tf : tfs) {
        BodeCurve curve;
        curve.tf = tf;
        const double amplitude = input_port(tf) == InjectionPort::VoltageReference ? cfg.voltage_amplitude
                                                                                 : cfg.current_amplitude;
        for (std::size_t i = 0; i < nf; ++i) {
            const double f = cfg.frequencies[i];
            if (!volt_runs[i] || !curr_runs[i]) {
                curve.failures.push_back({f, errors[i]});
                continue;
            }
            Phasors a = *volt_runs[i];
            Phasors b = *curr_runs[i];
            for (int c = 0; c < kChannels; ++c) {
                a[c] -= base[i][c];
                b[c] -= base[i][c];
            }
            const TwoPort g2 = solve_two_port(a, b);
            const cd g = tf == TransferFunctionId::Gii   ? g2.gii
                         : tf == TransferFunctionId::Gvi ? g2.gvi
                         : tf == TransferFunctionId::Gvv ? g2.gvv
                                                         : g2.giv;

            BodeSample s;
            s.frequency = f;
            if (!std::isfinite(std::abs(g)) || std::abs(g) * amplitude < kResponseFloor) {
                s.below_floor = true;
                s.magnitude_db = kFloorSentinelDb;
                s.phase_deg = 0.0;
            } else {
                s.magnitude_db = 20.0 * std::log10(std::abs(g));
                s.phase_deg = std::arg(g) * 180.0 / std::numbers::pi;
            }
            curve.samples.push_back(s);
        }
        curve.samples = unwrap_phase(std::move(curve.samples));
        curves.push_back(std::move(curve));
    }
    return curves;
}

BodeCurve ac_sweep(const Scenario& scenario, TransferFunctionId tf, const SweepConfig& cfg) {
    const TransferFunctionId one[] = {tf};
    return std::move(ac_sweep(scenario, one, cfg).front());
}

}  // namespace dcgrid
