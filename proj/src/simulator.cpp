#include "dcgrid/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dcgrid/errors.hpp"

namespace dcgrid {

namespace {

constexpr const char* kDerChannels[] = {"v_t", "i_l", "i_out", "p_inst", "p_filtered", "e_ref", "v_ref", "i_ref_h"};
constexpr std::size_t kPerDer = std::size(kDerChannels);

}  // namespace

// ---------------------------------------------------------------- TraceSet

TraceSet::TraceSet(std::vector<std::string> names) : names_(std::move(names)), columns_(names_.size()) {}

void TraceSet::reserve(std::size_t samples) {
    time_.reserve(samples);
    for (auto& c : columns_) c.reserve(samples);
}

void TraceSet::append(double t, const std::vector<double>& values) {
    if (values.size() != columns_.size()) {
        throw std::invalid_argument("TraceSet::append: channel count mismatch");
    }
    if (!time_.empty() && !(t > time_.back())) {
        throw std::invalid_argument("TraceSet::append: time axis must be strictly increasing");
    }
    time_.push_back(t);
    for (std::size_t i = 0; i < values.size(); ++i) columns_[i].push_back(values[i]);
}

bool TraceSet::has(std::string_view name) const noexcept {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const std::vector<double>& TraceSet::channel(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) {
        throw std::out_of_range("TraceSet: no channel named '" + std::string(name) + "'");
    }
    return columns_[static_cast<std::size_t>(it - names_.begin())];
}

double TraceSet::step() const noexcept {
    return time_.size() < 2 ? 0.0 : time_[1] - time_[0];
}

// ---------------------------------------------------------------- Injection

double Injection::value(double t) const noexcept {
    if (t < start_time) return 0.0;
    return offset + amplitude * std::sin(2.0 * std::numbers::pi * frequency * (t - start_time));
}

// ---------------------------------------------------------------- Simulator

std::int64_t event_step(double time, double dt) noexcept {
    // Tolerance absorbs representation error, e.g. 3.0 / 20e-6.
    return static_cast<std::int64_t>(std::ceil(time / dt - 1e-6));
}

Simulator::Simulator(const Scenario& scenario)
    : dt_(scenario.solver.dt), network_(scenario.network.build()), events_(scenario.events) {
    controllers_.reserve(scenario.network.ders.size());
    for (const auto& d : scenario.network.ders) controllers_.emplace_back(d.control, dt_);

    for (const auto& ev : events_) event_steps_.push_back(event_step(ev.time, dt_));

    state_ = network_.initial_state(scenario.solver.initial_voltage);
    commanded_.assign(network_.der_count(), 0.0);
    for (std::size_t k = 0; k < network_.der_count(); ++k) {
        commanded_[k] = state_[network_.vt_index(k)];
    }

    for (std::size_t k = 0; k < network_.der_count(); ++k) {
        for (const char* c : kDerChannels) names_.push_back("der" + std::to_string(k + 1) + "." + c);
    }
    for (std::size_t j = 0; j < network_.line_count(); ++j) {
        names_.push_back("line" + std::to_string(j + 1) + ".i");
    }
    names_.push_back("load.i_1phi");
    names_.push_back("load.i_cpl");
    names_.push_back("pcc.v");
    sample_.values.assign(names_.size(), 0.0);

    const auto n = network_.state_size();
    k1_.resize(n);
    k2_.resize(n);
    k3_.resize(n);
    k4_.resize(n);
    tmp_.resize(n);
}

std::size_t Simulator::channel_index(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) {
        throw std::out_of_range("Simulator: no channel named '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - names_.begin());
}

void Simulator::apply_due_events() {
    while (next_event_ < events_.size() && event_steps_[next_event_] <= step_) {
        std::visit(
            [&](const auto& a) {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, SetMode>) {
                    controllers_.at(a.der).set_mode(a.mode);
                } else if constexpr (std::is_same_v<T, SetCplPower>) {
                    network_.set_cpl_power(a.watts);
                } else {
                    controllers_.at(a.der).set_comp_fraction(a.fraction);
                }
            },
            events_[next_event_].action);
        ++next_event_;
    }
}

const Sample& Simulator::sample() {
    if (sampled_step_ == step_) return sample_;
    apply_due_events();

    const double t = time();
    const NodeCurrents nc = network_.evaluate(t, state_);
    auto& v = sample_.values;
    sample_.t = t;

    for (std::size_t k = 0; k < network_.der_count(); ++k) {
        Measurements m;
        m.v_t = state_[network_.vt_index(k)];
        m.i_l = state_[network_.il_index(k)];
        m.i_out = nc.der_i_out[k];
        m.i_local_load = nc.der_local_load[k];

        ReferenceInjection inj;
        if (injection_ && injection_->der == k) {
            const double u = injection_->value(t);
            if (injection_->port == InjectionPort::VoltageReference) inj.v_ref = u;
            else inj.i_ref_h = u;
        }

        const ControllerOutput out = controllers_[k].step(m, inj);
        commanded_[k] = network_.ders()[k].saturate(out.e_ref);

        double* row = v.data() + k * kPerDer;
        row[0] = m.v_t;
        row[1] = m.i_l;
        row[2] = m.i_out;
        row[3] = out.p_inst;
        row[4] = out.p_filtered;
        row[5] = out.e_ref;
        row[6] = out.v_ref;
        row[7] = out.i_ref_h_target;
    }
    std::size_t idx = network_.der_count() * kPerDer;
    for (std::size_t j = 0; j < network_.line_count(); ++j) v[idx++] = state_[network_.line_index(j)];
    v[idx++] = nc.harmonic_load;
    v[idx++] = nc.cpl;
    v[idx++] = state_[network_.pcc_index()];

    sampled_step_ = step_;
    return sample_;
}

void Simulator::advance() {
    sample();
    const double t = time();
    const double h = dt_;
    const std::size_t n = state_.size();

    network_.derivatives(t, state_, commanded_, k1_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = state_[i] + 0.5 * h * k1_[i];
    network_.derivatives(t + 0.5 * h, tmp_, commanded_, k2_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = state_[i] + 0.5 * h * k2_[i];
    network_.derivatives(t + 0.5 * h, tmp_, commanded_, k3_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = state_[i] + h * k3_[i];
    network_.derivatives(t + h, tmp_, commanded_, k4_);
    for (std::size_t i = 0; i < n; ++i) {
        state_[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }
    ++step_;

    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(state_[i])) {
            throw SimulationError("non-finite state '" + state_name(i) + "' at t=" + std::to_string(time()) + " s",
                                  time());
        }
    }
}

std::string Simulator::state_name(std::size_t index) const {
    const std::size_t nd = network_.der_count();
    if (index < 2 * nd) {
        return "der" + std::to_string(index / 2 + 1) + (index % 2 == 0 ? ".i_l" : ".v_t");
    }
    if (index == network_.pcc_index()) return "pcc.v";
    return "line" + std::to_string(index - 2 * nd + 1) + ".i";
}

TraceSet run(const Scenario& scenario) {
    scenario.validate();
    Simulator sim(scenario);
    const auto steps = static_cast<std::int64_t>(std::llround(scenario.solver.duration / scenario.solver.dt));
    const std::int64_t dec = scenario.solver.decimation;

    TraceSet traces(sim.channel_names());
    traces.reserve(static_cast<std::size_t>(steps / dec + 1));
    for (std::int64_t k = 0; k <= steps; ++k) {
        const Sample& s = sim.sample();
        if (k % dec == 0) traces.append(s.t, s.values);
        if (k < steps) sim.advance();
    }
    return traces;
}

}  // namespace dcgrid
