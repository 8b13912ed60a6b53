#pragma once

// Fixed-step time-domain engine: RK4 on the plant, controllers stepped once
// per tick with zero-order-held converter voltages.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcgrid/der_control.hpp"
#include "dcgrid/plant_models.hpp"
#include "dcgrid/scenario.hpp"

namespace dcgrid {

/// Recorded channels on a uniform time axis.
class TraceSet {
public:
    TraceSet() = default;
    explicit TraceSet(std::vector<std::string> names);

    void append(double t, const std::vector<double>& values);
    void reserve(std::size_t samples);

    std::size_t size() const noexcept { return time_.size(); }
    const std::vector<double>& time() const noexcept { return time_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    bool has(std::string_view name) const noexcept;
    /// Throws std::out_of_range for unknown channels.
    const std::vector<double>& channel(std::string_view name) const;
    const std::vector<double>& column(std::size_t index) const { return columns_.at(index); }

    /// Sample spacing (0 when fewer than two samples).
    double step() const noexcept;

private:
    std::vector<std::string> names_;
    std::vector<double> time_;
    std::vector<std::vector<double>> columns_;
};

enum class InjectionPort { VoltageReference, HarmonicCurrentReference };

/// offset + A * sin(2 pi f (t - start)) added to one DER's reference port
/// for t >= start.
struct Injection {
    std::size_t der = 0;
    InjectionPort port = InjectionPort::VoltageReference;
    double amplitude = 0.0;
    double frequency = 1.0;
    double start_time = 0.0;
    double offset = 0.0;

    double value(double t) const noexcept;
};

/// One tick's worth of signals, ordered as Simulator::channel_names().
struct Sample {
    double t = 0.0;
    std::vector<double> values;
};

class Simulator {
public:
    explicit Simulator(const Scenario& scenario);

    /// Channel naming: der<k>.{v_t,i_l,i_out,p_inst,p_filtered,e_ref,v_ref,i_ref_h},
    /// line<j>.i, load.i_1phi, load.i_cpl, pcc.v
    const std::vector<std::string>& channel_names() const noexcept { return names_; }
    std::size_t channel_index(std::string_view name) const;

    double dt() const noexcept { return dt_; }
    std::int64_t step_index() const noexcept { return step_; }
    double time() const noexcept { return static_cast<double>(step_) * dt_; }

    /// Applies due events and runs the controllers at the current tick (once
    /// per tick), returning every recorded signal at that instant.
    const Sample& sample();

    /// Integrates the plant to the next tick with the held converter voltages.
    /// Throws VoltageCollapse or SimulationError.
    void advance();

    void set_injection(std::optional<Injection> injection) { injection_ = injection; }
    /// Drop events that have not fired yet (used to freeze an operating point).
    void clear_pending_events() { next_event_ = events_.size(); }

    const Network& network() const noexcept { return network_; }
    const std::vector<DerController>& controllers() const noexcept { return controllers_; }
    const std::vector<double>& state() const noexcept { return state_; }

private:
    void apply_due_events();
    std::string state_name(std::size_t index) const;

    double dt_;
    Network network_;
    std::vector<DerController> controllers_;
    std::vector<Event> events_;
    std::vector<std::int64_t> event_steps_;
    std::size_t next_event_ = 0;
    std::optional<Injection> injection_;

    std::vector<double> state_;
    std::vector<double> commanded_;
    std::int64_t step_ = 0;
    std::int64_t sampled_step_ = -1;
    Sample sample_;
    std::vector<std::string> names_;

    // RK4 scratch
    std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

/// Step index of the first tick at or after `time`.
std::int64_t event_step(double time, double dt) noexcept;

/// Runs the scenario end to end and returns the decimated traces.
TraceSet run(const Scenario& scenario);

}  // namespace dcgrid
