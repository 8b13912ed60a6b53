#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "dcgrid/der_control.hpp"
#include "dcgrid/plant_models.hpp"

namespace dcgrid {

struct SolverSettings {
    double dt = 20e-6;
    double duration = 10.0;
    int decimation = 10;
    double initial_voltage = 600.0;
    double settle_exclusion = 0.5;  // seconds dropped after each event in metrics
};

struct DerSpec {
    ConverterPlant plant;
    DerControlParams control;
};

struct HarmonicLoadSpec {
    HarmonicCurrentLoad load;
    std::size_t node = 0;
};

struct NetworkSpec {
    std::vector<DerSpec> ders;
    std::vector<RlLine> lines;
    PccNode pcc;
    ConstantPowerLoad cpl;
    std::optional<HarmonicLoadSpec> harmonic;

    Network build() const;
};

struct SetMode {
    std::size_t der = 0;
    ControlMode mode = ControlMode::Vcm;
};

struct SetCplPower {
    double watts = 0.0;
};

struct SetCompFraction {
    std::size_t der = 0;
    double fraction = 1.0;
};

using EventAction = std::variant<SetMode, SetCplPower, SetCompFraction>;

struct Event {
    double time = 0.0;
    EventAction action;
};

struct Scenario {
    SolverSettings solver;
    NetworkSpec network;
    std::vector<Event> events;

    /// Throws ConfigError naming the offending field.
    void validate() const;

    /// Frequency used for ripple/compensation metrics: the harmonic load's,
    /// or 100 Hz when there is none.
    double analysis_frequency() const noexcept;
};

/// Two DERs, two RL lines to a common PCC, CPL at the PCC, single-phase
/// inverter load (3 A DC + 6 A at 100 Hz) at DER 1. Timeline: DER 1 to HCM at
/// 3 s, CPL 6 kW -> 12 kW at 5 s, DER 1 compensation 100 % -> 50 % at 7 s.
Scenario paper_fig4_scenario();

}  // namespace dcgrid
