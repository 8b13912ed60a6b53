#include "dcgrid/scenario.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dcgrid/errors.hpp"

namespace dcgrid {

Network NetworkSpec::build() const {
    std::vector<ConverterPlant> plants;
    plants.reserve(ders.size());
    for (const auto& d : ders) plants.push_back(d.plant);
    if (harmonic) {
        return Network(std::move(plants), lines, pcc, cpl, harmonic->load, harmonic->node);
    }
    return Network(std::move(plants), lines, pcc, cpl);
}

namespace {

// Key of a field, plus the 1-based entry number for array tables.
struct Key {
    std::string where;
    std::size_t entry = 0;
};

Key der_key(std::size_t k, const char* field) { return {std::string("[[der]].") + field, k + 1}; }

[[noreturn]] void fail(const Key& key, const std::string& what) {
    throw ConfigError(key.where, key.entry ? "entry " + std::to_string(key.entry) + ": " + what : what);
}

void positive(double v, const Key& key) {
    if (!std::isfinite(v) || !(v > 0.0)) fail(key, "must be a finite value > 0");
}

void non_negative(double v, const Key& key) {
    if (!std::isfinite(v) || v < 0.0) fail(key, "must be a finite value >= 0");
}

}  // namespace

void Scenario::validate() const {
    positive(solver.dt, Key{"[solver].dt"});
    non_negative(solver.duration, Key{"[solver].duration"});
    if (solver.decimation < 1) throw ConfigError("[solver].decimation", "must be an integer >= 1");
    positive(solver.initial_voltage, Key{"[solver].initial_voltage"});
    non_negative(solver.settle_exclusion, Key{"[solver].settle_exclusion"});

    if (network.ders.empty()) throw ConfigError("[[der]]", "at least one DER is required");
    for (std::size_t k = 0; k < network.ders.size(); ++k) {
        const auto& d = network.ders[k];
        positive(d.plant.l_f, der_key(k, "l_f"));
        positive(d.plant.c_t, der_key(k, "c_t"));
        positive(d.plant.e_limit, der_key(k, "e_limit"));
        const auto& c = d.control;
        positive(c.v_min, der_key(k, "v_min"));
        positive(c.v_max, der_key(k, "v_max"));
        if (!(c.v_max > c.v_min)) fail(der_key(k, "v_max"), "must exceed v_min");
        positive(c.p_max, der_key(k, "p_max"));
        non_negative(c.kp_v, der_key(k, "kp_v"));
        non_negative(c.ki_v, der_key(k, "ki_v"));
        positive(c.kp_i, der_key(k, "kp_i"));
        positive(c.lpf_cutoff, der_key(k, "lpf_cutoff"));
        if (!(c.comp_fraction >= 0.0 && c.comp_fraction <= 1.0)) {
            fail(der_key(k, "comp_fraction"), "must lie in [0, 1]");
        }
        if (!std::isfinite(c.i_limit) || c.i_limit < 0.0) {
            fail(der_key(k, "i_limit"), "must be >= 0 (0 selects 1.2*p_max/v_min)");
        }
        if (c.resonant) {
            positive(c.resonant->kr, der_key(k, "kr"));
            positive(c.resonant->omega_c, der_key(k, "omega_c"));
            positive(c.resonant->omega_0, der_key(k, "omega_0"));
            if (!(c.resonant->omega_c < c.resonant->omega_0 / 10.0)) {
                fail(der_key(k, "omega_c"), "must be below omega_0/10");
            }
            if (solver.dt * c.resonant->omega_0 >= std::numbers::pi) {
                throw ConfigError("[solver].dt",
                                  "dt*omega_0 = " + std::to_string(solver.dt * c.resonant->omega_0) +
                                      " >= pi: the resonant frequency lies beyond Nyquist");
            }
        } else if (c.mode != ControlMode::Vcm) {
            fail(der_key(k, "mode"), "ccm/hcm need resonant gains (kr, omega_c, omega_0)");
        }
    }

    const std::size_t nodes = network.ders.size() + 1;
    for (std::size_t j = 0; j < network.lines.size(); ++j) {
        const auto& ln = network.lines[j];
        const auto key = [j](const char* f) { return Key{std::string("[[line]].") + f, j + 1}; };
        non_negative(ln.r, key("r"));
        positive(ln.l, key("l"));
        if (ln.from >= nodes) fail(key("from"), "unknown node");
        if (ln.to >= nodes) fail(key("to"), "unknown node");
        if (ln.from == ln.to) fail(key("to"), "line endpoints must differ");
    }
    positive(network.pcc.c_pcc, Key{"[pcc].c_pcc"});
    non_negative(network.cpl.power, Key{"[cpl].power"});
    positive(network.cpl.v_floor, Key{"[cpl].v_floor"});
    if (network.harmonic) {
        non_negative(network.harmonic->load.i_dc, Key{"[harmonic_load].i_dc"});
        non_negative(network.harmonic->load.i_h, Key{"[harmonic_load].i_h"});
        positive(network.harmonic->load.f_h, Key{"[harmonic_load].f_h"});
        if (!std::isfinite(network.harmonic->load.phase)) {
            throw ConfigError("[harmonic_load].phase", "must be finite");
        }
        if (network.harmonic->node >= nodes) throw ConfigError("[harmonic_load].attach", "unknown node");
    }

    double last = 0.0;
    for (std::size_t e = 0; e < events.size(); ++e) {
        const auto& ev = events[e];
        const auto key = [e](const char* f) { return Key{std::string("[[event]].") + f, e + 1}; };
        if (!std::isfinite(ev.time) || ev.time < 0.0 || ev.time > solver.duration) {
            fail(key("time"), "must lie within [0, duration]");
        }
        if (ev.time < last) fail(key("time"), "events must be sorted by time");
        last = ev.time;
        std::visit(
            [&](const auto& a) {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, SetMode>) {
                    if (a.der >= network.ders.size()) fail(key("der"), "unknown DER");
                    if (a.mode != ControlMode::Vcm && !network.ders[a.der].control.resonant) {
                        fail(key("mode"), "target DER has no resonant gains");
                    }
                } else if constexpr (std::is_same_v<T, SetCplPower>) {
                    non_negative(a.watts, key("power"));
                } else {
                    if (a.der >= network.ders.size()) fail(key("der"), "unknown DER");
                    if (!(a.fraction >= 0.0 && a.fraction <= 1.0)) {
                        fail(key("fraction"), "must lie in [0, 1]");
                    }
                }
            },
            ev.action);
    }

    try {
        (void)network.build();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("[[line]]", e.what());
    }
}

double Scenario::analysis_frequency() const noexcept {
    return network.harmonic ? network.harmonic->load.f_h : 100.0;
}

Scenario paper_fig4_scenario() {
    Scenario s;
    s.solver = SolverSettings{};

    DerSpec der1;
    der1.plant = ConverterPlant{2e-3, 1e-3, 700.0};
    der1.control.v_max = 630.0;
    der1.control.v_min = 570.0;
    der1.control.p_max = 10000.0;
    der1.control.kp_v = 0.4;
    der1.control.ki_v = 50.0;
    der1.control.resonant = ResonantParams{30.0, 5.0, 628.32};
    der1.control.kp_i = 5.0;
    der1.control.lpf_cutoff = 31.4;
    der1.control.comp_fraction = 1.0;
    der1.control.i_limit = 1.2 * 10000.0 / 570.0;
    der1.control.mode = ControlMode::Vcm;

    DerSpec der2 = der1;
    der2.control.resonant.reset();

    s.network.ders = {der1, der2};
    const std::size_t pcc = 2;
    s.network.lines = {RlLine{0.4, 0.4e-3, 0, pcc}, RlLine{0.4, 0.4e-3, 1, pcc}};
    s.network.pcc = PccNode{100e-6};
    s.network.cpl = ConstantPowerLoad{6000.0, 300.0};
    // 1.8 kW at PF 0.5 from ~600 V: 1800/600 = 3 A DC, 1800/(0.5*600) = 6 A at 2*50 Hz
    s.network.harmonic = HarmonicLoadSpec{HarmonicCurrentLoad{3.0, 6.0, 100.0, 0.0}, 0};

    s.events = {
        Event{3.0, SetMode{0, ControlMode::Hcm}},
        Event{5.0, SetCplPower{12000.0}},
        Event{7.0, SetCompFraction{0, 0.5}},
    };
    return s;
}

}  // namespace dcgrid
