#pragma once

// Averaged electrical models of the DC microgrid: converter output stages,
// RL lines, a capacitive PCC node, a constant-power load and the DC-side
// current signature of a single-phase inverter load.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dcgrid {

/// Converter output stage: ideal averaged voltage source e behind l_f,
/// terminal capacitor c_t.
///   l_f di_l/dt = e - v_t
///   c_t dv_t/dt = i_l - i_out
struct ConverterPlant {
    double l_f = 2e-3;
    double c_t = 1e-3;
    double e_limit = 700.0;

    double saturate(double e_ref) const noexcept;
};

/// l di/dt = v_from - r i - v_to. Endpoints are node indices of the Network.
struct RlLine {
    double r = 0.4;
    double l = 0.4e-3;
    std::size_t from = 0;
    std::size_t to = 0;
};

struct ConstantPowerLoad {
    double power = 0.0;
    double v_floor = 300.0;

    double current(double v) const noexcept;
};

/// i(t) = i_dc + i_h sin(2 pi f_h t + phase)
struct HarmonicCurrentLoad {
    double i_dc = 0.0;
    double i_h = 0.0;
    double f_h = 100.0;
    double phase = 0.0;

    double current(double t) const noexcept;
};

struct PccNode {
    double c_pcc = 100e-6;
};

/// Currents at one instant, derived from the state and the load models.
struct NodeCurrents {
    std::vector<double> der_i_out;       // current leaving each DER terminal
    std::vector<double> der_local_load;  // load current drawn at each DER terminal
    double harmonic_load = 0.0;
    double cpl = 0.0;
};

/// Node/branch description. Nodes 0..n_der-1 are DER terminals, node n_der is
/// the PCC. The CPL sits at the PCC; the harmonic load may sit at any node.
///
/// State vector layout:
///   [i_l(0), v_t(0), ..., i_l(n-1), v_t(n-1), i_line(0), ..., i_line(m-1), v_pcc]
class Network {
public:
    Network(std::vector<ConverterPlant> ders, std::vector<RlLine> lines, PccNode pcc,
            ConstantPowerLoad cpl, std::optional<HarmonicCurrentLoad> harmonic_load = std::nullopt,
            std::size_t harmonic_node = 0);

    std::size_t der_count() const noexcept { return ders_.size(); }
    std::size_t line_count() const noexcept { return lines_.size(); }
    std::size_t node_count() const noexcept { return ders_.size() + 1; }
    std::size_t pcc_node() const noexcept { return ders_.size(); }
    std::size_t state_size() const noexcept { return 2 * ders_.size() + lines_.size() + 1; }

    std::size_t il_index(std::size_t der) const noexcept { return 2 * der; }
    std::size_t vt_index(std::size_t der) const noexcept { return 2 * der + 1; }
    std::size_t line_index(std::size_t line) const noexcept { return 2 * ders_.size() + line; }
    std::size_t pcc_index() const noexcept { return state_size() - 1; }

    std::string node_name(std::size_t node) const;
    double node_voltage(std::span<const double> state, std::size_t node) const;
    double node_capacitance(std::size_t node) const;

    const std::vector<ConverterPlant>& ders() const noexcept { return ders_; }
    const std::vector<RlLine>& lines() const noexcept { return lines_; }
    const PccNode& pcc() const noexcept { return pcc_; }
    const ConstantPowerLoad& cpl() const noexcept { return cpl_; }
    const std::optional<HarmonicCurrentLoad>& harmonic_load() const noexcept { return harmonic_; }
    std::size_t harmonic_node() const noexcept { return harmonic_node_; }

    void set_cpl_power(double watts);

    NodeCurrents evaluate(double t, std::span<const double> state) const;

    /// d/dt of every state. `commanded` holds the already-saturated converter
    /// voltage of each DER. Throws VoltageCollapse when a CPL is drawing power
    /// and any node voltage is at or below its floor.
    void derivatives(double t, std::span<const double> state, std::span<const double> commanded,
                     std::span<double> out) const;

    /// KCL residual per node, |sum(currents in) - C dv/dt|, recomputed from
    /// branch currents independently of derivatives().
    std::vector<double> kcl_residuals(double t, std::span<const double> state,
                                      std::span<const double> deriv) const;

    /// State at rest: capacitor voltages at `voltage`, all currents zero.
    std::vector<double> initial_state(double voltage) const;

private:
    double harmonic_at(std::size_t node, double t) const noexcept;

    std::vector<ConverterPlant> ders_;
    std::vector<RlLine> lines_;
    PccNode pcc_;
    ConstantPowerLoad cpl_;
    std::optional<HarmonicCurrentLoad> harmonic_;
    std::size_t harmonic_node_;
};

}  // namespace dcgrid
