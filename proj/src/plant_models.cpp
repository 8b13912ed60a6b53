#include "dcgrid/plant_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dcgrid/errors.hpp"

namespace dcgrid {

double ConverterPlant::saturate(double e_ref) const noexcept {
    return std::clamp(e_ref, -e_limit, e_limit);
}

double ConstantPowerLoad::current(double v) const noexcept {
    return power / std::max(v, v_floor);
}

double HarmonicCurrentLoad::current(double t) const noexcept {
    return i_dc + i_h * std::sin(2.0 * std::numbers::pi * f_h * t + phase);
}

Network::Network(std::vector<ConverterPlant> ders, std::vector<RlLine> lines, PccNode pcc,
                 ConstantPowerLoad cpl, std::optional<HarmonicCurrentLoad> harmonic_load,
                 std::size_t harmonic_node)
    : ders_(std::move(ders)),
      lines_(std::move(lines)),
      pcc_(pcc),
      cpl_(cpl),
      harmonic_(harmonic_load),
      harmonic_node_(harmonic_node) {
    if (ders_.empty()) {
        throw std::invalid_argument("Network: at least one DER is required");
    }
    for (const auto& d : ders_) {
        if (!(d.l_f > 0.0) || !(d.c_t > 0.0) || !(d.e_limit > 0.0)) {
            throw std::invalid_argument("Network: converter l_f, c_t and e_limit must be > 0");
        }
    }
    if (!(pcc_.c_pcc > 0.0)) {
        throw std::invalid_argument("Network: c_pcc must be > 0");
    }
    if (!(cpl_.power >= 0.0) || !(cpl_.v_floor > 0.0)) {
        throw std::invalid_argument("Network: CPL power must be >= 0 and v_floor > 0");
    }
    if (harmonic_) {
        if (harmonic_node_ >= node_count()) {
            throw std::invalid_argument("Network: harmonic load attached to unknown node");
        }
        if (!(harmonic_->i_dc >= 0.0) || !(harmonic_->i_h >= 0.0) || !(harmonic_->f_h > 0.0)) {
            throw std::invalid_argument("Network: harmonic load needs i_dc >= 0, i_h >= 0, f_h > 0");
        }
    }

    // Union-find over nodes for the connectivity check.
    std::vector<std::size_t> parent(node_count());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t j = 0; j < lines_.size(); ++j) {
        const auto& ln = lines_[j];
        if (ln.from >= node_count() || ln.to >= node_count()) {
            throw std::invalid_argument("Network: line " + std::to_string(j + 1) +
                                        " references a node that does not exist");
        }
        if (ln.from == ln.to) {
            throw std::invalid_argument("Network: line " + std::to_string(j + 1) + " is a self-loop");
        }
        if (!(ln.r >= 0.0) || !(ln.l > 0.0)) {
            throw std::invalid_argument("Network: line " + std::to_string(j + 1) + " needs r >= 0, l > 0");
        }
        parent[find(ln.from)] = find(ln.to);
    }
    const auto root = find(0);
    for (std::size_t n = 1; n < node_count(); ++n) {
        if (find(n) != root) {
            throw std::invalid_argument("Network: node '" + node_name(n) + "' is not connected");
        }
    }
}

std::string Network::node_name(std::size_t node) const {
    if (node == pcc_node()) return "pcc";
    return "der" + std::to_string(node + 1);
}

double Network::node_voltage(std::span<const double> state, std::size_t node) const {
    return node == pcc_node() ? state[pcc_index()] : state[vt_index(node)];
}

double Network::node_capacitance(std::size_t node) const {
    return node == pcc_node() ? pcc_.c_pcc : ders_[node].c_t;
}

void Network::set_cpl_power(double watts) {
    if (!std::isfinite(watts) || watts < 0.0) {
        throw std::invalid_argument("Network: CPL power must be finite and >= 0");
    }
    cpl_.power = watts;
}

double Network::harmonic_at(std::size_t node, double t) const noexcept {
    return (harmonic_ && harmonic_node_ == node) ? harmonic_->current(t) : 0.0;
}

NodeCurrents Network::evaluate(double t, std::span<const double> state) const {
    NodeCurrents nc;
    nc.der_i_out.assign(ders_.size(), 0.0);
    nc.der_local_load.assign(ders_.size(), 0.0);
    nc.harmonic_load = harmonic_ ? harmonic_->current(t) : 0.0;
    nc.cpl = cpl_.current(state[pcc_index()]);
    for (std::size_t k = 0; k < ders_.size(); ++k) {
        nc.der_local_load[k] = harmonic_at(k, t);
        nc.der_i_out[k] = nc.der_local_load[k];
    }
    for (std::size_t j = 0; j < lines_.size(); ++j) {
        const double i = state[line_index(j)];
        if (lines_[j].from < ders_.size()) nc.der_i_out[lines_[j].from] += i;
        if (lines_[j].to < ders_.size()) nc.der_i_out[lines_[j].to] -= i;
    }
    return nc;
}

void Network::derivatives(double t, std::span<const double> state, std::span<const double> commanded,
                          std::span<double> out) const {
    if (cpl_.power > 0.0) {
        for (std::size_t n = 0; n < node_count(); ++n) {
            const double v = node_voltage(state, n);
            if (v <= cpl_.v_floor) {
                throw VoltageCollapse(node_name(n), v, t);
            }
        }
    }

    const double hload = harmonic_ ? harmonic_->current(t) : 0.0;
    const std::size_t pcc = pcc_node();
    double pcc_in = -cpl_.current(state[pcc_index()]);
    if (harmonic_ && harmonic_node_ == pcc) pcc_in -= hload;

    for (std::size_t k = 0; k < ders_.size(); ++k) {
        out[il_index(k)] = (commanded[k] - state[vt_index(k)]) / ders_[k].l_f;
        out[vt_index(k)] = state[il_index(k)];
        if (harmonic_ && harmonic_node_ == k) out[vt_index(k)] -= hload;
    }
    for (std::size_t j = 0; j < lines_.size(); ++j) {
        const auto& ln = lines_[j];
        const double i = state[line_index(j)];
        const double v_from = node_voltage(state, ln.from);
        const double v_to = node_voltage(state, ln.to);
        out[line_index(j)] = (v_from - ln.r * i - v_to) / ln.l;

        // out[vt] holds the net current into each DER terminal until scaled below
        if (ln.from == pcc) pcc_in -= i; else out[vt_index(ln.from)] -= i;
        if (ln.to == pcc) pcc_in += i; else out[vt_index(ln.to)] += i;
    }
    for (std::size_t k = 0; k < ders_.size(); ++k) {
        out[vt_index(k)] /= ders_[k].c_t;
    }
    out[pcc_index()] = pcc_in / pcc_.c_pcc;
}

std::vector<double> Network::kcl_residuals(double t, std::span<const double> state,
                                           std::span<const double> deriv) const {
    std::vector<double> into(node_count(), 0.0);
    for (std::size_t k = 0; k < ders_.size(); ++k) {
        into[k] += state[il_index(k)];
    }
    for (std::size_t j = 0; j < lines_.size(); ++j) {
        into[lines_[j].from] -= state[line_index(j)];
        into[lines_[j].to] += state[line_index(j)];
    }
    if (harmonic_) into[harmonic_node_] -= harmonic_->current(t);
    into[pcc_node()] -= cpl_.current(state[pcc_index()]);

    std::vector<double> residual(node_count());
    for (std::size_t n = 0; n < node_count(); ++n) {
        const double dv = n == pcc_node() ? deriv[pcc_index()] : deriv[vt_index(n)];
        residual[n] = std::abs(into[n] - node_capacitance(n) * dv);
    }
    return residual;
}

std::vector<double> Network::initial_state(double voltage) const {
    std::vector<double> x(state_size(), 0.0);
    for (std::size_t k = 0; k < ders_.size(); ++k) x[vt_index(k)] = voltage;
    x[pcc_index()] = voltage;
    return x;
}

}  // namespace dcgrid
