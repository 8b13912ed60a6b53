#pragma once

#include <stdexcept>
#include <string>

namespace dcgrid {

/// A controller or plant received a NaN/Inf input. State is left untouched.
class NonFiniteInput : public std::domain_error {
public:
    explicit NonFiniteInput(const std::string& what) : std::domain_error(what) {}
};

/// Numerical failure during a time-domain run (NaN state, voltage collapse).
class SimulationError : public std::runtime_error {
public:
    SimulationError(const std::string& what, double time)
        : std::runtime_error(what), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

/// A node voltage fell to the CPL floor. Signals constant-power-load
/// instability, not a code bug.
class VoltageCollapse : public SimulationError {
public:
    VoltageCollapse(const std::string& node, double voltage, double time)
        : SimulationError("voltage collapse at node '" + node + "' (v=" + std::to_string(voltage) +
                              " V, t=" + std::to_string(time) + " s)",
                          time),
          node_(node) {}

    const std::string& node() const noexcept { return node_; }

private:
    std::string node_;
};

/// Invalid configuration. `where` names the offending key, e.g. "[[line]].l".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string where, const std::string& what)
        : std::runtime_error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}

    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

}  // namespace dcgrid
