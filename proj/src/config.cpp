#include "dcgrid/config.hpp"

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <toml.hpp>

#include "dcgrid/errors.hpp"

namespace dcgrid {

namespace {

constexpr std::string_view kPaperFig4 = "paper-fig4";

// Reads one table, remembering which keys were consumed so that leftovers
// can be rejected.
class TableReader {
public:
    TableReader(const toml::table& table, std::string path, std::size_t entry = 0)
        : table_(table), path_(std::move(path)), entry_(entry) {}

    [[noreturn]] void fail(std::string_view key, const std::string& what) const {
        const std::string where = key.empty() ? path_ : path_.empty() ? std::string(key) : path_ + "." + std::string(key);
        throw ConfigError(where, entry_ ? "entry " + std::to_string(entry_) + ": " + what : what);
    }

    const toml::node* find(std::string_view key) {
        used_.insert(std::string(key));
        return table_.get(key);
    }

    std::optional<double> number(std::string_view key) {
        const toml::node* n = find(key);
        if (!n) return std::nullopt;
        if (auto v = n->value_exact<double>()) return *v;
        if (auto v = n->value_exact<std::int64_t>()) return static_cast<double>(*v);
        fail(key, "expected a number");
    }

    double required_number(std::string_view key) {
        if (auto v = number(key)) return *v;
        fail(key, "missing required key");
    }

    void optional_number(std::string_view key, double& out) {
        if (auto v = number(key)) out = *v;
    }

    std::optional<std::int64_t> integer(std::string_view key) {
        const toml::node* n = find(key);
        if (!n) return std::nullopt;
        if (auto v = n->value_exact<std::int64_t>()) return *v;
        fail(key, "expected an integer");
    }

    void optional_int(std::string_view key, int& out) {
        if (auto v = integer(key)) {
            if (*v < INT32_MIN || *v > INT32_MAX) fail(key, "integer out of range");
            out = static_cast<int>(*v);
        }
    }

    std::optional<std::string> string(std::string_view key) {
        const toml::node* n = find(key);
        if (!n) return std::nullopt;
        if (auto v = n->value_exact<std::string>()) return *v;
        fail(key, "expected a string");
    }

    std::string required_string(std::string_view key) {
        if (auto v = string(key)) return *v;
        fail(key, "missing required key");
    }

    std::size_t node(std::string_view key, std::size_t der_count, bool required) {
        const auto text = required ? std::optional(required_string(key)) : string(key);
        if (!text) return 0;
        if (auto n = parse_node_name(*text, der_count)) return *n;
        fail(key, "unknown node '" + *text + "' (expected der1..der" + std::to_string(der_count) + " or pcc)");
    }

    std::size_t der(std::string_view key, std::size_t der_count, bool required) {
        const std::size_t n = node(key, der_count, required);
        if (n >= der_count) fail(key, "expected a DER (der1..der" + std::to_string(der_count) + ")");
        return n;
    }

    void finish() const {
        for (const auto& [k, v] : table_) {
            if (!used_.count(std::string(k.str()))) fail(k.str(), "unknown key");
        }
    }

private:
    const toml::table& table_;
    std::string path_;
    std::size_t entry_;
    std::set<std::string> used_;
};

const toml::table* sub_table(TableReader& r, std::string_view key) {
    const toml::node* n = r.find(key);
    if (!n) return nullptr;
    if (const auto* t = n->as_table()) return t;
    r.fail(key, "expected a table");
}

std::vector<const toml::table*> table_array(TableReader& r, std::string_view key) {
    std::vector<const toml::table*> out;
    const toml::node* n = r.find(key);
    if (!n) return out;
    const auto* arr = n->as_array();
    if (!arr) r.fail(key, "expected an array of tables");
    for (const auto& e : *arr) {
        const auto* t = e.as_table();
        if (!t) r.fail(key, "expected an array of tables");
        out.push_back(t);
    }
    return out;
}

void read_solver(TableReader r, SolverSettings& s, bool overrides_only) {
    if (overrides_only) {
        r.optional_number("dt", s.dt);
        r.optional_number("duration", s.duration);
    } else {
        s.dt = r.required_number("dt");
        s.duration = r.required_number("duration");
    }
    r.optional_int("decimation", s.decimation);
    r.optional_number("initial_voltage", s.initial_voltage);
    r.optional_number("settle_exclusion", s.settle_exclusion);
    r.finish();
}

DerSpec read_der(TableReader r) {
    DerSpec d;
    d.plant.l_f = r.required_number("l_f");
    d.plant.c_t = r.required_number("c_t");
    r.optional_number("e_limit", d.plant.e_limit);

    auto& c = d.control;
    c.v_max = r.required_number("v_max");
    c.v_min = r.required_number("v_min");
    c.p_max = r.required_number("p_max");
    c.kp_v = r.required_number("kp_v");
    c.ki_v = r.required_number("ki_v");
    c.kp_i = r.required_number("kp_i");
    c.lpf_cutoff = r.required_number("lpf_cutoff");
    r.optional_number("comp_fraction", c.comp_fraction);
    r.optional_number("i_limit", c.i_limit);

    const auto kr = r.number("kr");
    const auto wc = r.number("omega_c");
    const auto w0 = r.number("omega_0");
    if (kr || wc || w0) {
        if (!(kr && wc && w0)) r.fail("kr", "kr, omega_c and omega_0 must be given together");
        c.resonant = ResonantParams{*kr, *wc, *w0};
    }
    if (auto m = r.string("mode")) {
        auto mode = parse_control_mode(*m);
        if (!mode) r.fail("mode", "expected one of vcm, ccm, hcm");
        c.mode = *mode;
    }
    r.finish();
    return d;
}

RlLine read_line(TableReader r, std::size_t der_count) {
    RlLine ln;
    ln.r = r.required_number("r");
    ln.l = r.required_number("l");
    ln.from = r.node("from", der_count, true);
    ln.to = r.node("to", der_count, true);
    r.finish();
    return ln;
}

Event read_event(TableReader r, std::size_t der_count) {
    Event ev;
    ev.time = r.required_number("time");
    const std::string action = r.required_string("action");
    if (action == "set_mode") {
        SetMode a;
        a.der = r.der("der", der_count, true);
        const auto mode = parse_control_mode(r.required_string("mode"));
        if (!mode) r.fail("mode", "expected one of vcm, ccm, hcm");
        a.mode = *mode;
        ev.action = a;
    } else if (action == "set_cpl_power") {
        ev.action = SetCplPower{r.required_number("power")};
    } else if (action == "set_comp_fraction") {
        SetCompFraction a;
        a.der = r.der("der", der_count, true);
        a.fraction = r.required_number("fraction");
        ev.action = a;
    } else {
        r.fail("action", "expected one of set_mode, set_cpl_power, set_comp_fraction");
    }
    r.finish();
    return ev;
}

void read_sweep(TableReader r, SweepConfig& s, std::size_t der_count) {
    if (const toml::node* n = r.find("frequencies")) {
        const auto* arr = n->as_array();
        if (!arr || arr->empty()) r.fail("frequencies", "expected a non-empty array of numbers");
        s.frequencies.clear();
        for (const auto& e : *arr) {
            if (auto v = e.value_exact<double>()) s.frequencies.push_back(*v);
            else if (auto i = e.value_exact<std::int64_t>()) s.frequencies.push_back(static_cast<double>(*i));
            else r.fail("frequencies", "expected a non-empty array of numbers");
        }
    }
    r.optional_number("voltage_amplitude", s.voltage_amplitude);
    r.optional_number("current_amplitude", s.current_amplitude);
    r.optional_int("min_settle_periods", s.min_settle_periods);
    r.optional_number("settle_seconds", s.settle_seconds);
    r.optional_int("measure_periods", s.measure_periods);
    r.optional_number("warmup", s.warmup);
    if (r.find("der")) s.der = r.der("der", der_count, true);
    r.finish();
}

Config build_config(const toml::table& root) {
    TableReader top(root, "");
    const auto schema = top.integer("schema");
    if (!schema) top.fail("schema", "missing required key (expected schema = 1)");
    if (*schema != kConfigSchema) {
        top.fail("schema", "unsupported schema version " + std::to_string(*schema) + " (expected 1)");
    }

    Config cfg;
    const auto preset = top.string("preset");
    if (preset) {
        cfg = preset_config(*preset);
        for (const char* k : {"der", "line", "pcc", "cpl", "harmonic_load", "event"}) {
            if (root.contains(k)) {
                top.fail(k, "only [solver] and [sweep] may be combined with a preset");
            }
        }
        if (const auto* t = sub_table(top, "solver")) read_solver(TableReader(*t, "[solver]"), cfg.scenario.solver, true);
    } else {
        const auto* solver = sub_table(top, "solver");
        if (!solver) throw ConfigError("[solver]", "missing required table");
        read_solver(TableReader(*solver, "[solver]"), cfg.scenario.solver, false);

        auto& net = cfg.scenario.network;
        const auto ders = table_array(top, "der");
        for (std::size_t k = 0; k < ders.size(); ++k) net.ders.push_back(read_der(TableReader(*ders[k], "[[der]]", k + 1)));
        const std::size_t nd = net.ders.size();

        const auto lines = table_array(top, "line");
        for (std::size_t j = 0; j < lines.size(); ++j) {
            net.lines.push_back(read_line(TableReader(*lines[j], "[[line]]", j + 1), nd));
        }

        const auto* pcc = sub_table(top, "pcc");
        if (!pcc) throw ConfigError("[pcc]", "missing required table");
        TableReader pr(*pcc, "[pcc]");
        net.pcc.c_pcc = pr.required_number("c_pcc");
        pr.finish();

        const auto* cpl = sub_table(top, "cpl");
        if (!cpl) throw ConfigError("[cpl]", "missing required table");
        TableReader cr(*cpl, "[cpl]");
        net.cpl.power = cr.required_number("power");
        cr.optional_number("v_floor", net.cpl.v_floor);
        cr.finish();

        if (const auto* h = sub_table(top, "harmonic_load")) {
            TableReader hr(*h, "[harmonic_load]");
            HarmonicLoadSpec spec;
            spec.load.i_dc = hr.required_number("i_dc");
            spec.load.i_h = hr.required_number("i_h");
            spec.load.f_h = hr.required_number("f_h");
            hr.optional_number("phase", spec.load.phase);
            spec.node = hr.node("attach", nd, true);
            hr.finish();
            net.harmonic = spec;
        }

        const auto events = table_array(top, "event");
        for (std::size_t e = 0; e < events.size(); ++e) {
            cfg.scenario.events.push_back(read_event(TableReader(*events[e], "[[event]]", e + 1), nd));
        }
    }
    if (const auto* t = sub_table(top, "sweep")) {
        read_sweep(TableReader(*t, "[sweep]"), cfg.sweep, cfg.scenario.network.ders.size());
    }
    top.finish();

    cfg.scenario.validate();
    cfg.sweep.validate(cfg.scenario);
    return cfg;
}

// Shortest representation that reads back to the same double, always
// spelled as a TOML float.
std::string num(double v) {
    std::string s = fmt::format("{}", v);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

}  // namespace

std::vector<std::string> preset_names() { return {std::string(kPaperFig4)}; }

Config preset_config(std::string_view name) {
    if (name != kPaperFig4) {
        throw ConfigError("preset", "unknown preset '" + std::string(name) + "' (available: paper-fig4)");
    }
    Config cfg;
    cfg.scenario = paper_fig4_scenario();
    return cfg;
}

std::string node_name(std::size_t node, std::size_t der_count) {
    return node < der_count ? "der" + std::to_string(node + 1) : "pcc";
}

std::optional<std::size_t> parse_node_name(std::string_view name, std::size_t der_count) {
    if (name == "pcc") return der_count;
    if (name.size() < 4 || name.substr(0, 3) != "der") return std::nullopt;
    std::size_t k = 0;
    for (char c : name.substr(3)) {
        if (c < '0' || c > '9') return std::nullopt;
        k = k * 10 + static_cast<std::size_t>(c - '0');
        if (k > der_count) return std::nullopt;
    }
    if (k < 1) return std::nullopt;
    return k - 1;
}

Config parse_config(std::string_view text, std::string_view source) {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        const auto& b = e.source().begin;
        throw ConfigError(std::string(source) + ":" + std::to_string(b.line) + ":" + std::to_string(b.column),
                          std::string(e.description()));
    }
    return build_config(root);
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string(), "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string to_toml(const Config& config) {
    const Scenario& sc = config.scenario;
    const auto& net = sc.network;
    const std::size_t nd = net.ders.size();
    std::string out;
    auto line = [&out](std::string_view key, const std::string& value) {
        out += fmt::format("{} = {}\n", key, value);
    };
    auto quoted = [](std::string_view s) { return fmt::format("\"{}\"", s); };

    line("schema", std::to_string(kConfigSchema));

    out += "\n[solver]\n";
    line("dt", num(sc.solver.dt));
    line("duration", num(sc.solver.duration));
    line("decimation", std::to_string(sc.solver.decimation));
    line("initial_voltage", num(sc.solver.initial_voltage));
    line("settle_exclusion", num(sc.solver.settle_exclusion));

    for (const auto& d : net.ders) {
        const auto& c = d.control;
        out += "\n[[der]]\n";
        line("v_max", num(c.v_max));
        line("v_min", num(c.v_min));
        line("p_max", num(c.p_max));
        line("l_f", num(d.plant.l_f));
        line("c_t", num(d.plant.c_t));
        line("e_limit", num(d.plant.e_limit));
        line("kp_v", num(c.kp_v));
        line("ki_v", num(c.ki_v));
        if (c.resonant) {
            line("kr", num(c.resonant->kr));
            line("omega_c", num(c.resonant->omega_c));
            line("omega_0", num(c.resonant->omega_0));
        }
        line("kp_i", num(c.kp_i));
        line("lpf_cutoff", num(c.lpf_cutoff));
        line("comp_fraction", num(c.comp_fraction));
        line("i_limit", num(c.resolved_i_limit()));
        line("mode", quoted(to_string(c.mode)));
    }

    for (const auto& ln : net.lines) {
        out += "\n[[line]]\n";
        line("r", num(ln.r));
        line("l", num(ln.l));
        line("from", quoted(node_name(ln.from, nd)));
        line("to", quoted(node_name(ln.to, nd)));
    }

    out += "\n[pcc]\n";
    line("c_pcc", num(net.pcc.c_pcc));

    out += "\n[cpl]\n";
    line("power", num(net.cpl.power));
    line("v_floor", num(net.cpl.v_floor));

    if (net.harmonic) {
        out += "\n[harmonic_load]\n";
        line("i_dc", num(net.harmonic->load.i_dc));
        line("i_h", num(net.harmonic->load.i_h));
        line("f_h", num(net.harmonic->load.f_h));
        line("phase", num(net.harmonic->load.phase));
        line("attach", quoted(node_name(net.harmonic->node, nd)));
    }

    for (const auto& ev : sc.events) {
        out += "\n[[event]]\n";
        line("time", num(ev.time));
        std::visit(
            [&](const auto& a) {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, SetMode>) {
                    line("action", quoted("set_mode"));
                    line("der", quoted(node_name(a.der, nd)));
                    line("mode", quoted(to_string(a.mode)));
                } else if constexpr (std::is_same_v<T, SetCplPower>) {
                    line("action", quoted("set_cpl_power"));
                    line("power", num(a.watts));
                } else {
                    line("action", quoted("set_comp_fraction"));
                    line("der", quoted(node_name(a.der, nd)));
                    line("fraction", num(a.fraction));
                }
            },
            ev.action);
    }

    const auto& sw = config.sweep;
    out += "\n[sweep]\n";
    line("der", quoted(node_name(sw.der, nd)));
    line("voltage_amplitude", num(sw.voltage_amplitude));
    line("current_amplitude", num(sw.current_amplitude));
    line("min_settle_periods", std::to_string(sw.min_settle_periods));
    line("settle_seconds", num(sw.settle_seconds));
    line("measure_periods", std::to_string(sw.measure_periods));
    line("warmup", num(sw.warmup));
    out += "frequencies = [";
    for (std::size_t i = 0; i < sw.frequencies.size(); ++i) {
        out += (i % 6 == 0 ? "\n    " : " ") + num(sw.frequencies[i]) + ",";
    }
    out += "\n]\n";
    return out;
}

std::string config_hash(const Config& config) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : to_toml(config)) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return fmt::format("{:016x}", h);
}

}  // namespace dcgrid
