#pragma once

// TOML configuration: parsing with unknown-key rejection, the built-in
// presets, and a serializer whose output parses back to the same values.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcgrid/freq_analysis.hpp"
#include "dcgrid/scenario.hpp"

namespace dcgrid {

inline constexpr int kConfigSchema = 1;

struct Config {
    Scenario scenario;
    SweepConfig sweep;
};

std::vector<std::string> preset_names();

/// Throws ConfigError for an unknown name.
Config preset_config(std::string_view name);

/// Parses and validates. Syntax errors are reported as ConfigError with
/// where() = "<source>:<line>:<column>"; schema errors name the key.
Config parse_config(std::string_view text, std::string_view source = "<config>");

Config load_config(const std::filesystem::path& path);

/// Fully resolved TOML (presets expanded, defaults written out).
std::string to_toml(const Config& config);

/// 64-bit FNV-1a of the resolved TOML, as 16 hex digits.
std::string config_hash(const Config& config);

/// "der1".."derN" for DER terminals, "pcc" for the PCC node.
std::string node_name(std::size_t node, std::size_t der_count);
std::optional<std::size_t> parse_node_name(std::string_view name, std::size_t der_count);

}  // namespace dcgrid
